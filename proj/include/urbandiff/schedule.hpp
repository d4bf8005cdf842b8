#pragma once

#include <vector>

#include "urbandiff/errors.hpp"

namespace urbandiff {

// Variance schedule of the diffusion process.
//
// Timestep convention: physical steps are 1-based, t in {1..T}; t = 0 is the
// clean sample. beta(t), alpha(t), posterior_var(t) are defined for t in
// [1, T]; alpha_bar(t) for t in [0, T] with alpha_bar(0) = 1 (empty product).
// All sequences are kept in 64-bit: the running product of ~1000 alphas is
// not representable accurately in 32-bit.
struct NoiseSchedule {
    int total_steps = 0;                 // T
    std::vector<double> betas;           // betas[i] = beta_{i+1}
    std::vector<double> alphas;          // alpha_t = 1 - beta_t
    std::vector<double> alpha_bars;      // running product of alphas
    std::vector<double> posterior_vars;  // beta~_t = beta_t (1-abar_{t-1})/(1-abar_t)

    double beta(int t) const { return betas[check(t)]; }
    double alpha(int t) const { return alphas[check(t)]; }
    double posterior_var(int t) const { return posterior_vars[check(t)]; }

    double alpha_bar(int t) const {
        if (t == 0) return 1.0;
        return alpha_bars[check(t)];
    }

private:
    int check(int t) const {
        if (t < 1 || t > total_steps)
            throw DomainError("timestep " + std::to_string(t) + " outside [1, " +
                              std::to_string(total_steps) + "]");
        return t - 1;
    }
};

// Linear schedule: betas interpolated from beta_start to beta_end inclusive.
NoiseSchedule build_linear_schedule(int total_steps, double beta_start, double beta_end);

// Declarative form that travels inside model files and manifests.
struct ScheduleSpec {
    int total_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;

    bool operator==(const ScheduleSpec&) const = default;
};

inline NoiseSchedule build_schedule(const ScheduleSpec& spec) {
    return build_linear_schedule(spec.total_steps, spec.beta_start, spec.beta_end);
}

}  // namespace urbandiff
