#pragma once

#include <optional>

#include "urbandiff/grid.hpp"
#include "urbandiff/rng.hpp"
#include "urbandiff/schedule.hpp"

namespace urbandiff {

struct NoisySample {
    Grid values;
    int timestep = 0;                 // 0 = clean
    std::optional<Grid> noise_used;
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
NoisySample forward_sample(const Grid& x0, int t, const Grid& noise, const NoiseSchedule& sched);
NoisySample forward_sample(const Grid& x0, int t, Rng& rng, const NoiseSchedule& sched);

// One-step clean estimate: (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)
Grid predict_clean(const Grid& xt, int t, const Grid& eps_hat, const NoiseSchedule& sched);
Grid predict_clean(const NoisySample& xt, const Grid& eps_hat, const NoiseSchedule& sched);

// Ancestral reverse step t -> t-1 with predicted noise in place of the true
// noise. Variance is the posterior beta~_t; at t = 1 the step is
// deterministic and the result carries timestep 0.
NoisySample posterior_step(const NoisySample& xt, const Grid& eps_hat, const NoiseSchedule& sched,
                           const Grid& noise);

// Reverse transition between two (not necessarily adjacent) physical steps
// s -> s_next, s_next < s, s_next = 0 meaning clean. For s_next = s - 1 this
// is algebraically the same map as posterior_step. Used by subsampled
// inference schedules.
Grid reverse_transition(const Grid& xs, int s, int s_next, const Grid& eps_hat,
                        const NoiseSchedule& sched, const Grid& noise);

}  // namespace urbandiff
