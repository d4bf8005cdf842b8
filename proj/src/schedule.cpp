#include "urbandiff/schedule.hpp"

#include <string>

namespace urbandiff {

NoiseSchedule build_linear_schedule(int total_steps, double beta_start, double beta_end) {
    if (total_steps < 1)
        throw ParameterError("total_steps must be >= 1, got " + std::to_string(total_steps));
    if (!(beta_start > 0.0))
        throw ParameterError("beta_start must be > 0, got " + std::to_string(beta_start));
    if (!(beta_end < 1.0))
        throw ParameterError("beta_end must be < 1, got " + std::to_string(beta_end));
    if (!(beta_start <= beta_end))
        throw ParameterError("beta_start must be <= beta_end, got beta_start=" +
                             std::to_string(beta_start) + " beta_end=" + std::to_string(beta_end));

    NoiseSchedule s;
    s.total_steps = total_steps;
    s.betas.resize(total_steps);
    s.alphas.resize(total_steps);
    s.alpha_bars.resize(total_steps);
    s.posterior_vars.resize(total_steps);

    for (int i = 0; i < total_steps; ++i) {
        const double f = total_steps == 1
                             ? 0.0
                             : static_cast<double>(i) / static_cast<double>(total_steps - 1);
        s.betas[i] = beta_start + (beta_end - beta_start) * f;
    }

    double running = 1.0;
    for (int i = 0; i < total_steps; ++i) {
        s.alphas[i] = 1.0 - s.betas[i];
        const double prev_bar = running;
        running *= s.alphas[i];
        s.alpha_bars[i] = running;
        // beta~_1 = 0: the final reverse step is deterministic.
        s.posterior_vars[i] = s.betas[i] * (1.0 - prev_bar) / (1.0 - s.alpha_bars[i]);
    }
    return s;
}

}  // namespace urbandiff
