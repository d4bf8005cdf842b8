#include "urbandiff/diffusion.hpp"

#include <cmath>
#include <string>

namespace urbandiff {

namespace {

void check_timestep(int t, const NoiseSchedule& sched, const char* op) {
    if (t < 1 || t > sched.total_steps)
        throw DomainError(std::string(op) + ": timestep " + std::to_string(t) +
                          " outside [1, " + std::to_string(sched.total_steps) + "]");
}

}  // namespace

NoisySample forward_sample(const Grid& x0, int t, const Grid& noise, const NoiseSchedule& sched) {
    check_timestep(t, sched, "forward_sample");
    require_same_shape(x0, noise, "forward_sample");

    const double abar = sched.alpha_bar(t);
    const float c0 = static_cast<float>(std::sqrt(abar));
    const float cn = static_cast<float>(std::sqrt(1.0 - abar));

    NoisySample out;
    out.values = Grid(x0.rows(), x0.cols());
    out.timestep = t;
    for (std::size_t i = 0; i < x0.size(); ++i) out.values[i] = c0 * x0[i] + cn * noise[i];
    out.noise_used = noise;
    return out;
}

NoisySample forward_sample(const Grid& x0, int t, Rng& rng, const NoiseSchedule& sched) {
    Grid noise = gaussian_grid(x0.rows(), x0.cols(), rng);
    return forward_sample(x0, t, noise, sched);
}

Grid predict_clean(const Grid& xt, int t, const Grid& eps_hat, const NoiseSchedule& sched) {
    if (t == 0) throw DomainError("predict_clean: timestep 0 has no noise to remove");
    check_timestep(t, sched, "predict_clean");
    require_same_shape(xt, eps_hat, "predict_clean");

    const double abar = sched.alpha_bar(t);
    const float cn = static_cast<float>(std::sqrt(1.0 - abar));
    const float inv = static_cast<float>(1.0 / std::sqrt(abar));

    Grid out(xt.rows(), xt.cols());
    for (std::size_t i = 0; i < xt.size(); ++i) out[i] = (xt[i] - cn * eps_hat[i]) * inv;
    return out;
}

Grid predict_clean(const NoisySample& xt, const Grid& eps_hat, const NoiseSchedule& sched) {
    return predict_clean(xt.values, xt.timestep, eps_hat, sched);
}

NoisySample posterior_step(const NoisySample& xt, const Grid& eps_hat, const NoiseSchedule& sched,
                           const Grid& noise) {
    const int t = xt.timestep;
    check_timestep(t, sched, "posterior_step");
    require_same_shape(xt.values, eps_hat, "posterior_step");
    require_same_shape(xt.values, noise, "posterior_step");

    const double alpha = sched.alpha(t);
    const double abar = sched.alpha_bar(t);
    const float eps_coef = static_cast<float>((1.0 - alpha) / std::sqrt(1.0 - abar));
    const float inv_sqrt_alpha = static_cast<float>(1.0 / std::sqrt(alpha));
    const float sigma = t > 1 ? static_cast<float>(std::sqrt(sched.posterior_var(t))) : 0.0f;

    NoisySample out;
    out.values = Grid(xt.values.rows(), xt.values.cols());
    out.timestep = t - 1;
    for (std::size_t i = 0; i < xt.values.size(); ++i) {
        const float mean = (xt.values[i] - eps_coef * eps_hat[i]) * inv_sqrt_alpha;
        out.values[i] = mean + sigma * noise[i];
    }
    return out;
}

Grid reverse_transition(const Grid& xs, int s, int s_next, const Grid& eps_hat,
                        const NoiseSchedule& sched, const Grid& noise) {
    check_timestep(s, sched, "reverse_transition");
    if (s_next < 0 || s_next >= s)
        throw DomainError("reverse_transition: target step " + std::to_string(s_next) +
                          " must be in [0, " + std::to_string(s - 1) + "]");
    require_same_shape(xs, eps_hat, "reverse_transition");
    require_same_shape(xs, noise, "reverse_transition");

    const double abar_s = sched.alpha_bar(s);
    const double abar_n = sched.alpha_bar(s_next);
    // Variance of the generalized posterior q(x_n | x_s, x0); equals beta~_s
    // when s_next = s - 1 and 0 when s_next = 0.
    const double var = (1.0 - abar_n) / (1.0 - abar_s) * (1.0 - abar_s / abar_n);
    const double dir = std::sqrt(std::max(1.0 - abar_n - var, 0.0));

    const float c_clean = static_cast<float>(std::sqrt(abar_n));
    const float c_dir = static_cast<float>(dir);
    const float sigma = static_cast<float>(std::sqrt(std::max(var, 0.0)));

    const float cn = static_cast<float>(std::sqrt(1.0 - abar_s));
    const float inv = static_cast<float>(1.0 / std::sqrt(abar_s));

    Grid out(xs.rows(), xs.cols());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const float x0_hat = (xs[i] - cn * eps_hat[i]) * inv;
        out[i] = c_clean * x0_hat + c_dir * eps_hat[i] + sigma * noise[i];
    }
    return out;
}

}  // namespace urbandiff
