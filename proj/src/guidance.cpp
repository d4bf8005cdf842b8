#include "urbandiff/guidance.hpp"

#include <cmath>
#include <string>

namespace urbandiff {

void MaskedScene::validate() const {
    require_same_shape(observed, mask, "masked scene");
    require_same_shape(observed, cond.built_up, "masked scene");
    cond.validate();
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0.0f && mask[i] != 1.0f)
            throw ParameterError("cloud mask must be binary");
        if (mask[i] == 0.0f && observed[i] != 0.0f)
            throw ParameterError("observed grid must be zero on hidden pixels");
    }
    if (truth) require_same_shape(observed, *truth, "masked scene truth");
}

MaskedScene make_masked_scene(const Grid& truth_norm, const Grid& mask,
                              const ConditioningStack& cond, bool keep_truth) {
    require_same_shape(truth_norm, mask, "make_masked_scene");
    MaskedScene out;
    out.mask = mask;
    out.cond = cond;
    out.observed = Grid(truth_norm.rows(), truth_norm.cols());
    for (std::size_t i = 0; i < truth_norm.size(); ++i)
        out.observed[i] = mask[i] != 0.0f ? truth_norm[i] : 0.0f;
    if (keep_truth) out.truth = truth_norm;
    out.validate();
    return out;
}

std::vector<int> build_trailing_schedule(int train_steps, int infer_steps) {
    if (train_steps < 1) throw ParameterError("train_steps must be >= 1");
    if (infer_steps < 1 || infer_steps > train_steps)
        throw ParameterError("infer_steps must lie in [1, " + std::to_string(train_steps) +
                             "], got " + std::to_string(infer_steps));

    std::vector<int> steps;
    steps.reserve(infer_steps);
    const double stride = static_cast<double>(train_steps) / infer_steps;
    for (int i = 0; i < infer_steps; ++i) {
        int s = train_steps - static_cast<int>(std::lround(i * stride));
        if (!steps.empty() && s >= steps.back()) s = steps.back() - 1;
        if (s < 1) s = 1;
        steps.push_back(s);
    }
    return steps;
}

Grid refine_step(const Grid& xt, int t, const MaskedScene& masked, NoisePredictor& predictor,
                 const NoiseSchedule& sched, double gamma, bool frozen_denoiser_grad,
                 double* loss_out) {
    Grid eps = predictor.predict(xt, masked.cond, t);
    Grid x0_hat = predict_clean(xt, t, eps, sched);

    const double abar = sched.alpha_bar(t);
    const double c = std::sqrt(abar);
    const double s_over_c = std::sqrt(1.0 - abar) / c;

    // dl/dx0_hat, sum reduction over revealed pixels.
    Grid cot(xt.rows(), xt.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < xt.size(); ++i) {
        if (masked.mask[i] == 0.0f) {
            cot[i] = 0.0f;
            continue;
        }
        const double r = static_cast<double>(x0_hat[i]) - masked.observed[i];
        loss += r * r;
        cot[i] = static_cast<float>(2.0 * r);
    }
    if (loss_out) *loss_out = loss;

    Grid grad(xt.rows(), xt.cols());
    if (frozen_denoiser_grad) {
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad[i] = static_cast<float>(cot[i] / c);
    } else {
        Grid vjp = predictor.input_grad(cot);
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad[i] = static_cast<float>(cot[i] / c - s_over_c * vjp[i]);
    }

    Grid out(xt.rows(), xt.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>(xt[i] - gamma * grad[i]);
        if (!std::isfinite(out[i]))
            throw GuidanceError("non-finite refinement update at timestep " + std::to_string(t));
    }
    return out;
}

Grid project_revealed(const Grid& xt_refined, const MaskedScene& masked, int t,
                      const NoiseSchedule& sched, Rng& rng, bool zero_noise) {
    if (t < 1) throw DomainError("project_revealed: timestep must be >= 1");
    const double abar = sched.alpha_bar(t);
    const float c0 = static_cast<float>(std::sqrt(abar));
    const float cn = static_cast<float>(std::sqrt(1.0 - abar));

    Grid out(xt_refined.rows(), xt_refined.cols());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (masked.mask[i] != 0.0f) {
            const float eps = zero_noise ? 0.0f : rng.normalf();
            out[i] = c0 * masked.observed[i] + cn * eps;
        } else {
            out[i] = xt_refined[i];
        }
    }
    return out;
}

namespace {

// Data-prediction multistep (second-order) update in log-SNR time; falls back
// to the first-order exponential-integrator step when no history exists.
struct HighOrderState {
    bool has_prev = false;
    Grid prev_x0;
    double prev_lambda = 0.0;
};

double log_snr(const NoiseSchedule& sched, int t) {
    const double abar = sched.alpha_bar(t);
    return 0.5 * std::log(abar / (1.0 - abar));
}

Grid high_order_step(const Grid& x, const Grid& x0_hat, int s, int s_next,
                     const NoiseSchedule& sched, HighOrderState& state) {
    if (s_next == 0) {
        state.has_prev = false;
        return x0_hat;
    }
    const double abar_s = sched.alpha_bar(s);
    const double abar_n = sched.alpha_bar(s_next);
    const double sigma_s = std::sqrt(1.0 - abar_s);
    const double sigma_n = std::sqrt(1.0 - abar_n);
    const double alpha_n = std::sqrt(abar_n);
    const double lam_s = log_snr(sched, s);
    const double lam_n = log_snr(sched, s_next);
    const double h = lam_n - lam_s;

    Grid data = x0_hat;
    if (state.has_prev) {
        const double h_prev = lam_s - state.prev_lambda;
        const double r = h_prev / h;
        const float c_cur = static_cast<float>(1.0 + 1.0 / (2.0 * r));
        const float c_prev = static_cast<float>(1.0 / (2.0 * r));
        for (std::size_t i = 0; i < data.size(); ++i)
            data[i] = c_cur * x0_hat[i] - c_prev * state.prev_x0[i];
    }

    const float keep = static_cast<float>(sigma_n / sigma_s);
    const float mix = static_cast<float>(-alpha_n * std::expm1(-h));
    Grid out(x.rows(), x.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * x[i] + mix * data[i];

    state.has_prev = true;
    state.prev_x0 = x0_hat;
    state.prev_lambda = lam_s;
    return out;
}

}  // namespace

InpaintResult inpaint(const MaskedScene& masked, NoisePredictor& predictor,
                      const NoiseSchedule& sched, const InferenceConfig& cfg) {
    masked.validate();
    cfg.validate(sched.total_steps);

    InpaintResult result;
    result.schedule = build_trailing_schedule(sched.total_steps, cfg.infer_steps);

    bool any_revealed = false;
    for (float v : masked.mask)
        if (v != 0.0f) {
            any_revealed = true;
            break;
        }
    result.all_hidden = !any_revealed;  // ill-posed; degrades to unconditional sampling

    Rng rng = Rng(cfg.seed).fork("inpaint");
    Grid x = gaussian_grid(masked.observed.rows(), masked.observed.cols(), rng);

    HighOrderState ho;
    const int n_steps = static_cast<int>(result.schedule.size());
    for (int i = 0; i < n_steps; ++i) {
        const int s = result.schedule[i];
        const int s_next = i + 1 < n_steps ? result.schedule[i + 1] : 0;

        if (s % cfg.guidance_stride == 0 && cfg.grad_steps > 0) {
            for (int g = 0; g < cfg.grad_steps; ++g)
                x = refine_step(x, s, masked, predictor, sched, cfg.grad_step_size,
                                cfg.frozen_denoiser_grad);
            ++result.refine_invocations;
            result.total_gradient_steps += cfg.grad_steps;
        }

        x = project_revealed(x, masked, s, sched, rng, cfg.zero_noise);

        Grid eps = predictor.predict(x, masked.cond, s);
        if (cfg.solver == SolverKind::high_order) {
            Grid x0_hat = predict_clean(x, s, eps, sched);
            x = high_order_step(x, x0_hat, s, s_next, sched, ho);
        } else {
            Grid noise = (s_next > 0 && !cfg.zero_noise)
                             ? gaussian_grid(x.rows(), x.cols(), rng)
                             : Grid(x.rows(), x.cols(), 0.0f);
            x = reverse_transition(x, s, s_next, eps, sched, noise);
        }
    }

    // Final compositing: revealed pixels are the observations, bit for bit.
    result.recon = Grid(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        result.recon[i] = masked.mask[i] != 0.0f ? masked.observed[i] : x[i];
    return result;
}

}  // namespace urbandiff
