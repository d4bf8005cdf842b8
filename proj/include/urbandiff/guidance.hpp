#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "urbandiff/conditioning.hpp"
#include "urbandiff/diffusion.hpp"
#include "urbandiff/predictor.hpp"

namespace urbandiff {

enum class SolverKind { ancestral, high_order };

struct InferenceConfig {
    int infer_steps = 70;          // T_inf, trailing subsample of the training schedule
    int guidance_stride = 1;       // tau: refine when physical step % tau == 0
    int grad_steps = 1;            // G
    double grad_step_size = 10.0;  // gamma, paired with sum-reduction of the masked loss
    SolverKind solver = SolverKind::ancestral;
    std::uint64_t seed = 0;
    bool frozen_denoiser_grad = false;  // treat eps_theta as constant in the refinement gradient
    bool zero_noise = false;            // suppress projection/transition noise (testing)

    void validate(int train_steps) const {
        if (infer_steps < 1) throw ParameterError("infer_steps must be >= 1");
        if (infer_steps > train_steps)
            throw ParameterError("infer_steps exceeds the training schedule length");
        if (guidance_stride < 1) throw ParameterError("guidance_stride must be >= 1");
        if (grad_steps < 0) throw ParameterError("grad_steps must be >= 0");
    }
};

// Partially observed scene in model (normalized) units. `observed` is
// x0 * M: zero wherever the mask hides a pixel.
struct MaskedScene {
    Grid observed;
    Grid mask;  // 1 = revealed, 0 = hidden
    ConditioningStack cond;
    std::optional<Grid> truth;  // evaluation only

    void validate() const;
};

MaskedScene make_masked_scene(const Grid& truth_norm, const Grid& mask,
                              const ConditioningStack& cond, bool keep_truth = false);

// T_inf strictly decreasing physical timesteps, first = T_train, spaced as
// evenly as integer arithmetic allows, last >= 1 ("trailing" spacing).
std::vector<int> build_trailing_schedule(int train_steps, int infer_steps);

// One supervised gradient step: l = sum over revealed pixels of
// (x0_hat - x0)^2 with x0_hat the one-step clean estimate; returns
// xt - gamma * dl/dxt. The gradient runs through the denoiser unless
// frozen_denoiser_grad.
Grid refine_step(const Grid& xt, int t, const MaskedScene& masked, NoisePredictor& predictor,
                 const NoiseSchedule& sched, double gamma, bool frozen_denoiser_grad = false,
                 double* loss_out = nullptr);

// RePaint-style projection: overwrite revealed pixels with a noise-matched
// version of the observations at level t.
Grid project_revealed(const Grid& xt_refined, const MaskedScene& masked, int t,
                      const NoiseSchedule& sched, Rng& rng, bool zero_noise = false);

struct InpaintResult {
    Grid recon;                    // revealed pixels exactly equal the observations
    int refine_invocations = 0;    // gated timesteps hit
    long total_gradient_steps = 0; // refine_invocations * G
    std::vector<int> schedule;     // physical timesteps visited
    bool all_hidden = false;       // degenerate unconditional run
};

// Algorithm: initialize from noise, walk the trailing schedule; at gated
// steps apply G refinement updates, then project, then take the reverse
// transition. The returned grid is composited so revealed pixels are exact:
// x_hat = x0*M + x0_hat*(1-M).
InpaintResult inpaint(const MaskedScene& masked, NoisePredictor& predictor,
                      const NoiseSchedule& sched, const InferenceConfig& cfg);

}  // namespace urbandiff
