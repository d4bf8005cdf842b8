#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "urbandiff/denoiser.hpp"
#include "urbandiff/diffusion.hpp"

namespace urbandiff {

struct TrainConfig {
    int epochs = 75;
    int batch_size = 16;
    double initial_lr = 1e-4;
    double lr_decay_factor = 0.9;
    int lr_decay_every_epochs = 2;
    ScheduleSpec schedule;  // T = 1000, linear 1e-4 -> 2e-2
    std::uint64_t seed = 0;
    std::filesystem::path checkpoint_dir;  // empty disables checkpoints
    int checkpoint_every = 1;              // epochs

    void validate() const {
        if (epochs < 0) throw ParameterError("epochs must be >= 0");
        if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
        if (!(initial_lr > 0.0)) throw ParameterError("initial_lr must be > 0");
        if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0))
            throw ParameterError("lr_decay_factor must lie in (0, 1]");
        if (lr_decay_every_epochs < 1) throw ParameterError("lr_decay_every_epochs must be >= 1");
    }
};

// Closed form of the step schedule; epochs are 0-based.
inline double learning_rate_at(const TrainConfig& cfg, int epoch) {
    return cfg.initial_lr *
           std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_every_epochs);
}

// Adaptive-moment optimizer with the usual coefficients. Moment buffers are
// keyed by parameter name so checkpoints survive rebuilds.
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<nn::ParamRef<float>>& params, double lr);

    std::int64_t step_count() const { return steps_; }

    // Checkpoint plumbing.
    ModelFileExtras export_state(std::vector<nn::ParamRef<float>>& params) const;
    void import_state(const ModelFileExtras& extras);

private:
    double beta1_, beta2_, eps_;
    std::int64_t steps_ = 0;
    std::unordered_map<std::string, std::vector<float>> m_, v_;
};

// One scene prepared for training: normalized LST and its conditioning.
struct TrainingExample {
    Grid lst_norm;
    ConditioningStack cond;
    std::string id;
};

std::vector<TrainingExample> prepare_examples(const std::vector<Scene>& scenes,
                                              const NormalizationSpec& norm);

// Per-item denoising loss: mean over pixels of (pred - target)^2. Writes the
// gradient of grad_scale * loss with respect to pred into gy. Zero exactly
// when the prediction equals the drawn noise.
double noise_residual_loss(const nn::Tensor<float>& pred, const Grid& target, double grad_scale,
                           nn::Tensor<float>& gy);

// One optimizer update on one batch: per scene, draw t ~ U{1..T} and
// eps ~ N(0, I), corrupt, and regress the prediction against eps. The loss is
// the mean over pixels and batch of the squared residual.
double training_step(DenoiserModel& model, Adam& opt, std::span<const TrainingExample> batch,
                     const NoiseSchedule& sched, Rng& sample_rng, Rng& dropout_rng, double lr);

struct EpochLog {
    int epoch = 0;  // 0-based
    double mean_loss = 0.0;
    double lr = 0.0;
};

struct FitResult {
    std::vector<EpochLog> history;
};

// Epoch loop with deterministic shuffling, the decayed learning-rate
// schedule, and per-epoch checkpoints. All randomness forks from
// (cfg.seed, epoch), so resuming from a checkpoint replays the identical
// remainder of the run.
FitResult fit(DenoiserModel& model, Adam& opt, const std::vector<TrainingExample>& dataset,
              const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {},
              int start_epoch = 0, std::vector<EpochLog> prior_history = {});

struct Checkpoint {
    DenoiserModel model;
    ModelFileExtras optimizer_state;
    int next_epoch = 0;
    std::vector<EpochLog> history;
};

void save_checkpoint(const DenoiserModel& model, const Adam& opt,
                     std::vector<nn::ParamRef<float>>& params, int completed_epoch,
                     const std::vector<EpochLog>& history, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace urbandiff
