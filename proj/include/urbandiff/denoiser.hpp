#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "urbandiff/dataio.hpp"
#include "urbandiff/nn/unet.hpp"
#include "urbandiff/predictor.hpp"
#include "urbandiff/schedule.hpp"

namespace urbandiff {

using nn::DenoiserConfig;

// Channel order of the assembled model input. Fixed and stable across
// save/load; permuting the conditioning layers changes the tensor.
//   0: noisy LST (normalized)   1: built-up fraction   2: normalized elevation
nn::Tensor<float> assemble_input(const Grid& xt, const ConditioningStack& cond);

// The trainable epsilon-predicting surrogate, wrapping the U-Net together
// with everything inference needs to be self-contained: the architecture
// config, the normalization applied to its training data, and the training
// noise schedule.
//
// Parameters are immutable during prediction but forward passes use internal
// workspaces, so one instance serves one thread; clone() for concurrency.
class DenoiserModel final : public NoisePredictor {
public:
    DenoiserModel() = default;  // uninitialized; predict throws StateError
    DenoiserModel(const DenoiserConfig& cfg, std::uint64_t init_seed);

    bool initialized() const { return net_ != nullptr; }
    const DenoiserConfig& config() const;
    nn::UNet<float>& net();
    const nn::UNet<float>& net() const;

    NormalizationSpec normalization;
    ScheduleSpec schedule;

    // Deterministic in evaluation mode: dropout disabled.
    Grid predict(const Grid& xt, const ConditioningStack& cond, int t) override;
    Grid input_grad(const Grid& cotangent) override;

    DenoiserModel clone() const;

private:
    void require_initialized(const char* op) const;

    std::unique_ptr<nn::UNet<float>> net_;
};

// Extra payload carried by checkpoints (optimizer state, epoch counters).
struct ModelFileExtras {
    std::vector<std::pair<std::string, std::vector<float>>> arrays;
    nlohmann::json meta = nlohmann::json::object();
};

// Self-describing parameter container; see README for the byte layout.
// Loading validates magic, version, config and every array shape; any
// truncation or mismatch raises CompatibilityError.
void save_parameters(const DenoiserModel& model, const std::filesystem::path& path,
                     const ModelFileExtras* extras = nullptr);
DenoiserModel load_parameters(const std::filesystem::path& path,
                              ModelFileExtras* extras_out = nullptr);
DenoiserModel load_parameters(const std::filesystem::path& path, const DenoiserConfig& expected,
                              ModelFileExtras* extras_out = nullptr);

}  // namespace urbandiff
