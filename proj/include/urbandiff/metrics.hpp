#pragma once

#include <string>
#include <vector>

#include "urbandiff/cloudmask.hpp"
#include "urbandiff/grid.hpp"

namespace urbandiff {

// All masked metrics are computed over the hidden pixels (mask = 0) only;
// SUHI is a full-scene property. Inputs are expected in physical units
// (kelvin); reconstructions are denormalized before evaluation.

// sqrt of mean squared error over hidden pixels.
double masked_rmse(const Grid& truth, const Grid& recon, const Grid& mask);

// 10 log10(max^2 / mse). Returns +infinity when the hidden-pixel MSE is
// exactly zero; `infinite` (when given) reports that case.
double masked_psnr(const Grid& truth, const Grid& recon, const Grid& mask, double max_value,
                   bool* infinite = nullptr);

// 1 - SSE/SST over hidden pixels, SST about the hidden-pixel truth mean.
double masked_r2(const Grid& truth, const Grid& recon, const Grid& mask);

// Single global SSIM over the hidden-pixel population (the stated formula
// uses masked means/variances/covariance, not sliding windows).
// C1 = (0.01 L)^2, C2 = (0.03 L)^2 with L = dynamic_range.
double masked_ssim(const Grid& truth, const Grid& recon, const Grid& mask, double dynamic_range);

// Urban pixels: built_up >= urban_rel * max(built_up); rural pixels:
// built_up <= rural_abs. Both class definitions ignore the cloud mask.
struct SuhiThresholds {
    double urban_rel = 0.5;
    double rural_abs = 0.05;
};

// Mean urban LST minus mean rural LST, in kelvin.
double suhi(const Grid& values, const Grid& built_up, const SuhiThresholds& thr = {});

// |(SUHI(truth) - SUHI(recon)) / SUHI(truth)| * 100, in percent.
double suhi_error(const Grid& truth, const Grid& recon, const Grid& built_up,
                  const SuhiThresholds& thr = {});

// Per-evaluation metric bundle.
struct EvalRecord {
    std::string scene_id;
    std::string method;
    CloudParams mask_params;
    double ssim = 0.0;
    double rmse = 0.0;       // kelvin
    double psnr = 0.0;       // dB
    double r2 = 0.0;
    double suhi_error = 0.0;  // percent
    double inference_time = 0.0;  // seconds
    double psnr_max = 0.0;   // MAX used for PSNR (per-scene truth max)
    bool psnr_infinite = false;
};

// Mean metrics for one configuration, input to the normalized score.
struct ConfigMetrics {
    double ssim = 0.0;
    double rmse = 0.0;
    double psnr = 0.0;
    double r2 = 0.0;
    double suhi_error = 0.0;
    double inference_time = 0.0;
};

ConfigMetrics mean_metrics(const std::vector<EvalRecord>& records);

struct NormalizedScores {
    std::vector<double> score;                    // one per config, in input order
    std::vector<std::string> degenerate_metrics;  // metrics with max == min
};

// Composite normalized score: min-max normalize each metric across configs,
// invert the lower-is-better ones (rmse, suhi_error, inference_time), then
// weight 0.18 each for ssim/rmse/psnr/r2/suhi and 0.10 for time.
NormalizedScores normalized_score(const std::vector<ConfigMetrics>& configs);

}  // namespace urbandiff
