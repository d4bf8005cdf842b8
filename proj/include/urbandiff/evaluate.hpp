#pragma once

#include <string>

#include "urbandiff/dataio.hpp"
#include "urbandiff/guidance.hpp"
#include "urbandiff/metrics.hpp"

namespace urbandiff {

// Denormalize a reconstruction and composite it with the raw scene so
// revealed pixels carry the original LST values bit for bit.
Grid composite_physical(const Scene& scene, const Grid& recon_norm, const Grid& mask,
                        const NormalizationSpec& norm);

// Full masked metric bundle for one (scene, mask, method) triple, computed in
// physical units. PSNR's MAX and SSIM's dynamic range come from the scene's
// ground truth.
EvalRecord evaluate_reconstruction(const Scene& scene, const Grid& recon_phys, const Grid& mask,
                                   const CloudParams& mask_params, const std::string& method,
                                   double seconds, const SuhiThresholds& thresholds = {});

}  // namespace urbandiff
