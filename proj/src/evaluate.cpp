#include "urbandiff/evaluate.hpp"

namespace urbandiff {

Grid composite_physical(const Scene& scene, const Grid& recon_norm, const Grid& mask,
                        const NormalizationSpec& norm) {
    require_same_shape(scene.lst, recon_norm, "composite_physical");
    require_same_shape(scene.lst, mask, "composite_physical");
    Grid out(scene.lst.rows(), scene.lst.cols());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = mask[i] != 0.0f
                     ? scene.lst[i]
                     : static_cast<float>(recon_norm[i] * norm.lst_scale + norm.lst_center);
    return out;
}

EvalRecord evaluate_reconstruction(const Scene& scene, const Grid& recon_phys, const Grid& mask,
                                   const CloudParams& mask_params, const std::string& method,
                                   double seconds, const SuhiThresholds& thresholds) {
    EvalRecord rec;
    rec.scene_id = scene.city_id + "/" + scene.date;
    rec.method = method;
    rec.mask_params = mask_params;
    rec.inference_time = seconds;

    const double max_value = grid_max(scene.lst);
    const double dynamic_range = max_value - grid_min(scene.lst);
    rec.psnr_max = max_value;

    rec.rmse = masked_rmse(scene.lst, recon_phys, mask);
    rec.psnr = masked_psnr(scene.lst, recon_phys, mask, max_value, &rec.psnr_infinite);
    rec.r2 = masked_r2(scene.lst, recon_phys, mask);
    rec.ssim = masked_ssim(scene.lst, recon_phys, mask, dynamic_range);
    rec.suhi_error = suhi_error(scene.lst, recon_phys, scene.built_up, thresholds);
    return rec;
}

}  // namespace urbandiff
