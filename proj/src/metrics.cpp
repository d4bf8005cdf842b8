#include "urbandiff/metrics.hpp"

#include <cmath>
#include <limits>

namespace urbandiff {

namespace {

void check_masked_inputs(const Grid& truth, const Grid& recon, const Grid& mask) {
    require_same_shape(truth, recon, "masked metric");
    require_same_shape(truth, mask, "masked metric");
}

std::size_t hidden_count(const Grid& mask) {
    std::size_t n = 0;
    for (float v : mask)
        if (v == 0.0f) ++n;
    return n;
}

double masked_mse(const Grid& truth, const Grid& recon, const Grid& mask) {
    double sse = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (mask[i] != 0.0f) continue;
        const double d = static_cast<double>(truth[i]) - recon[i];
        sse += d * d;
        ++n;
    }
    if (n == 0) throw MetricError("masked metric undefined: no hidden pixels");
    return sse / static_cast<double>(n);
}

}  // namespace

double masked_rmse(const Grid& truth, const Grid& recon, const Grid& mask) {
    check_masked_inputs(truth, recon, mask);
    return std::sqrt(masked_mse(truth, recon, mask));
}

double masked_psnr(const Grid& truth, const Grid& recon, const Grid& mask, double max_value,
                   bool* infinite) {
    check_masked_inputs(truth, recon, mask);
    const double rmse = std::sqrt(masked_mse(truth, recon, mask));
    if (infinite) *infinite = rmse == 0.0;
    if (rmse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10((max_value * max_value) / (rmse * rmse));
}

double masked_r2(const Grid& truth, const Grid& recon, const Grid& mask) {
    check_masked_inputs(truth, recon, mask);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (mask[i] == 0.0f) {
            sum += truth[i];
            ++n;
        }
    if (n == 0) throw MetricError("masked_r2 undefined: no hidden pixels");
    const double mean = sum / static_cast<double>(n);

    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (mask[i] != 0.0f) continue;
        const double e = static_cast<double>(truth[i]) - recon[i];
        const double d = truth[i] - mean;
        sse += e * e;
        sst += d * d;
    }
    if (sst == 0.0) throw MetricError("masked_r2 undefined: hidden-pixel truth has zero variance");
    return 1.0 - sse / sst;
}

double masked_ssim(const Grid& truth, const Grid& recon, const Grid& mask, double dynamic_range) {
    check_masked_inputs(truth, recon, mask);
    const std::size_t n = hidden_count(mask);
    if (n < 2) throw MetricError("masked_ssim undefined: fewer than 2 hidden pixels");

    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (mask[i] == 0.0f) {
            sx += truth[i];
            sy += recon[i];
        }
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);

    double vx = 0.0, vy = 0.0, vxy = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (mask[i] != 0.0f) continue;
        const double dx = truth[i] - mx;
        const double dy = recon[i] - my;
        vx += dx * dx;
        vy += dy * dy;
        vxy += dx * dy;
    }
    vx /= static_cast<double>(n);
    vy /= static_cast<double>(n);
    vxy /= static_cast<double>(n);

    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    return ((2.0 * mx * my + c1) * (2.0 * vxy + c2)) /
           ((mx * mx + my * my + c1) * (vx + vy + c2));
}

double suhi(const Grid& values, const Grid& built_up, const SuhiThresholds& thr) {
    require_same_shape(values, built_up, "suhi");
    const double urban_cut = thr.urban_rel * grid_max(built_up);
    double urban_sum = 0.0, rural_sum = 0.0;
    std::size_t urban_n = 0, rural_n = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (built_up[i] >= urban_cut && urban_cut > 0.0) {
            urban_sum += values[i];
            ++urban_n;
        } else if (built_up[i] <= thr.rural_abs) {
            rural_sum += values[i];
            ++rural_n;
        }
    }
    if (urban_n == 0) throw MetricError("suhi undefined: no urban pixels");
    if (rural_n == 0) throw MetricError("suhi undefined: no rural pixels");
    return urban_sum / static_cast<double>(urban_n) - rural_sum / static_cast<double>(rural_n);
}

double suhi_error(const Grid& truth, const Grid& recon, const Grid& built_up,
                  const SuhiThresholds& thr) {
    const double truth_suhi = suhi(truth, built_up, thr);
    if (truth_suhi == 0.0) throw MetricError("suhi_error undefined: SUHI(truth) is zero");
    const double recon_suhi = suhi(recon, built_up, thr);
    return std::abs((truth_suhi - recon_suhi) / truth_suhi) * 100.0;
}

ConfigMetrics mean_metrics(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw ParameterError("mean_metrics needs at least one record");
    ConfigMetrics m;
    for (const auto& r : records) {
        m.ssim += r.ssim;
        m.rmse += r.rmse;
        m.psnr += r.psnr;
        m.r2 += r.r2;
        m.suhi_error += r.suhi_error;
        m.inference_time += r.inference_time;
    }
    const double n = static_cast<double>(records.size());
    m.ssim /= n;
    m.rmse /= n;
    m.psnr /= n;
    m.r2 /= n;
    m.suhi_error /= n;
    m.inference_time /= n;
    return m;
}

NormalizedScores normalized_score(const std::vector<ConfigMetrics>& configs) {
    if (configs.size() < 2)
        throw ParameterError("normalized_score needs at least 2 configs to min-max normalize");

    struct Axis {
        const char* name;
        double ConfigMetrics::* field;
        bool lower_is_better;
        double weight;
    };
    const Axis axes[] = {
        {"ssim", &ConfigMetrics::ssim, false, 0.18},
        {"rmse", &ConfigMetrics::rmse, true, 0.18},
        {"psnr", &ConfigMetrics::psnr, false, 0.18},
        {"r2", &ConfigMetrics::r2, false, 0.18},
        {"suhi_error", &ConfigMetrics::suhi_error, true, 0.18},
        {"inference_time", &ConfigMetrics::inference_time, true, 0.10},
    };

    NormalizedScores out;
    out.score.assign(configs.size(), 0.0);
    for (const Axis& axis : axes) {
        double lo = configs.front().*axis.field;
        double hi = lo;
        for (const auto& c : configs) {
            lo = std::min(lo, c.*axis.field);
            hi = std::max(hi, c.*axis.field);
        }
        if (hi == lo) {
            // Degenerate axis carries no ranking information; give every
            // config the midpoint contribution and report it.
            out.degenerate_metrics.push_back(axis.name);
            for (auto& s : out.score) s += axis.weight * 0.5;
            continue;
        }
        for (std::size_t i = 0; i < configs.size(); ++i) {
            double ns = (configs[i].*axis.field - lo) / (hi - lo);
            if (axis.lower_is_better) ns = 1.0 - ns;
            out.score[i] += axis.weight * ns;
        }
    }
    return out;
}

}  // namespace urbandiff
