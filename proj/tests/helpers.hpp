#pragma once

#include <cmath>
#include <queue>
#include <vector>

#include "urbandiff/grid.hpp"
#include "urbandiff/nn/unet.hpp"
#include "urbandiff/predictor.hpp"
#include "urbandiff/rng.hpp"
#include "urbandiff/schedule.hpp"

namespace testutil {

using namespace urbandiff;

// Oracle denoiser: knows the clean sample, so it reports the exact noise
// component of whatever iterate it is handed.
class PerfectDenoiser final : public NoisePredictor {
public:
    PerfectDenoiser(Grid x0, const NoiseSchedule* sched) : x0_(std::move(x0)), sched_(sched) {}

    Grid predict(const Grid& xt, const ConditioningStack&, int t) override {
        last_t_ = t;
        const double abar = sched_->alpha_bar(t);
        const double c0 = std::sqrt(abar);
        const double cn = std::sqrt(1.0 - abar);
        Grid eps(xt.rows(), xt.cols());
        for (std::size_t i = 0; i < eps.size(); ++i)
            eps[i] = static_cast<float>((xt[i] - c0 * x0_[i]) / cn);
        return eps;
    }

    Grid input_grad(const Grid& cot) override {
        const double cn = std::sqrt(1.0 - sched_->alpha_bar(last_t_));
        Grid g(cot.rows(), cot.cols());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(cot[i] / cn);
        return g;
    }

private:
    Grid x0_;
    const NoiseSchedule* sched_;
    int last_t_ = 1;
};

class ZeroPredictor final : public NoisePredictor {
public:
    Grid predict(const Grid& xt, const ConditioningStack&, int) override {
        return Grid(xt.rows(), xt.cols(), 0.0f);
    }
    Grid input_grad(const Grid& cot) override { return Grid(cot.rows(), cot.cols(), 0.0f); }
};

inline Grid random_grid(int rows, int cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Grid g(rows, cols);
    for (auto& v : g) v = static_cast<float>(rng.uniform(lo, hi));
    return g;
}

inline Grid random_binary_mask(int rows, int cols, double reveal_prob, Rng& rng) {
    Grid g(rows, cols);
    for (auto& v : g) v = rng.uniform() < reveal_prob ? 1.0f : 0.0f;
    return g;
}

// Largest 4-connected component of hidden (mask = 0) pixels.
inline std::size_t largest_hidden_component(const Grid& mask) {
    std::vector<char> seen(mask.size(), 0);
    std::size_t best = 0;
    for (int r = 0; r < mask.rows(); ++r)
        for (int c = 0; c < mask.cols(); ++c) {
            const std::size_t start = static_cast<std::size_t>(r) * mask.cols() + c;
            if (seen[start] || mask[start] != 0.0f) continue;
            std::size_t count = 0;
            std::queue<std::pair<int, int>> q;
            q.push({r, c});
            seen[start] = 1;
            while (!q.empty()) {
                auto [cr, cc] = q.front();
                q.pop();
                ++count;
                const int dr[] = {-1, 1, 0, 0};
                const int dc[] = {0, 0, -1, 1};
                for (int k = 0; k < 4; ++k) {
                    const int nr = cr + dr[k];
                    const int nc = cc + dc[k];
                    if (nr < 0 || nr >= mask.rows() || nc < 0 || nc >= mask.cols()) continue;
                    const std::size_t ni = static_cast<std::size_t>(nr) * mask.cols() + nc;
                    if (!seen[ni] && mask[ni] == 0.0f) {
                        seen[ni] = 1;
                        q.push({nr, nc});
                    }
                }
            }
            best = std::max(best, count);
        }
    return best;
}

// Major-axis orientation of the hidden region's second-moment ellipse, in
// degrees CCW from +x (east), in [0, 180).
inline double hidden_ellipse_angle_deg(const Grid& mask) {
    double sr = 0, sc = 0, n = 0;
    for (int r = 0; r < mask.rows(); ++r)
        for (int c = 0; c < mask.cols(); ++c)
            if (mask(r, c) == 0.0f) {
                sr += r;
                sc += c;
                n += 1;
            }
    const double mr = sr / n, mc = sc / n;
    double cxx = 0, cyy = 0, cxy = 0;  // x = col, y = -row (math orientation)
    for (int r = 0; r < mask.rows(); ++r)
        for (int c = 0; c < mask.cols(); ++c)
            if (mask(r, c) == 0.0f) {
                const double x = c - mc;
                const double y = -(r - mr);
                cxx += x * x;
                cyy += y * y;
                cxy += x * y;
            }
    double angle = 0.5 * std::atan2(2.0 * cxy, cxx - cyy) * 180.0 / 3.14159265358979323846;
    if (angle < 0) angle += 180.0;
    return angle;
}

inline double angular_distance_mod180(double a, double b) {
    double d = std::fmod(std::abs(a - b), 180.0);
    return std::min(d, 180.0 - d);
}

// Copies float parameters into a freshly built double-precision twin.
inline void copy_params_to_double(nn::UNet<float>& src, nn::UNet<double>& dst) {
    auto sp = src.parameters();
    auto dp = dst.parameters();
    for (std::size_t i = 0; i < sp.size(); ++i)
        for (std::size_t j = 0; j < sp[i].value->data.size(); ++j)
            dp[i].value->data[j] = static_cast<double>(sp[i].value->data[j]);
}

// Fills every parameter with random values so all backward paths carry
// signal (training init zeroes some residual tails).
template <typename S>
void randomize_all_params(nn::UNet<S>& net, Rng& rng, double scale = 0.2) {
    for (auto& p : net.parameters())
        for (auto& v : p.value->data) v = static_cast<S>(rng.normal() * scale);
}

inline double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace testutil
