#include "urbandiff/noise.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace urbandiff {

namespace {

inline double fade(double t) { return t * t * (3.0 - 2.0 * t); }

inline float sample_clamped(const Grid& g, double r, double c) {
    r = std::clamp(r, 0.0, static_cast<double>(g.rows() - 1));
    c = std::clamp(c, 0.0, static_cast<double>(g.cols() - 1));
    const int r0 = static_cast<int>(r);
    const int c0 = static_cast<int>(c);
    const int r1 = std::min(r0 + 1, g.rows() - 1);
    const int c1 = std::min(c0 + 1, g.cols() - 1);
    const double fr = r - r0;
    const double fc = c - c0;
    const double top = g(r0, c0) * (1.0 - fc) + g(r0, c1) * fc;
    const double bot = g(r1, c0) * (1.0 - fc) + g(r1, c1) * fc;
    return static_cast<float>(top * (1.0 - fr) + bot * fr);
}

}  // namespace

Warp2 Warp2::along(double angle_deg, double stretch) {
    const double rad = angle_deg * 3.14159265358979323846 / 180.0;
    const double ux = std::cos(rad);
    const double uy = std::sin(rad);
    const double k = 1.0 / stretch - 1.0;
    Warp2 w;
    w.m[0] = 1.0 + k * ux * ux;
    w.m[1] = k * ux * uy;
    w.m[2] = k * ux * uy;
    w.m[3] = 1.0 + k * uy * uy;
    return w;
}

Grid value_noise_warped(int rows, int cols, double cell, const Warp2& warp, Rng& rng) {
    if (cell < 1.0) cell = 1.0;

    // Transformed lattice coordinates of a pixel (x = col, y = -row).
    const auto coords = [&](double r, double c, double& u, double& v) {
        const double x = c;
        const double y = -r;
        u = (warp.m[0] * x + warp.m[1] * y) / cell;
        v = (warp.m[2] * x + warp.m[3] * y) / cell;
    };

    double umin = 0, umax = 0, vmin = 0, vmax = 0;
    bool first = true;
    const double rc[2] = {0.0, static_cast<double>(rows - 1)};
    const double cc[2] = {0.0, static_cast<double>(cols - 1)};
    for (double r : rc)
        for (double c : cc) {
            double u, v;
            coords(r, c, u, v);
            if (first) {
                umin = umax = u;
                vmin = vmax = v;
                first = false;
            }
            umin = std::min(umin, u);
            umax = std::max(umax, u);
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }

    const int lu = static_cast<int>(std::floor(umax - umin)) + 3;
    const int lv = static_cast<int>(std::floor(vmax - vmin)) + 3;
    std::vector<double> lattice(static_cast<std::size_t>(lu) * lv);
    for (auto& w : lattice) w = rng.uniform(-1.0, 1.0);

    Grid out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double u, v;
            coords(r, c, u, v);
            u -= umin;
            v -= vmin;
            const int u0 = static_cast<int>(u);
            const int v0 = static_cast<int>(v);
            const double fu = fade(u - u0);
            const double fv = fade(v - v0);
            const double w00 = lattice[static_cast<std::size_t>(u0) * lv + v0];
            const double w01 = lattice[static_cast<std::size_t>(u0) * lv + v0 + 1];
            const double w10 = lattice[static_cast<std::size_t>(u0 + 1) * lv + v0];
            const double w11 = lattice[static_cast<std::size_t>(u0 + 1) * lv + v0 + 1];
            const double a = w00 * (1.0 - fv) + w01 * fv;
            const double b = w10 * (1.0 - fv) + w11 * fv;
            out(r, c) = static_cast<float>(a * (1.0 - fu) + b * fu);
        }
    }
    return out;
}

Grid value_noise(int rows, int cols, double cell, Rng& rng) {
    return value_noise_warped(rows, cols, cell, Warp2{}, rng);
}

Grid fractal_noise_warped(int rows, int cols, double base_cell, int bands, double persistence,
                          const Warp2& warp, Rng& rng) {
    Grid out(rows, cols, 0.0f);
    double cell = base_cell;
    double amp = 1.0;
    for (int b = 0; b < bands; ++b) {
        Rng band_rng = rng.fork("band", static_cast<std::uint64_t>(b));
        Grid layer = value_noise_warped(rows, cols, std::max(cell, 2.0), warp, band_rng);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += static_cast<float>(amp) * layer[i];
        cell *= 0.5;
        amp *= persistence;
    }
    return out;
}

Grid fractal_noise(int rows, int cols, double base_cell, int bands, double persistence,
                   Rng& rng) {
    return fractal_noise_warped(rows, cols, base_cell, bands, persistence, Warp2{}, rng);
}

Grid directional_smear(const Grid& field, double angle_deg, double length) {
    const int k = std::max(3, static_cast<int>(std::lround(length)));
    const double rad = angle_deg * 3.14159265358979323846 / 180.0;
    const double dx = std::cos(rad);
    const double dy = -std::sin(rad);  // rows grow southward, angle is CCW

    Grid out(field.rows(), field.cols());
    const double half = (k - 1) / 2.0;
    for (int r = 0; r < field.rows(); ++r) {
        for (int c = 0; c < field.cols(); ++c) {
            double acc = 0.0;
            for (int j = 0; j < k; ++j) {
                const double off = j - half;
                acc += sample_clamped(field, r + off * dy, c + off * dx);
            }
            out(r, c) = static_cast<float>(acc / k);
        }
    }
    return out;
}

}  // namespace urbandiff
