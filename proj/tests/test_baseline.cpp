#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "helpers.hpp"
#include "urbandiff/baseline.hpp"
#include "urbandiff/cloudmask.hpp"

using namespace urbandiff;

namespace {

// Nearest-revealed-pixel fill, the comparison oracle for ramp accuracy.
Grid nearest_neighbor_fill(const Grid& observed, const Grid& mask) {
    Grid out = observed;
    for (int r = 0; r < mask.rows(); ++r)
        for (int c = 0; c < mask.cols(); ++c) {
            if (mask(r, c) != 0.0f) continue;
            double best = 1e18;
            float val = 0.0f;
            for (int rr = 0; rr < mask.rows(); ++rr)
                for (int cc = 0; cc < mask.cols(); ++cc)
                    if (mask(rr, cc) != 0.0f) {
                        const double d2 = (rr - r) * (rr - r) + (cc - c) * (cc - c);
                        if (d2 < best) {
                            best = d2;
                            val = observed(rr, cc);
                        }
                    }
            out(r, c) = val;
        }
    return out;
}

}  // namespace

TEST_CASE("constant revealed field propagates exactly") {
    Rng rng(1);
    Grid mask = testutil::random_binary_mask(24, 24, 0.4, rng);
    mask(0, 0) = 1.0f;
    Grid observed(24, 24);
    for (std::size_t i = 0; i < observed.size(); ++i)
        observed[i] = mask[i] != 0.0f ? 301.25f : 0.0f;

    Grid filled = inpaint_fmm(observed, mask);
    for (float v : filled) CHECK(v == 301.25f);
}

TEST_CASE("single hidden pixel surrounded by equal values") {
    Grid mask(9, 9, 1.0f);
    mask(4, 4) = 0.0f;
    Grid observed(9, 9, 7.5f);
    observed(4, 4) = 0.0f;
    Grid filled = inpaint_fmm(observed, mask);
    CHECK(filled(4, 4) == doctest::Approx(7.5f).epsilon(1e-6));
}

TEST_CASE("linear ramp block fill beats nearest-neighbor fill") {
    // Ramp along x with a 5x5 hole; gradient extrapolation should
    // reconstruct it nearly exactly, certainly no worse than NN fill.
    Grid mask(16, 16, 1.0f);
    Grid truth(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) truth(r, c) = 2.0f * c + 0.5f * r;
    Grid observed = truth;
    for (int r = 5; r < 10; ++r)
        for (int c = 5; c < 10; ++c) {
            mask(r, c) = 0.0f;
            observed(r, c) = 0.0f;
        }

    Grid filled = inpaint_fmm(observed, mask);
    Grid nn = nearest_neighbor_fill(observed, mask);

    double err_fmm = 0.0, err_nn = 0.0;
    for (int r = 5; r < 10; ++r)
        for (int c = 5; c < 10; ++c) {
            err_fmm = std::max(err_fmm, static_cast<double>(std::abs(filled(r, c) - truth(r, c))));
            err_nn = std::max(err_nn, static_cast<double>(std::abs(nn(r, c) - truth(r, c))));
        }
    CHECK(err_fmm <= err_nn);
}

TEST_CASE("revealed pixels are untouched and every hidden pixel is filled") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        CloudParams p{0.7, 6, 45.0, static_cast<std::uint64_t>(trial)};
        CloudMask m = generate_mask(p, 32, 32);
        Grid truth = testutil::random_grid(32, 32, rng, 280, 320);
        Grid observed(32, 32, 0.0f);
        std::size_t hidden = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (m.grid[i] != 0.0f)
                observed[i] = truth[i];
            else
                ++hidden;
        }

        FmmTrace trace;
        Grid filled = inpaint_fmm(observed, m.grid, 5, &trace);
        CHECK(trace.filled == hidden);
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (m.grid[i] != 0.0f)
                CHECK(filled[i] == observed[i]);
            else
                CHECK(std::isfinite(filled[i]));
        }
    }
}

TEST_CASE("marching front distances are non-decreasing") {
    Rng rng(9);
    CloudMask m = generate_mask({0.6, 8, 120.0, 11}, 40, 40);
    Grid observed(40, 40, 0.0f);
    for (std::size_t i = 0; i < observed.size(); ++i)
        if (m.grid[i] != 0.0f) observed[i] = static_cast<float>(rng.uniform(280, 320));

    FmmTrace trace;
    inpaint_fmm(observed, m.grid, 5, &trace);
    for (std::size_t i = 1; i < trace.pop_distances.size(); ++i)
        CHECK(trace.pop_distances[i] >= trace.pop_distances[i - 1]);
}

TEST_CASE("all-hidden mask is a baseline error") {
    Grid mask(8, 8, 0.0f);
    Grid observed(8, 8, 0.0f);
    CHECK_THROWS_AS(inpaint_fmm(observed, mask), BaselineError);
}
