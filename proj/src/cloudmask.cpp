#include "urbandiff/cloudmask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "urbandiff/noise.hpp"
#include "urbandiff/rng.hpp"

namespace urbandiff {

namespace {

double hidden_fraction_at(const Grid& field, double threshold) {
    std::size_t hidden = 0;
    for (float v : field)
        if (v >= threshold) ++hidden;
    return static_cast<double>(hidden) / static_cast<double>(field.size());
}

}  // namespace

CloudMask generate_mask(const CloudParams& params, int rows, int cols) {
    if (rows < 8 || cols < 8)
        throw ParameterError("mask shape must be at least 8x8, got " + std::to_string(rows) +
                             "x" + std::to_string(cols));
    if (!(params.coverage > 0.0 && params.coverage < 1.0))
        throw ParameterError("coverage must lie in (0, 1), got " +
                             std::to_string(params.coverage));
    if (params.octaves < 1)
        throw ParameterError("octaves must be >= 1, got " + std::to_string(params.octaves));

    const double mind = std::min(rows, cols);
    // Base wavelength grows with the octave setting: octave 2 yields blob
    // scales of a few cells, octave 10 structures wider than the grid.
    const double base_cell = std::clamp(params.octaves * mind / 8.0, 2.0, 4.0 * mind);

    Rng rng = Rng(params.seed).fork("cloudmask");
    // Anisotropy enters twice: the noise domain is compressed along the wind
    // axis so every band elongates with it, and the field is smeared along
    // the same direction for within-streak contiguity.
    const Warp2 wind_warp = Warp2::along(params.wind_deg, 3.0);
    Grid field =
        fractal_noise_warped(rows, cols, base_cell, params.octaves, 0.5, wind_warp, rng);
    field = directional_smear(field, params.wind_deg, 0.25 * mind);

    // Bisect the threshold; pixels with field >= threshold are hidden.
    double lo = grid_min(field) - 1e-6;
    double hi = grid_max(field) + 1e-6;
    for (int it = 0; it < 64; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (hidden_fraction_at(field, mid) > params.coverage)
            lo = mid;
        else
            hi = mid;
    }
    // hi is the smallest probed threshold with fraction <= coverage; lo the
    // largest with fraction > coverage. Pick the closer of the two.
    const double f_hi = hidden_fraction_at(field, hi);
    const double f_lo = hidden_fraction_at(field, lo);
    const double threshold =
        std::abs(f_hi - params.coverage) <= std::abs(f_lo - params.coverage) ? hi : lo;
    const double achieved = hidden_fraction_at(field, threshold);

    if (std::abs(achieved - params.coverage) > 0.01)
        throw GenerationError("coverage " + std::to_string(params.coverage) +
                              " unattainable after 64 bisection iterations (achieved " +
                              std::to_string(achieved) + ")");

    CloudMask mask;
    mask.params = params;
    mask.achieved_coverage = achieved;
    mask.grid = Grid(rows, cols);
    for (std::size_t i = 0; i < field.size(); ++i)
        mask.grid[i] = field[i] >= threshold ? 0.0f : 1.0f;
    return mask;
}

std::vector<CloudParams> mask_grid_suite() {
    const double coverages[] = {0.2, 0.4, 0.5, 0.7, 0.85};
    const int octaves[] = {2, 4, 6, 8, 10};
    const double winds[] = {0.0, 90.0, 135.0, 180.0};

    std::vector<CloudParams> suite;
    suite.reserve(100);
    std::uint64_t index = 0;
    for (double cc : coverages)
        for (int oct : octaves)
            for (double wind : winds) {
                CloudParams p;
                p.coverage = cc;
                p.octaves = oct;
                p.wind_deg = wind;
                p.seed = index++;
                suite.push_back(p);
            }
    return suite;
}

}  // namespace urbandiff
