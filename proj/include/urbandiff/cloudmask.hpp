#pragma once

#include <cstdint>
#include <vector>

#include "urbandiff/grid.hpp"

namespace urbandiff {

// Synthetic cloud field controls. `coverage` is the target hidden fraction,
// `octaves` sets the spatial contiguity of the gaps (higher = larger
// contiguous gaps), `wind_deg` smears the field along a direction (degrees
// counterclockwise from east).
struct CloudParams {
    double coverage = 0.5;
    int octaves = 4;
    double wind_deg = 0.0;
    std::uint64_t seed = 0;
};

// Binary mask over a grid: 1 = revealed (cloud-free), 0 = hidden (cloud).
struct CloudMask {
    Grid grid;
    CloudParams params;
    double achieved_coverage = 0.0;  // hidden fraction actually realized

    double hidden_fraction() const { return achieved_coverage; }
};

// Thresholded multi-octave value noise with a directional smear; the
// threshold is found by bisection so the hidden fraction matches `coverage`
// within +/-1%. Octave count scales the base wavelength, so larger octaves
// produce larger contiguous gaps.
CloudMask generate_mask(const CloudParams& params, int rows, int cols);

// The 100-condition evaluation suite: full cross product of
// coverage {0.2, 0.4, 0.5, 0.7, 0.85} x octaves {2, 4, 6, 8, 10} x
// wind {0, 90, 135, 180} degrees, in that nesting order (wind fastest).
// Seeds are the suite index.
std::vector<CloudParams> mask_grid_suite();

inline bool is_binary_mask(const Grid& g) {
    for (float v : g)
        if (v != 0.0f && v != 1.0f) return false;
    return true;
}

}  // namespace urbandiff
