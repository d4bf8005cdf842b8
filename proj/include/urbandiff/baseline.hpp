#pragma once

#include <vector>

#include "urbandiff/grid.hpp"

namespace urbandiff {

// Instrumentation for property tests: arrival distance of each pixel in the
// order the marching front consumed it.
struct FmmTrace {
    std::vector<double> pop_distances;
    std::size_t filled = 0;
};

// Fast-marching inpainting of the hidden region (mask = 0), filling from the
// revealed boundary inward. Each hidden pixel is assigned a distance-,
// direction- and level-set-weighted average of valued pixels within `radius`,
// each contributor extrapolated by its local intensity gradient. Revealed
// pixels pass through untouched.
Grid inpaint_fmm(const Grid& observed, const Grid& mask, int radius = 5,
                 FmmTrace* trace = nullptr);

}  // namespace urbandiff
