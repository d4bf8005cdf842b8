#pragma once

#include "urbandiff/grid.hpp"
#include "urbandiff/rng.hpp"

namespace urbandiff {

// Smoothstep-interpolated lattice value noise in [-1, 1]; `cell` is the
// lattice spacing in pixels.
Grid value_noise(int rows, int cols, double cell, Rng& rng);

// Row-major 2x2 linear map applied to (x = col, y = -row) before lattice
// lookup; contracting an axis elongates the noise structures along it.
struct Warp2 {
    double m[4] = {1.0, 0.0, 0.0, 1.0};

    // Compresses the axis at `angle_deg` (CCW from east) by `stretch`, so
    // structures extend `stretch` times farther along that direction.
    static Warp2 along(double angle_deg, double stretch);
};

Grid value_noise_warped(int rows, int cols, double cell, const Warp2& warp, Rng& rng);

// Sum of `bands` value-noise layers starting at `base_cell`, each band
// halving the cell size and scaling amplitude by `persistence`.
Grid fractal_noise(int rows, int cols, double base_cell, int bands, double persistence, Rng& rng);

Grid fractal_noise_warped(int rows, int cols, double base_cell, int bands, double persistence,
                          const Warp2& warp, Rng& rng);

// Average of samples along a line segment of `length` pixels through each
// pixel, oriented `angle_deg` counterclockwise from +x (east); rows grow
// southward. Samples are clamped at the borders.
Grid directional_smear(const Grid& field, double angle_deg, double length);

}  // namespace urbandiff
