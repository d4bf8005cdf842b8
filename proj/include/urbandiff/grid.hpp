#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "urbandiff/errors.hpp"

namespace urbandiff {

// Dense row-major 2-D raster of 32-bit floats. Grids are the unit of data
// everywhere outside the denoiser internals; schedule coefficients stay in
// 64-bit and are applied per element.
class Grid {
public:
    Grid() = default;
    Grid(int rows, int cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows <= 0 || cols <= 0)
            throw ParameterError("grid dimensions must be positive, got " +
                                 std::to_string(rows) + "x" + std::to_string(cols));
    }

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    float operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    float& operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    float* data() noexcept { return data_.data(); }
    const float* data() const noexcept { return data_.data(); }
    std::vector<float>& values() noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    bool same_shape(const Grid& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<float> data_;
};

inline void require_same_shape(const Grid& a, const Grid& b, const std::string& what) {
    if (!a.same_shape(b))
        throw ShapeError(what + ": shapes differ (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
}

inline bool all_finite(const Grid& g) {
    for (float v : g)
        if (!std::isfinite(v)) return false;
    return true;
}

inline double grid_min(const Grid& g) {
    double m = g[0];
    for (float v : g) m = std::min<double>(m, v);
    return m;
}

inline double grid_max(const Grid& g) {
    double m = g[0];
    for (float v : g) m = std::max<double>(m, v);
    return m;
}

inline double grid_mean(const Grid& g) {
    double s = 0.0;
    for (float v : g) s += v;
    return s / static_cast<double>(g.size());
}

}  // namespace urbandiff
