#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "urbandiff/grid.hpp"

namespace urbandiff {

// Minimal dependency-free rendering for report artifacts. Images are binary
// PPM (P6), readable everywhere.
class PpmImage {
public:
    using Color = std::array<std::uint8_t, 3>;

    PpmImage(int width, int height, Color fill = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }

    void set(int x, int y, Color c);
    void line(int x0, int y0, int x1, int y1, Color c);
    void fill_rect(int x0, int y0, int x1, int y1, Color c);
    // 5x7 bitmap font: digits, uppercase letters, and basic punctuation.
    // Lowercase input is rendered uppercase.
    void text(int x, int y, const std::string& s, Color c, int scale = 1);

    void save(const std::filesystem::path& path) const;

private:
    int width_, height_;
    std::vector<std::uint8_t> rgb_;
};

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

void write_line_plot(const std::filesystem::path& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<PlotSeries>& series, int width = 720, int height = 480);

// Diverging blue-white-red map of `values` over [vmin, vmax].
void write_heatmap(const std::filesystem::path& path, const Grid& values, double vmin,
                   double vmax);

}  // namespace urbandiff
