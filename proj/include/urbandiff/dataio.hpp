#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "urbandiff/conditioning.hpp"
#include "urbandiff/grid.hpp"
#include "urbandiff/rng.hpp"

namespace urbandiff {

// ---------------------------------------------------------------------------
// Raster container
//
// A raster artifact is a pair of files:
//   <path>       raw band payload: each band rows*cols float32, little-endian,
//                row-major, concatenated in sidecar band order. Nothing else.
//   <path>.json  human-readable sidecar: format name, version, shape, band
//                names/units, free-form "meta" provenance object.
//
// The payload is deliberately headerless so any language can produce or
// consume it; all description lives in the sidecar. Loaders reject unknown
// versions and payload sizes that disagree with the sidecar.
// ---------------------------------------------------------------------------

inline constexpr int kRasterFormatVersion = 1;
inline constexpr const char* kRasterFormatName = "urbandiff/raster";

struct RasterBand {
    std::string name;
    std::string units;
    Grid grid;
};

struct RasterFile {
    std::vector<RasterBand> bands;
    nlohmann::json meta = nlohmann::json::object();

    int rows() const { return bands.empty() ? 0 : bands.front().grid.rows(); }
    int cols() const { return bands.empty() ? 0 : bands.front().grid.cols(); }

    const Grid& band(const std::string& name) const;
    bool has_band(const std::string& name) const;
};

void save_raster(const RasterFile& file, const std::filesystem::path& path);
RasterFile load_raster(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

// One training/evaluation unit: ground-truth LST plus its two static layers.
// Elevation is stored in meters; built_up as a fraction in [0, 1]. `source`
// distinguishes real data (physical-bounds checked on load) from "toy".
struct Scene {
    std::string city_id;
    std::string date;
    std::string source = "toy";
    Grid lst;        // kelvin
    Grid built_up;   // [0, 1]
    Grid elevation;  // meters

    int rows() const { return lst.rows(); }
    int cols() const { return lst.cols(); }
    void validate() const;
};

void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Normalization
//
// LST is mapped affinely to about [-1, 1] using dataset-level statistics;
// elevation is z-scored; built_up is already a bounded fraction and is used
// raw. The spec travels with every trained model so inference applies the
// same map; metrics are always computed in denormalized kelvin.
// ---------------------------------------------------------------------------

struct NormalizationSpec {
    double lst_center = 0.0;
    double lst_scale = 1.0;        // kelvin; > 0
    double elevation_center = 0.0;
    double elevation_scale = 1.0;  // meters; > 0
};

NormalizationSpec compute_normalization(const std::vector<Scene>& train_scenes);

Grid normalize_lst(const Grid& lst, const NormalizationSpec& spec);
Grid denormalize_lst(const Grid& norm, const NormalizationSpec& spec);
ConditioningStack conditioning_from_scene(const Scene& scene, const NormalizationSpec& spec);

// ---------------------------------------------------------------------------
// Splitting and toy data
// ---------------------------------------------------------------------------

// Deterministic shuffled split; proportions within one scene of exact.
std::pair<std::vector<Scene>, std::vector<Scene>> split_dataset(const std::vector<Scene>& scenes,
                                                                double train_fraction,
                                                                std::uint64_t seed);
// Index-level split used by the scene overload; exposed for tests.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t count, double train_fraction, std::uint64_t seed);

// Synthetic city scenes: 1-3 Gaussian built-up blobs, a smooth elevation
// surface, and LST = base + a*built_up - lapse*elevation + correlated noise.
// Constructed so SUHI(truth) > 0 and corr(lst, built_up) > 0 hold for every
// seed, making the conditioning layers genuinely informative.
std::vector<Scene> make_toy_dataset(int count, int rows, int cols, std::uint64_t seed);

}  // namespace urbandiff
