#include "urbandiff/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "urbandiff/noise.hpp"

static_assert(std::endian::native == std::endian::little,
              "raster payloads are little-endian; big-endian hosts are unsupported");

namespace urbandiff {

using nlohmann::json;

const Grid& RasterFile::band(const std::string& name) const {
    for (const auto& b : bands)
        if (b.name == name) return b.grid;
    throw FormatError("raster has no band named '" + name + "'");
}

bool RasterFile::has_band(const std::string& name) const {
    for (const auto& b : bands)
        if (b.name == name) return true;
    return false;
}

void save_raster(const RasterFile& file, const std::filesystem::path& path) {
    if (file.bands.empty()) throw ParameterError("raster must have at least one band");
    const int rows = file.rows();
    const int cols = file.cols();
    for (const auto& b : file.bands)
        if (b.grid.rows() != rows || b.grid.cols() != cols)
            throw ShapeError("raster band '" + b.name + "' shape differs from first band");

    json sidecar;
    sidecar["format"] = kRasterFormatName;
    sidecar["version"] = kRasterFormatVersion;
    sidecar["rows"] = rows;
    sidecar["cols"] = cols;
    json bands = json::array();
    for (const auto& b : file.bands) bands.push_back({{"name", b.name}, {"units", b.units}});
    sidecar["bands"] = bands;
    sidecar["meta"] = file.meta;

    std::ofstream bin(path, std::ios::binary | std::ios::trunc);
    if (!bin) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& b : file.bands)
        bin.write(reinterpret_cast<const char*>(b.grid.data()),
                  static_cast<std::streamsize>(b.grid.size() * sizeof(float)));
    bin.close();
    if (!bin) throw IoError("write failed for '" + path.string() + "'");

    std::filesystem::path side = path;
    side += ".json";
    std::ofstream meta(side, std::ios::trunc);
    if (!meta) throw IoError("cannot open '" + side.string() + "' for writing");
    meta << sidecar.dump(2) << "\n";
    meta.close();
    if (!meta) throw IoError("write failed for '" + side.string() + "'");
}

RasterFile load_raster(const std::filesystem::path& path) {
    std::filesystem::path side = path;
    side += ".json";
    std::ifstream meta_in(side);
    if (!meta_in) throw IoError("missing sidecar '" + side.string() + "'");
    json sidecar;
    try {
        meta_in >> sidecar;
    } catch (const json::exception& e) {
        throw FormatError("unparseable sidecar '" + side.string() + "': " + e.what());
    }

    if (!sidecar.contains("format") || sidecar["format"] != kRasterFormatName)
        throw FormatError("'" + side.string() + "' is not a " + kRasterFormatName + " sidecar");
    if (!sidecar.contains("version") || !sidecar["version"].is_number_integer())
        throw FormatError("sidecar missing integer version field");
    if (sidecar["version"].get<int>() != kRasterFormatVersion)
        throw FormatError("unsupported raster version " + sidecar["version"].dump() +
                          " (expected " + std::to_string(kRasterFormatVersion) + ")");

    const int rows = sidecar.at("rows").get<int>();
    const int cols = sidecar.at("cols").get<int>();
    if (rows <= 0 || cols <= 0) throw FormatError("sidecar declares non-positive shape");

    RasterFile out;
    out.meta = sidecar.value("meta", json::object());

    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw IoError("missing payload '" + path.string() + "'");
    bin.seekg(0, std::ios::end);
    const auto actual = static_cast<std::uint64_t>(bin.tellg());
    bin.seekg(0);

    const auto& band_list = sidecar.at("bands");
    const std::uint64_t expected = static_cast<std::uint64_t>(band_list.size()) * rows * cols *
                                   sizeof(float);
    if (actual != expected)
        throw FormatError("payload size " + std::to_string(actual) + " does not match sidecar (" +
                          std::to_string(expected) + " bytes for " +
                          std::to_string(band_list.size()) + " band(s) of " +
                          std::to_string(rows) + "x" + std::to_string(cols) + ")");

    for (const auto& b : band_list) {
        RasterBand band;
        band.name = b.at("name").get<std::string>();
        band.units = b.value("units", "");
        band.grid = Grid(rows, cols);
        bin.read(reinterpret_cast<char*>(band.grid.data()),
                 static_cast<std::streamsize>(band.grid.size() * sizeof(float)));
        if (!bin) throw FormatError("payload truncated while reading band '" + band.name + "'");
        out.bands.push_back(std::move(band));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenes
// ---------------------------------------------------------------------------

void Scene::validate() const {
    require_same_shape(lst, built_up, "scene");
    require_same_shape(lst, elevation, "scene");
    if (!all_finite(lst) || !all_finite(built_up) || !all_finite(elevation))
        throw FormatError("scene layers must be finite");
    for (float v : built_up)
        if (v < 0.0f || v > 1.0f) throw FormatError("built_up values must lie in [0, 1]");
    if (source != "toy") {
        const double lo = grid_min(lst);
        const double hi = grid_max(lst);
        if (lo < 200.0 || hi > 350.0)
            throw FormatError("lst outside plausible physical range [200, 350] K: [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
    scene.validate();
    RasterFile file;
    file.bands.push_back({"lst", "kelvin", scene.lst});
    file.bands.push_back({"built_up", "fraction", scene.built_up});
    file.bands.push_back({"elevation", "meters", scene.elevation});
    file.meta = {{"kind", "scene"},
                 {"city_id", scene.city_id},
                 {"date", scene.date},
                 {"source", scene.source},
                 {"lst_min", grid_min(scene.lst)},
                 {"lst_max", grid_max(scene.lst)}};
    save_raster(file, path);
}

Scene load_scene(const std::filesystem::path& path) {
    RasterFile file = load_raster(path);
    if (file.meta.value("kind", "") != "scene")
        throw FormatError("'" + path.string() + "' is not a scene artifact");
    Scene scene;
    scene.city_id = file.meta.value("city_id", "");
    scene.date = file.meta.value("date", "");
    scene.source = file.meta.value("source", "toy");
    scene.lst = file.band("lst");
    scene.built_up = file.band("built_up");
    scene.elevation = file.band("elevation");
    scene.validate();
    return scene;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

NormalizationSpec compute_normalization(const std::vector<Scene>& train_scenes) {
    if (train_scenes.empty()) throw ParameterError("normalization needs at least one scene");
    double lst_lo = grid_min(train_scenes.front().lst);
    double lst_hi = grid_max(train_scenes.front().lst);
    double elev_sum = 0.0, elev_sq = 0.0;
    std::uint64_t n = 0;
    for (const auto& s : train_scenes) {
        lst_lo = std::min(lst_lo, grid_min(s.lst));
        lst_hi = std::max(lst_hi, grid_max(s.lst));
        for (float v : s.elevation) {
            elev_sum += v;
            elev_sq += static_cast<double>(v) * v;
            ++n;
        }
    }
    NormalizationSpec spec;
    spec.lst_center = 0.5 * (lst_lo + lst_hi);
    spec.lst_scale = std::max(0.5 * (lst_hi - lst_lo), 1e-6);
    spec.elevation_center = elev_sum / static_cast<double>(n);
    const double var = std::max(elev_sq / static_cast<double>(n) -
                                    spec.elevation_center * spec.elevation_center,
                                0.0);
    spec.elevation_scale = std::max(std::sqrt(var), 1e-6);
    return spec;
}

Grid normalize_lst(const Grid& lst, const NormalizationSpec& spec) {
    Grid out(lst.rows(), lst.cols());
    for (std::size_t i = 0; i < lst.size(); ++i)
        out[i] = static_cast<float>((lst[i] - spec.lst_center) / spec.lst_scale);
    return out;
}

Grid denormalize_lst(const Grid& norm, const NormalizationSpec& spec) {
    Grid out(norm.rows(), norm.cols());
    for (std::size_t i = 0; i < norm.size(); ++i)
        out[i] = static_cast<float>(norm[i] * spec.lst_scale + spec.lst_center);
    return out;
}

ConditioningStack conditioning_from_scene(const Scene& scene, const NormalizationSpec& spec) {
    ConditioningStack cond;
    cond.built_up = scene.built_up;
    cond.elevation = Grid(scene.elevation.rows(), scene.elevation.cols());
    for (std::size_t i = 0; i < scene.elevation.size(); ++i)
        cond.elevation[i] = static_cast<float>((scene.elevation[i] - spec.elevation_center) /
                                               spec.elevation_scale);
    cond.validate();
    return cond;
}

// ---------------------------------------------------------------------------
// Splitting and toy data
// ---------------------------------------------------------------------------

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t count, double train_fraction, std::uint64_t seed) {
    if (count < 5) throw ParameterError("split needs at least 5 scenes");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ParameterError("train_fraction must lie in (0, 1)");

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng(seed).fork("split");
    // Fisher-Yates with our own bounded draws; std::shuffle is not pinned.
    for (std::size_t i = count - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(i + 1)]);

    const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * count));
    std::vector<std::size_t> train(order.begin(), order.begin() + n_train);
    std::vector<std::size_t> test(order.begin() + n_train, order.end());
    return {std::move(train), std::move(test)};
}

std::pair<std::vector<Scene>, std::vector<Scene>> split_dataset(const std::vector<Scene>& scenes,
                                                                double train_fraction,
                                                                std::uint64_t seed) {
    auto [ti, vi] = split_indices(scenes.size(), train_fraction, seed);
    std::vector<Scene> train, test;
    train.reserve(ti.size());
    test.reserve(vi.size());
    for (auto i : ti) train.push_back(scenes[i]);
    for (auto i : vi) test.push_back(scenes[i]);
    return {std::move(train), std::move(test)};
}

namespace {

void add_gaussian_blob(Grid& g, double cr, double cc, double radius, double amplitude) {
    const double inv = 1.0 / (2.0 * radius * radius);
    for (int r = 0; r < g.rows(); ++r)
        for (int c = 0; c < g.cols(); ++c) {
            const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
            g(r, c) += static_cast<float>(amplitude * std::exp(-d2 * inv));
        }
}

}  // namespace

std::vector<Scene> make_toy_dataset(int count, int rows, int cols, std::uint64_t seed) {
    if (rows < 16 || cols < 16) throw ParameterError("toy scenes must be at least 16x16");
    if (count < 1) throw ParameterError("toy dataset count must be positive");

    const Rng root(seed);
    std::vector<Scene> scenes;
    scenes.reserve(count);

    for (int i = 0; i < count; ++i) {
        Rng rng = root.fork("toy-scene", static_cast<std::uint64_t>(i));
        const double mind = std::min(rows, cols);

        // Built-up skeleton: 1-3 blobs, peak clipped to [0, 1]. Radii are kept
        // small relative to the grid so a rural (built_up ~ 0) fringe always
        // remains.
        Grid built(rows, cols, 0.0f);
        const int blobs = rng.uniform_int(1, 3);
        for (int b = 0; b < blobs; ++b) {
            const double cr = rng.uniform(0.25, 0.75) * rows;
            const double cc = rng.uniform(0.25, 0.75) * cols;
            const double radius = rng.uniform(0.08, 0.16) * mind;
            const double amp = rng.uniform(0.7, 1.0);
            add_gaussian_blob(built, cr, cc, radius, amp);
        }
        for (auto& v : built) v = std::min(v, 1.0f);

        // Elevation: gentle plane plus broad bumps, in meters.
        Grid elev(rows, cols, 0.0f);
        const double base_elev = rng.uniform(60.0, 280.0);
        const double slope_r = rng.uniform(-60.0, 60.0);
        const double slope_c = rng.uniform(-60.0, 60.0);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                elev(r, c) = static_cast<float>(base_elev + slope_r * (r / (double)rows - 0.5) +
                                                slope_c * (c / (double)cols - 0.5));
        const int bumps = rng.uniform_int(1, 3);
        for (int b = 0; b < bumps; ++b)
            add_gaussian_blob(elev, rng.uniform(0.0, 1.0) * rows, rng.uniform(0.0, 1.0) * cols,
                              rng.uniform(0.3, 0.5) * mind, rng.uniform(-50.0, 50.0));

        // LST: urban warming dominates the elevation lapse by construction,
        // which keeps SUHI(truth) positive for every seed.
        const double base_k = rng.uniform(289.0, 303.0);
        const double urban_gain = rng.uniform(5.0, 8.0);  // kelvin at built_up = 1
        const double lapse = 0.0065;                      // kelvin per meter
        Rng noise_rng = rng.fork("lst-noise");
        Grid residual = fractal_noise(rows, cols, mind / 4.0, 3, 0.5, noise_rng);
        const double residual_amp = rng.uniform(0.3, 0.8);

        const double elev_mean = grid_mean(elev);
        Grid lst(rows, cols);
        for (std::size_t p = 0; p < lst.size(); ++p)
            lst[p] = static_cast<float>(base_k + urban_gain * built[p] -
                                        lapse * (elev[p] - elev_mean) +
                                        residual_amp * residual[p]);

        Scene scene;
        char ident[32];
        std::snprintf(ident, sizeof(ident), "toy-%04d", i);
        scene.city_id = ident;
        scene.date = "2020-01-01";
        scene.source = "toy";
        scene.lst = std::move(lst);
        scene.built_up = std::move(built);
        scene.elevation = std::move(elev);
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

}  // namespace urbandiff
