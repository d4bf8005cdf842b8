#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "urbandiff/dataio.hpp"
#include "urbandiff/denoiser.hpp"

using namespace urbandiff;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "urbandiff-denoiser-tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

ConditioningStack random_cond(int n, Rng& rng) {
    ConditioningStack cond;
    cond.built_up = testutil::random_grid(n, n, rng, 0.0, 1.0);
    cond.elevation = testutil::random_grid(n, n, rng, -1.5, 1.5);
    return cond;
}

}  // namespace

TEST_CASE("assemble_input stacks channels in the documented order") {
    Rng rng(1);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);

    nn::Tensor<float> input = assemble_input(xt, cond);
    REQUIRE(input.shape == std::vector<int>{3, 16, 16});
    const std::int64_t hw = 256;
    for (std::int64_t i = 0; i < hw; ++i) {
        CHECK(input[i] == xt[i]);
        CHECK(input[hw + i] == cond.built_up[i]);
        CHECK(input[2 * hw + i] == cond.elevation[i]);
    }

    // Channel order is semantic: permuting the conditioning layers must
    // produce a different tensor.
    ConditioningStack permuted;
    permuted.built_up = cond.elevation;
    permuted.elevation = cond.built_up;
    nn::Tensor<float> other = assemble_input(xt, permuted);
    bool differs = false;
    for (std::int64_t i = 0; i < input.size(); ++i)
        if (input[i] != other[i]) differs = true;
    CHECK(differs);

    Grid small(8, 8);
    CHECK_THROWS_AS(assemble_input(small, cond), ShapeError);
}

TEST_CASE("assembled input round-trips through the raster container bit-identically") {
    Rng rng(2);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);
    nn::Tensor<float> input = assemble_input(xt, cond);

    RasterFile file;
    const char* names[] = {"noisy_lst", "built_up", "elevation"};
    for (int c = 0; c < 3; ++c) {
        Grid g(16, 16);
        std::copy(input.ptr() + c * 256, input.ptr() + (c + 1) * 256, g.data());
        file.bands.push_back({names[c], "", g});
    }
    const fs::path path = temp_dir() / "input.udg";
    save_raster(file, path);
    RasterFile back = load_raster(path);

    Grid xt2 = back.band("noisy_lst");
    ConditioningStack cond2{back.band("built_up"), back.band("elevation")};
    nn::Tensor<float> again = assemble_input(xt2, cond2);
    for (std::int64_t i = 0; i < input.size(); ++i) CHECK(again[i] == input[i]);
}

TEST_CASE("untrained model yields finite, shape-preserving, deterministic output") {
    DenoiserModel model(DenoiserConfig::tiny(), 99);
    Rng rng(3);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);

    Grid a = model.predict(xt, cond, 7);
    CHECK(a.rows() == 16);
    CHECK(a.cols() == 16);
    for (float v : a) CHECK(std::isfinite(v));

    Grid b = model.predict(xt, cond, 7);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("model is not shift equivariant") {
    DenoiserModel model(DenoiserConfig::tiny(), 5);
    Rng rng(4);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);

    Grid shifted = xt;
    for (auto& v : shifted) v += 0.37f;

    Grid a = model.predict(xt, cond, 3);
    Grid b = model.predict(shifted, cond, 3);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) differs = true;
    CHECK(differs);
}

TEST_CASE("identical config and seed build identical models") {
    DenoiserModel m1(DenoiserConfig::tiny(), 1234);
    DenoiserModel m2(DenoiserConfig::tiny(), 1234);
    CHECK(m1.net().parameter_count() == m2.net().parameter_count());
    CHECK(m1.net().parameter_count() > 0);

    Rng rng(5);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);
    Grid a = m1.predict(xt, cond, 11);
    Grid b = m2.predict(xt, cond, 11);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("uninitialized model and wrong grid size are state/shape errors") {
    DenoiserModel empty;
    Rng rng(6);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);
    CHECK_THROWS_AS(empty.predict(xt, cond, 1), StateError);

    DenoiserModel model(DenoiserConfig::tiny(), 1);
    Grid wrong = testutil::random_grid(8, 8, rng);
    ConditioningStack wrong_cond = random_cond(8, rng);
    CHECK_THROWS_AS(model.predict(wrong, wrong_cond, 1), ShapeError);
}

TEST_CASE("save/load round trip reproduces predictions") {
    DenoiserModel model(DenoiserConfig::tiny(), 77);
    model.normalization.lst_center = 300.0;
    model.normalization.lst_scale = 12.5;
    model.schedule.total_steps = 250;

    const fs::path path = temp_dir() / "model.udm";
    save_parameters(model, path);
    DenoiserModel back = load_parameters(path);

    CHECK(back.config() == model.config());
    CHECK(back.normalization.lst_center == 300.0);
    CHECK(back.normalization.lst_scale == 12.5);
    CHECK(back.schedule.total_steps == 250);

    Rng rng(7);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);
    Grid a = model.predict(xt, cond, 9);
    Grid b = back.predict(xt, cond, 9);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-6f);
}

TEST_CASE("truncated model files raise compatibility errors, not crashes") {
    DenoiserModel model(DenoiserConfig::tiny(), 42);
    const fs::path path = temp_dir() / "trunc.udm";
    save_parameters(model, path);

    const auto full = fs::file_size(path);
    for (auto cut : {full / 2, full / 4, std::uintmax_t{10}}) {
        const fs::path cut_path = temp_dir() / "cut.udm";
        fs::copy_file(path, cut_path, fs::copy_options::overwrite_existing);
        fs::resize_file(cut_path, cut);
        CHECK_THROWS_AS(load_parameters(cut_path), CompatibilityError);
    }
}

TEST_CASE("architecture mismatch between file and expectation is rejected") {
    DenoiserConfig three_level = DenoiserConfig::tiny();
    three_level.levels = 3;
    three_level.channel_widths = {8, 16, 16};
    three_level.attention_levels = {2};
    three_level.spatial_size = 16;

    DenoiserModel model(three_level, 8);
    const fs::path path = temp_dir() / "levels.udm";
    save_parameters(model, path);

    CHECK_THROWS_AS(load_parameters(path, DenoiserConfig::tiny()), CompatibilityError);
    CHECK_NOTHROW(load_parameters(path, three_level));
}

TEST_CASE("clone shares parameters by value and predicts identically") {
    DenoiserModel model(DenoiserConfig::tiny(), 314);
    DenoiserModel copy = model.clone();
    Rng rng(8);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);
    Grid a = model.predict(xt, cond, 4);
    Grid b = copy.predict(xt, cond, 4);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("input gradient matches central finite differences on the tiny config") {
    // Double instantiation of the same network template; every parameter is
    // randomized so all backward paths (attention, residual tails) carry
    // signal. Loss: sum of w * eps over the output.
    nn::UNet<double> net(DenoiserConfig::tiny());
    Rng rng(9);
    testutil::randomize_all_params(net, rng);
    net.set_training(false);

    const int n = 16;
    nn::Tensor<double> input({3, n, n});
    for (auto& v : input.data) v = rng.uniform(-1.0, 1.0);
    nn::Tensor<double> w({1, n, n});
    for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);

    const auto loss_at = [&](const nn::Tensor<double>& x) {
        nn::Tensor<double> out = net.forward(x, 37);
        double l = 0;
        for (std::int64_t i = 0; i < out.size(); ++i) l += w[i] * out[i];
        return l;
    };

    net.forward(input, 37);
    nn::Tensor<double> grad = net.backward(w);

    const double h = 1e-6;
    std::vector<double> fd(input.size()), an(input.size());
    for (std::int64_t i = 0; i < input.size(); ++i) {
        nn::Tensor<double> xp = input;
        nn::Tensor<double> xm = input;
        xp[i] += h;
        xm[i] -= h;
        fd[static_cast<std::size_t>(i)] = (loss_at(xp) - loss_at(xm)) / (2.0 * h);
        an[static_cast<std::size_t>(i)] = grad[i];
    }
    const double err = testutil::rel_l2(an, fd);
    MESSAGE("input-gradient FD relative L2 error: ", err);
    CHECK(err <= 1e-3);
}

TEST_CASE("parameter gradients match finite differences on a micro config") {
    DenoiserConfig micro = DenoiserConfig::tiny();
    micro.spatial_size = 8;
    micro.channel_widths = {4, 8};
    micro.attention_heads = 2;
    micro.norm_groups = 2;

    nn::UNet<double> net(micro);
    Rng rng(10);
    testutil::randomize_all_params(net, rng);
    net.set_training(false);

    nn::Tensor<double> input({3, 8, 8});
    for (auto& v : input.data) v = rng.uniform(-1.0, 1.0);
    nn::Tensor<double> w({1, 8, 8});
    for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);

    const auto loss = [&]() {
        nn::Tensor<double> out = net.forward(input, 5);
        double l = 0;
        for (std::int64_t i = 0; i < out.size(); ++i) l += w[i] * out[i];
        return l;
    };

    net.zero_grads();
    loss();
    net.backward(w);

    // Probe a spread of parameters in every tensor.
    auto params = net.parameters();
    const double h = 1e-6;
    std::vector<double> fd, an;
    for (auto& p : params) {
        const std::size_t count = p.value->data.size();
        for (std::size_t k : {std::size_t{0}, count / 2, count - 1}) {
            const double orig = p.value->data[k];
            p.value->data[k] = orig + h;
            const double lp = loss();
            p.value->data[k] = orig - h;
            const double lm = loss();
            p.value->data[k] = orig;
            fd.push_back((lp - lm) / (2.0 * h));
            an.push_back(p.grad->data[k]);
        }
    }
    const double err = testutil::rel_l2(an, fd);
    MESSAGE("parameter-gradient FD relative L2 error over ", fd.size(), " probes: ", err);
    CHECK(err <= 1e-3);
}

TEST_CASE("float forward agrees with the double instantiation") {
    DenoiserModel model(DenoiserConfig::tiny(), 21);
    nn::UNet<double> dnet(DenoiserConfig::tiny());
    testutil::copy_params_to_double(model.net(), dnet);
    dnet.set_training(false);

    Rng rng(11);
    Grid xt = testutil::random_grid(16, 16, rng);
    ConditioningStack cond = random_cond(16, rng);

    Grid f = model.predict(xt, cond, 13);
    nn::Tensor<double> input({3, 16, 16});
    for (int i = 0; i < 256; ++i) {
        input[i] = xt[i];
        input[256 + i] = cond.built_up[i];
        input[512 + i] = cond.elevation[i];
    }
    nn::Tensor<double> d = dnet.forward(input, 13);

    double num = 0, den = 0;
    for (int i = 0; i < 256; ++i) {
        num += (f[i] - d[i]) * (f[i] - d[i]);
        den += d[i] * d[i];
    }
    CHECK(std::sqrt(num / std::max(den, 1e-30)) <= 1e-4);
}
