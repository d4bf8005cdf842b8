#include "urbandiff/denoiser.hpp"

#include <cstring>
#include <fstream>

namespace urbandiff {

using nlohmann::json;

nn::Tensor<float> assemble_input(const Grid& xt, const ConditioningStack& cond) {
    require_same_shape(xt, cond.built_up, "assemble_input");
    require_same_shape(xt, cond.elevation, "assemble_input");
    nn::Tensor<float> input({3, xt.rows(), xt.cols()});
    const std::int64_t hw = static_cast<std::int64_t>(xt.rows()) * xt.cols();
    std::memcpy(input.ptr(), xt.data(), hw * sizeof(float));
    std::memcpy(input.ptr() + hw, cond.built_up.data(), hw * sizeof(float));
    std::memcpy(input.ptr() + 2 * hw, cond.elevation.data(), hw * sizeof(float));
    return input;
}

DenoiserModel::DenoiserModel(const DenoiserConfig& cfg, std::uint64_t init_seed)
    : net_(std::make_unique<nn::UNet<float>>(cfg)) {
    Rng rng = Rng(init_seed).fork("denoiser-init");
    net_->init_params(rng);
}

const DenoiserConfig& DenoiserModel::config() const {
    require_initialized("config");
    return net_->config();
}

nn::UNet<float>& DenoiserModel::net() {
    require_initialized("net");
    return *net_;
}

const nn::UNet<float>& DenoiserModel::net() const {
    require_initialized("net");
    return *net_;
}

void DenoiserModel::require_initialized(const char* op) const {
    if (!net_) throw StateError(std::string("denoiser model not initialized (") + op + ")");
}

Grid DenoiserModel::predict(const Grid& xt, const ConditioningStack& cond, int t) {
    require_initialized("predict");
    if (t < 1) throw DomainError("predict: timestep must be >= 1, got " + std::to_string(t));
    const int size = net_->config().spatial_size;
    if (xt.rows() != size || xt.cols() != size)
        throw ShapeError("predict: grid is " + std::to_string(xt.rows()) + "x" +
                         std::to_string(xt.cols()) + " but the model operates at " +
                         std::to_string(size) + "x" + std::to_string(size));

    net_->set_training(false);
    nn::Tensor<float> out = net_->forward(assemble_input(xt, cond), t);
    Grid eps(xt.rows(), xt.cols());
    std::memcpy(eps.data(), out.ptr(), eps.size() * sizeof(float));
    return eps;
}

Grid DenoiserModel::input_grad(const Grid& cotangent) {
    require_initialized("input_grad");
    nn::Tensor<float> gy({1, cotangent.rows(), cotangent.cols()});
    std::memcpy(gy.ptr(), cotangent.data(), cotangent.size() * sizeof(float));
    net_->zero_grads();  // parameter gradients are irrelevant here
    nn::Tensor<float> gx = net_->backward(gy);
    net_->zero_grads();
    Grid grad(cotangent.rows(), cotangent.cols());
    std::memcpy(grad.data(), gx.ptr(), grad.size() * sizeof(float));
    return grad;
}

DenoiserModel DenoiserModel::clone() const {
    require_initialized("clone");
    DenoiserModel copy(net_->config(), 0);
    auto src = const_cast<nn::UNet<float>&>(*net_).parameters();
    auto dst = copy.net_->parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i].value->data = src[i].value->data;
    copy.normalization = normalization;
    copy.schedule = schedule;
    return copy;
}

// ---------------------------------------------------------------------------
// Parameter container
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'U', 'D', 'N', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_array(std::ofstream& out, const std::string& name, const std::vector<int>& dims,
                 const float* data, std::size_t count) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (int d : dims) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(float)));
}

struct Reader {
    std::ifstream in;
    std::string path;

    explicit Reader(const std::filesystem::path& p) : in(p, std::ios::binary), path(p.string()) {
        if (!in) throw IoError("cannot open model file '" + path + "'");
    }

    void bytes(void* dst, std::size_t n) {
        in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (!in)
            throw CompatibilityError("model file '" + path + "' is truncated or corrupt");
    }

    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, sizeof(v));
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, sizeof(v));
        return v;
    }

    std::string str(std::size_t n) {
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
};

json normalization_to_json(const NormalizationSpec& n) {
    return {{"lst_center", n.lst_center},
            {"lst_scale", n.lst_scale},
            {"elevation_center", n.elevation_center},
            {"elevation_scale", n.elevation_scale}};
}

NormalizationSpec normalization_from_json(const json& j) {
    NormalizationSpec n;
    n.lst_center = j.value("lst_center", 0.0);
    n.lst_scale = j.value("lst_scale", 1.0);
    n.elevation_center = j.value("elevation_center", 0.0);
    n.elevation_scale = j.value("elevation_scale", 1.0);
    return n;
}

}  // namespace

void save_parameters(const DenoiserModel& model, const std::filesystem::path& path,
                     const ModelFileExtras* extras) {
    if (!model.initialized()) throw StateError("cannot save an uninitialized model");

    json header;
    header["format"] = "urbandiff/model";
    header["version"] = kModelVersion;
    header["config"] = model.config();
    header["normalization"] = normalization_to_json(model.normalization);
    header["schedule"] = {{"total_steps", model.schedule.total_steps},
                          {"beta_start", model.schedule.beta_start},
                          {"beta_end", model.schedule.beta_end}};
    header["meta"] = extras ? extras->meta : json::object();
    const std::string header_text = header.dump();

    auto params = const_cast<DenoiserModel&>(model).net().parameters();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(kMagic, 4);
    write_u32(out, kModelVersion);
    write_u64(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

    const std::uint32_t array_count =
        static_cast<std::uint32_t>(params.size() + (extras ? extras->arrays.size() : 0));
    write_u32(out, array_count);
    for (auto& p : params)
        write_array(out, "param." + p.name, p.value->shape, p.value->ptr(),
                    static_cast<std::size_t>(p.value->size()));
    if (extras)
        for (const auto& [name, data] : extras->arrays)
            write_array(out, name, {static_cast<int>(data.size())}, data.data(), data.size());

    out.close();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

DenoiserModel load_parameters(const std::filesystem::path& path, ModelFileExtras* extras_out) {
    Reader r(path);

    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw CompatibilityError("'" + path.string() + "' is not a model file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kModelVersion)
        throw CompatibilityError("model file version " + std::to_string(version) +
                                 " not supported (expected " + std::to_string(kModelVersion) +
                                 ")");

    const std::uint64_t header_len = r.u64();
    if (header_len > (1ull << 24))
        throw CompatibilityError("model header length " + std::to_string(header_len) +
                                 " is implausible; file corrupt");
    json header;
    try {
        header = json::parse(r.str(header_len));
    } catch (const json::exception& e) {
        throw CompatibilityError("model header unparseable: " + std::string(e.what()));
    }

    DenoiserConfig cfg;
    try {
        cfg = header.at("config").get<DenoiserConfig>();
    } catch (const json::exception& e) {
        throw CompatibilityError("model header missing config: " + std::string(e.what()));
    }

    DenoiserModel model(cfg, 0);
    model.normalization = normalization_from_json(header.value("normalization", json::object()));
    if (header.contains("schedule")) {
        const auto& s = header["schedule"];
        model.schedule.total_steps = s.value("total_steps", 1000);
        model.schedule.beta_start = s.value("beta_start", 1e-4);
        model.schedule.beta_end = s.value("beta_end", 2e-2);
    }
    if (extras_out) extras_out->meta = header.value("meta", json::object());

    auto params = model.net().parameters();
    std::size_t loaded = 0;

    const std::uint32_t array_count = r.u32();
    for (std::uint32_t a = 0; a < array_count; ++a) {
        const std::uint32_t name_len = r.u32();
        if (name_len > 4096) throw CompatibilityError("model array name length implausible");
        const std::string name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw CompatibilityError("model array rank implausible");
        std::vector<int> dims(rank);
        std::uint64_t count = 1;
        for (auto& d : dims) {
            d = static_cast<int>(r.u32());
            count *= static_cast<std::uint64_t>(d);
        }

        if (name.rfind("param.", 0) == 0) {
            const std::string pname = name.substr(6);
            nn::Tensor<float>* target = nullptr;
            for (auto& p : params)
                if (p.name == pname) {
                    target = p.value;
                    break;
                }
            if (!target)
                throw CompatibilityError("model file carries unknown parameter '" + pname + "'");
            if (target->shape != dims)
                throw CompatibilityError("parameter '" + pname + "' shape mismatch");
            r.bytes(target->ptr(), count * sizeof(float));
            ++loaded;
        } else {
            std::vector<float> data(count);
            r.bytes(data.data(), count * sizeof(float));
            if (extras_out) extras_out->arrays.emplace_back(name, std::move(data));
        }
    }

    if (loaded != params.size())
        throw CompatibilityError("model file supplies " + std::to_string(loaded) + " of " +
                                 std::to_string(params.size()) + " parameters");
    return model;
}

DenoiserModel load_parameters(const std::filesystem::path& path, const DenoiserConfig& expected,
                              ModelFileExtras* extras_out) {
    DenoiserModel model = load_parameters(path, extras_out);
    if (!(model.config() == expected))
        throw CompatibilityError("model config in '" + path.string() +
                                 "' does not match the expected architecture");
    return model;
}

}  // namespace urbandiff
