#include "urbandiff/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace urbandiff {

using nlohmann::json;

void Adam::step(std::vector<nn::ParamRef<float>>& params, double lr) {
    ++steps_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (auto& p : params) {
        auto& m = m_[p.name];
        auto& v = v_[p.name];
        if (m.empty()) m.assign(p.value->data.size(), 0.0f);
        if (v.empty()) v.assign(p.value->data.size(), 0.0f);
        for (std::size_t i = 0; i < p.value->data.size(); ++i) {
            const double g = p.grad->data[i];
            m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * g);
            v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * g * g);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.value->data[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

ModelFileExtras Adam::export_state(std::vector<nn::ParamRef<float>>& params) const {
    ModelFileExtras extras;
    extras.meta["adam_steps"] = steps_;
    for (auto& p : params) {
        auto mi = m_.find(p.name);
        auto vi = v_.find(p.name);
        if (mi != m_.end()) extras.arrays.emplace_back("adam.m." + p.name, mi->second);
        if (vi != v_.end()) extras.arrays.emplace_back("adam.v." + p.name, vi->second);
    }
    return extras;
}

void Adam::import_state(const ModelFileExtras& extras) {
    steps_ = extras.meta.value("adam_steps", std::int64_t{0});
    m_.clear();
    v_.clear();
    for (const auto& [name, data] : extras.arrays) {
        if (name.rfind("adam.m.", 0) == 0)
            m_[name.substr(7)] = data;
        else if (name.rfind("adam.v.", 0) == 0)
            v_[name.substr(7)] = data;
    }
}

std::vector<TrainingExample> prepare_examples(const std::vector<Scene>& scenes,
                                              const NormalizationSpec& norm) {
    std::vector<TrainingExample> out;
    out.reserve(scenes.size());
    for (const auto& s : scenes) {
        TrainingExample ex;
        ex.lst_norm = normalize_lst(s.lst, norm);
        ex.cond = conditioning_from_scene(s, norm);
        ex.id = s.city_id + "/" + s.date;
        out.push_back(std::move(ex));
    }
    return out;
}

double noise_residual_loss(const nn::Tensor<float>& pred, const Grid& target, double grad_scale,
                           nn::Tensor<float>& gy) {
    const std::int64_t npix = pred.size();
    if (npix != static_cast<std::int64_t>(target.size()))
        throw ShapeError("prediction / noise shape mismatch in loss");
    gy = nn::Tensor<float>(pred.shape);
    double loss = 0.0;
    const double gmul = 2.0 * grad_scale / static_cast<double>(npix);
    for (std::int64_t i = 0; i < npix; ++i) {
        const double r = static_cast<double>(pred[i]) - target[i];
        loss += r * r;
        gy[i] = static_cast<float>(gmul * r);
    }
    return loss / static_cast<double>(npix);
}

double training_step(DenoiserModel& model, Adam& opt, std::span<const TrainingExample> batch,
                     const NoiseSchedule& sched, Rng& sample_rng, Rng& dropout_rng, double lr) {
    if (batch.empty()) throw ParameterError("training batch must be nonempty");

    auto& net = model.net();
    net.set_training(true);
    net.zero_grads();

    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    double loss_sum = 0.0;

    for (const auto& ex : batch) {
        const int t = 1 + static_cast<int>(sample_rng.below(
                              static_cast<std::uint64_t>(sched.total_steps)));
        Grid noise = gaussian_grid(ex.lst_norm.rows(), ex.lst_norm.cols(), sample_rng);
        NoisySample xt = forward_sample(ex.lst_norm, t, noise, sched);

        nn::Tensor<float> input = assemble_input(xt.values, ex.cond);
        nn::Tensor<float> pred = net.forward(input, t, &dropout_rng);

        nn::Tensor<float> gy;
        const double loss = noise_residual_loss(pred, noise, inv_batch, gy);
        if (!std::isfinite(loss))
            throw TrainingError("non-finite loss at t=" + std::to_string(t) + " scene=" + ex.id);
        loss_sum += loss;
        net.backward(gy);
    }

    auto params = net.parameters();
    opt.step(params, lr);
    net.set_training(false);
    return loss_sum * inv_batch;
}

FitResult fit(DenoiserModel& model, Adam& opt, const std::vector<TrainingExample>& dataset,
              const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch,
              int start_epoch, std::vector<EpochLog> prior_history) {
    cfg.validate();
    if (dataset.empty()) throw ParameterError("fit needs a nonempty dataset");

    NoiseSchedule sched = build_schedule(cfg.schedule);
    const Rng root(cfg.seed);

    FitResult result;
    result.history = std::move(prior_history);

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate_at(cfg, epoch);

        std::vector<std::size_t> order(dataset.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = root.fork("epoch-shuffle", static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.below(i + 1)]);

        Rng sample_rng = root.fork("epoch-sample", static_cast<std::uint64_t>(epoch));
        Rng dropout_rng = root.fork("epoch-dropout", static_cast<std::uint64_t>(epoch));

        double weighted_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<TrainingExample> batch;  // gathered view of the shuffle
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
            const double loss =
                training_step(model, opt, batch, sched, sample_rng, dropout_rng, lr);
            weighted_loss += loss * static_cast<double>(batch.size());
        }

        EpochLog log;
        log.epoch = epoch;
        log.mean_loss = weighted_loss / static_cast<double>(dataset.size());
        log.lr = lr;
        result.history.push_back(log);
        if (on_epoch) on_epoch(log);

        if (!cfg.checkpoint_dir.empty() &&
            (epoch % cfg.checkpoint_every == 0 || epoch + 1 == cfg.epochs)) {
            std::filesystem::create_directories(cfg.checkpoint_dir);
            char name[64];
            std::snprintf(name, sizeof(name), "ckpt-epoch-%04d.udm", epoch);
            auto params = model.net().parameters();
            save_checkpoint(model, opt, params, epoch, result.history,
                            cfg.checkpoint_dir / name);
            save_checkpoint(model, opt, params, epoch, result.history,
                            cfg.checkpoint_dir / "latest.udm");
        }
    }
    return result;
}

void save_checkpoint(const DenoiserModel& model, const Adam& opt,
                     std::vector<nn::ParamRef<float>>& params, int completed_epoch,
                     const std::vector<EpochLog>& history, const std::filesystem::path& path) {
    ModelFileExtras extras = opt.export_state(params);
    extras.meta["kind"] = "checkpoint";
    extras.meta["completed_epoch"] = completed_epoch;
    json hist = json::array();
    for (const auto& h : history)
        hist.push_back({{"epoch", h.epoch}, {"mean_loss", h.mean_loss}, {"lr", h.lr}});
    extras.meta["history"] = hist;
    save_parameters(model, path, &extras);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Checkpoint ck;
    ck.model = load_parameters(path, &ck.optimizer_state);
    if (ck.optimizer_state.meta.value("kind", "") != "checkpoint")
        throw CompatibilityError("'" + path.string() + "' is not a training checkpoint");
    ck.next_epoch = ck.optimizer_state.meta.value("completed_epoch", -1) + 1;
    for (const auto& h : ck.optimizer_state.meta.value("history", json::array())) {
        EpochLog log;
        log.epoch = h.value("epoch", 0);
        log.mean_loss = h.value("mean_loss", 0.0);
        log.lr = h.value("lr", 0.0);
        ck.history.push_back(log);
    }
    return ck;
}

}  // namespace urbandiff
