#include "urbandiff/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "urbandiff/evaluate.hpp"

namespace urbandiff {

std::vector<SweepTask> enumerate_sweep(const SweepGridSpec& grid) {
    std::vector<SweepTask> tasks;
    tasks.reserve(grid.coverages.size() * grid.octaves.size() * grid.infer_steps.size() *
                  grid.strides.size());
    for (double cc : grid.coverages)
        for (int oct : grid.octaves)
            for (int steps : grid.infer_steps)
                for (int stride : grid.strides) tasks.push_back({cc, oct, steps, stride});
    return tasks;
}

namespace {

std::string condition_label(double coverage, int octaves) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "cc%.4f-oct%d", coverage, octaves);
    return buf;
}

// One task evaluated over all scenes; throws on the first scene failure.
SweepRecord evaluate_task(const DenoiserModel& model, const std::vector<Scene>& scenes,
                          const SweepTask& task, const SweepOptions& options,
                          const NoiseSchedule& sched) {
    SweepRecord record;
    record.coverage = task.coverage;
    record.octaves = task.octaves;
    record.infer_steps = task.infer_steps;
    record.stride = task.stride;

    const Rng root(options.seed);
    const std::string cond_label = condition_label(task.coverage, task.octaves);
    char config_label[96];
    std::snprintf(config_label, sizeof(config_label), "%s-T%d-tau%d", cond_label.c_str(),
                  task.infer_steps, task.stride);

    std::vector<EvalRecord> results(scenes.size());
    std::vector<long> grad_steps(scenes.size(), 0);
    std::vector<std::string> failures(scenes.size());

    const int workers =
        std::max(1, std::min<int>(options.workers, static_cast<int>(scenes.size())));
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        DenoiserModel local = model.clone();
        const NormalizationSpec& norm = local.normalization;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= scenes.size()) return;
            try {
                const Scene& scene = scenes[i];

                CloudParams mp;
                mp.coverage = task.coverage;
                mp.octaves = task.octaves;
                mp.wind_deg = options.wind_deg;
                // The mask depends on the cloud condition and scene only, so
                // every (T, tau) config competes on identical masks.
                mp.seed = root.fork("sweep-mask-" + cond_label, i).seed();
                CloudMask mask = generate_mask(mp, scene.rows(), scene.cols());

                Grid truth_norm = normalize_lst(scene.lst, norm);
                ConditioningStack cond = conditioning_from_scene(scene, norm);
                MaskedScene masked = make_masked_scene(truth_norm, mask.grid, cond);

                InferenceConfig icfg;
                icfg.infer_steps = task.infer_steps;
                icfg.guidance_stride = task.stride;
                icfg.grad_steps = options.grad_steps;
                icfg.grad_step_size = options.gamma;
                icfg.solver = options.solver;
                icfg.seed = root.fork(std::string("sweep-infer-") + config_label, i).seed();

                const auto t0 = std::chrono::steady_clock::now();
                InpaintResult res = inpaint(masked, local, sched, icfg);
                const auto t1 = std::chrono::steady_clock::now();

                double seconds;
                if (options.time_mode == TimeMode::wall) {
                    seconds = std::chrono::duration<double>(t1 - t0).count();
                } else {
                    // Step-count cost model: one forward per reverse step plus
                    // a forward/backward pair per gradient step.
                    seconds = 1e-3 * (task.infer_steps + 2.0 * res.total_gradient_steps);
                }

                Grid recon = composite_physical(scene, res.recon, mask.grid, norm);
                results[i] = evaluate_reconstruction(scene, recon, mask.grid, mp, "urbandiff",
                                                     seconds, options.suhi);
                grad_steps[i] = res.total_gradient_steps;
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };

    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < scenes.size(); ++i)
        if (!failures[i].empty()) {
            record.completed = false;
            record.failure = "scene " + std::to_string(i) + ": " + failures[i];
            return record;
        }

    record.metrics = mean_metrics(results);
    record.total_gradient_steps = grad_steps.empty() ? 0 : grad_steps.front();
    record.completed = true;
    return record;
}

}  // namespace

std::vector<SweepRecord> run_sweep(const DenoiserModel& model,
                                   const std::vector<Scene>& eval_scenes,
                                   const SweepOptions& options,
                                   const std::function<void(const SweepRecord&)>& on_record,
                                   const std::vector<SweepRecord>* resume) {
    if (!model.initialized()) throw StateError("sweep requires a trained model");
    if (eval_scenes.empty()) throw ParameterError("sweep needs at least one evaluation scene");

    const NoiseSchedule sched = build_schedule(model.schedule);
    std::vector<SweepRecord> records;
    if (resume) records = *resume;

    auto already_done = [&records](const SweepTask& t) {
        for (const auto& r : records)
            if (r.coverage == t.coverage && r.octaves == t.octaves &&
                r.infer_steps == t.infer_steps && r.stride == t.stride && r.completed)
                return true;
        return false;
    };

    for (const SweepTask& task : enumerate_sweep(options.grid)) {
        if (already_done(task)) continue;
        SweepRecord rec = evaluate_task(model, eval_scenes, task, options, sched);
        records.push_back(rec);
        if (on_record) on_record(rec);
    }
    return records;
}

std::vector<ConditionRanking> rank_sweep(const std::vector<SweepRecord>& records) {
    // Group by condition, preserving first-appearance order.
    std::vector<ConditionRanking> rankings;
    auto find_condition = [&rankings](double cc, int oct) -> ConditionRanking& {
        for (auto& r : rankings)
            if (r.coverage == cc && r.octaves == oct) return r;
        rankings.push_back({cc, oct, {}, {}, 0});
        return rankings.back();
    };

    for (const auto& rec : records) {
        ConditionRanking& cond = find_condition(rec.coverage, rec.octaves);
        if (!rec.completed) {
            ++cond.incomplete;
            continue;
        }
        RankedEntry entry;
        entry.record = rec;
        cond.entries.push_back(std::move(entry));
    }

    for (auto& cond : rankings) {
        if (cond.entries.empty()) continue;
        if (cond.entries.size() == 1) {
            cond.entries[0].ns = 1.0;
            cond.entries[0].rank = 1;
            continue;
        }
        std::vector<ConfigMetrics> metrics;
        metrics.reserve(cond.entries.size());
        for (const auto& e : cond.entries) metrics.push_back(e.record.metrics);
        NormalizedScores scores = normalized_score(metrics);
        cond.degenerate_metrics = scores.degenerate_metrics;
        for (std::size_t i = 0; i < cond.entries.size(); ++i) cond.entries[i].ns = scores.score[i];

        std::stable_sort(cond.entries.begin(), cond.entries.end(),
                         [](const RankedEntry& a, const RankedEntry& b) {
                             if (a.ns != b.ns) return a.ns > b.ns;
                             if (a.record.infer_steps != b.record.infer_steps)
                                 return a.record.infer_steps < b.record.infer_steps;
                             return a.record.stride > b.record.stride;
                         });
        for (std::size_t i = 0; i < cond.entries.size(); ++i)
            cond.entries[i].rank = static_cast<int>(i) + 1;
    }
    return rankings;
}

std::map<std::pair<double, int>, std::pair<int, int>> best_config_table(
    const std::vector<ConditionRanking>& rankings) {
    std::map<std::pair<double, int>, std::pair<int, int>> table;
    for (const auto& cond : rankings) {
        if (cond.entries.empty()) continue;
        const auto& best = cond.entries.front().record;
        table[{cond.coverage, cond.octaves}] = {best.infer_steps, best.stride};
    }
    return table;
}

}  // namespace urbandiff
