#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "urbandiff/cloudmask.hpp"
#include "urbandiff/denoiser.hpp"
#include "urbandiff/guidance.hpp"
#include "urbandiff/metrics.hpp"

namespace urbandiff {

// Hyperparameter grid: cloud conditions (coverage x octaves) crossed with
// inference settings (timesteps x guidance stride). The default grid is the
// full 3 * 3 * 6 * 4 = 216-configuration protocol.
struct SweepGridSpec {
    std::vector<double> coverages = {0.2, 0.5, 0.85};
    std::vector<int> octaves = {2, 6, 10};
    std::vector<int> infer_steps = {20, 40, 70, 100, 150, 180};
    std::vector<int> strides = {1, 2, 3, 4};
};

struct SweepTask {
    double coverage = 0.0;
    int octaves = 0;
    int infer_steps = 0;
    int stride = 0;
};

std::vector<SweepTask> enumerate_sweep(const SweepGridSpec& grid);

// Wall-clock timing is honest but not reproducible; the deterministic mode
// substitutes a pure step-count cost model so manifests replay byte-for-byte.
enum class TimeMode { wall, deterministic };

struct SweepOptions {
    SweepGridSpec grid;
    std::uint64_t seed = 0;
    int workers = 1;
    TimeMode time_mode = TimeMode::deterministic;
    double gamma = 10.0;  // fixed refinement parameters
    int grad_steps = 1;
    double wind_deg = 0.0;
    SolverKind solver = SolverKind::ancestral;
    SuhiThresholds suhi;
};

// Outcome of one (coverage, octaves, infer_steps, stride) cell, aggregated
// over the evaluation scenes.
struct SweepRecord {
    double coverage = 0.0;
    int octaves = 0;
    int infer_steps = 0;
    int stride = 0;
    bool completed = false;
    std::string failure;
    ConfigMetrics metrics;
    long total_gradient_steps = 0;  // per scene, from the stride accounting
};

// Runs every task not already present in `resume`, invoking on_record as each
// finishes (ledger sink). Failures are recorded, not thrown.
std::vector<SweepRecord> run_sweep(const DenoiserModel& model,
                                   const std::vector<Scene>& eval_scenes,
                                   const SweepOptions& options,
                                   const std::function<void(const SweepRecord&)>& on_record = {},
                                   const std::vector<SweepRecord>* resume = nullptr);

struct RankedEntry {
    SweepRecord record;
    double ns = 0.0;
    int rank = 0;  // 1 = best within its (coverage, octaves) condition
};

struct ConditionRanking {
    double coverage = 0.0;
    int octaves = 0;
    std::vector<RankedEntry> entries;  // sorted best-first
    std::vector<std::string> degenerate_metrics;
    int incomplete = 0;  // configs that failed and were excluded
};

// Normalized-score ranking per cloud condition; the score is min-max
// normalized across the (infer_steps, stride) configs within each condition.
// Ties break toward smaller infer_steps, then larger stride.
std::vector<ConditionRanking> rank_sweep(const std::vector<SweepRecord>& records);

// (coverage, octaves) -> best (infer_steps, stride)
std::map<std::pair<double, int>, std::pair<int, int>> best_config_table(
    const std::vector<ConditionRanking>& rankings);

}  // namespace urbandiff
