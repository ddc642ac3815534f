#pragma once

// Train/evaluate orchestration over seeded splits, shared by the forest and
// the baseline so that both see the same cells in the same order.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "batdeg/cell/cell.hpp"
#include "batdeg/features/evaluate.hpp"
#include "batdeg/forest/forest.hpp"
#include "batdeg/matrix.hpp"
#include "batdeg/pipeline/labels.hpp"
#include "batdeg/pipeline/metrics.hpp"

namespace batdeg::pipeline {

enum class TaskKind { life, knee, pattern };

std::string to_string(TaskKind t);
TaskKind task_kind_from_string(const std::string& s);
bool is_classification(TaskKind t) noexcept;

struct TaskConfig {
    std::size_t seeds = 16;
    std::uint64_t seed = 0;
    double train_fraction = 0.6;
    forest::ForestConfig forest;
    std::size_t importance_top = 20;

    void validate() const;
};

struct Split {
    std::uint64_t seed = 0;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test; ///< in the order used for the cumulated-MAE curve
};

/// One shuffled split per seed. With strata, each class is split separately
/// so both sides see every class that has at least two members.
std::vector<Split> make_splits(std::size_t n, const TaskConfig& cfg, std::span<const int> strata = {});

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<double> test_pred; ///< value, or predicted class
    RegressionMetrics train_metrics;
    RegressionMetrics test_metrics;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::vector<double> test_auc; ///< per class, NaN when undefined
    double test_macro_auc = 0.0;
    Matrix test_proba;
};

struct EvalReport {
    std::string task;
    std::string method;
    std::vector<std::string> cell_ids;
    std::vector<double> targets;
    std::vector<std::string> class_names;
    std::vector<SeedResult> seeds;
    std::map<std::string, MeanSd> aggregate;
    std::vector<double> cum_mae; ///< seed-averaged, entry k covers the first k + 1 test cells
    std::vector<std::vector<RocPoint>> roc; ///< per class over the pooled test predictions
    std::vector<double> roc_auc;
    double macro_auc = 0.0;
    std::vector<std::pair<std::string, double>> importance_top;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
    /// report.json, cum_mae.csv (regression), roc_<class>.csv (classification).
    void write(const std::filesystem::path& dir) const;
    static EvalReport read(const std::filesystem::path& dir);
};

/// Forest on the feature matrix rows. y holds cycle lives (life) or class
/// indices (knee, pattern).
EvalReport run_forest_task(TaskKind task, const features::FeatureMatrix& x, std::span<const double> y,
                           const std::vector<Split>& splits, const TaskConfig& cfg,
                           std::vector<std::string> class_names = {});

/// log-log variance model on one ΔQ variance per cell.
EvalReport run_variance_baseline(std::span<const std::string> cell_ids, std::span<const double> variance,
                                 std::span<const double> life, const std::vector<Split>& splits);

struct CellLabel {
    std::string cell_id;
    std::size_t cycles = 0;
    bool short_history = false; ///< fewer than min_cycles cycles
    LifeResult life;
    std::optional<KneeResult> knee; ///< empty when the history has under two windows
};

struct DatasetSummary {
    std::size_t total = 0;
    std::size_t usable_life = 0;
    std::size_t usable_knee = 0;
    std::vector<std::string> short_history;
    std::vector<std::string> censored;
};

struct LabelTable {
    std::vector<CellLabel> cells;
    DatasetSummary summary;
};

LabelTable label_cells(std::span<const cell::CellHistory> histories, const LifeLabelConfig& life = {},
                       const KneeConfig& knee = {});

/// cell_id,cycles,short_history,censored,life,knee,knee_score
void write_labels_csv(const std::filesystem::path& path, const LabelTable& table);
LabelTable read_labels_csv(const std::filesystem::path& path);

} // namespace batdeg::pipeline
