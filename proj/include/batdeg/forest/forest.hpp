#pragma once

// Random forest for regression and classification. NaN inputs are replaced
// by a per-column sentinel below the smallest value seen at fit time.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "batdeg/matrix.hpp"

namespace batdeg::forest {

enum class Task { regression, classification };
/// automatic: sqrt for classification, a third for regression.
enum class MaxFeatures { automatic, sqrt, third, all };

/// Equal-score splits: lowest_index keeps the lowest column; draw_order keeps
/// the column drawn first in the node's seeded feature sample.
enum class TieBreak { lowest_index, draw_order };

std::string to_string(Task t);
Task task_from_string(const std::string& s);
std::string to_string(MaxFeatures m);
MaxFeatures max_features_from_string(const std::string& s);
std::string to_string(TieBreak t);
TieBreak tie_break_from_string(const std::string& s);

struct ForestConfig {
    std::size_t n_trees = 300;
    MaxFeatures max_features = MaxFeatures::automatic;
    std::size_t min_samples_leaf = 1;
    std::size_t max_depth = 0; ///< 0: unlimited
    bool bootstrap = true;
    std::uint64_t seed = 0;
    Task task = Task::regression;
    TieBreak tie_break = TieBreak::lowest_index;
    std::size_t jobs = 1; ///< fitting threads; does not change the result

    void validate() const;
    /// Features tried per split for p columns (at least 1).
    std::size_t features_per_split(std::size_t p) const;
    bool operator==(const ForestConfig&) const = default;
};

/// Flat node arrays; feature < 0 marks a leaf. Rows with x <= threshold go left.
struct DecisionTree {
    std::vector<std::int32_t> feature;
    std::vector<double> threshold;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
    std::vector<double> weight;   ///< bootstrap-weighted sample count
    std::vector<double> impurity; ///< variance or Gini
    /// One value per node (regression) or n_classes frequencies per node.
    std::vector<double> value;

    std::size_t node_count() const noexcept { return feature.size(); }
    /// Index of the leaf reached by a sentinel-substituted row.
    std::size_t leaf_for(std::span<const double> row) const noexcept;
    bool operator==(const DecisionTree&) const = default;
};

struct ImportanceReport {
    std::vector<double> scores; ///< per column, sum 1 or all zero
    std::vector<std::pair<std::string, double>> ranked; ///< descending, ties by column index

    /// "rank  score  name" lines, score with six decimals.
    std::string to_text(std::size_t top) const;
};

class RandomForest {
public:
    /// y: targets; class labels 0..C-1 for classification.
    static RandomForest fit(const Matrix& x, std::span<const double> y, const ForestConfig& config);

    std::vector<double> predict(const Matrix& x) const;
    /// rows x n_classes; classification only.
    Matrix predict_proba(const Matrix& x) const;
    /// argmax of predict_proba, lowest class on ties.
    std::vector<int> predict_class(const Matrix& x) const;

    /// Weighted impurity decrease per column over all trees, normalised.
    std::vector<double> importances() const;
    ImportanceReport importance_report(const std::vector<std::string>& names) const;

    const ForestConfig& config() const noexcept { return config_; }
    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    const std::vector<double>& sentinels() const noexcept { return sentinels_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

    std::string to_json() const;
    static RandomForest from_json(const std::string& text);
    void save(const std::string& path) const;
    static RandomForest load(const std::string& path);

    bool operator==(const RandomForest&) const = default;

private:
    void check_columns(const Matrix& x) const;
    std::vector<double> substituted(std::span<const double> row) const;

    ForestConfig config_;
    std::size_t n_features_ = 0;
    std::size_t n_classes_ = 0;
    std::vector<double> sentinels_;
    std::vector<DecisionTree> trees_;
};

} // namespace batdeg::forest
