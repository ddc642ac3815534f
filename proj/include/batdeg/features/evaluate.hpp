#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "batdeg/cell/cell.hpp"
#include "batdeg/features/plan.hpp"
#include "batdeg/features/resample.hpp"
#include "batdeg/matrix.hpp"

namespace batdeg::features {

/// Zero-based half-open cycle ranges of the K groups of the first N cycles:
/// group a covers [(a-1) w, a w) with w = N / K; the last group runs to N.
std::vector<std::pair<std::size_t, std::size_t>> group_cycles(std::size_t n_cycles, int groups);

/// value(c, d): stage-1 node d of cycle c.
struct DescriptorTensor {
    std::size_t cycles = 0;
    std::size_t nodes = 0;
    std::vector<double> values;

    double operator()(std::size_t c, std::size_t d) const noexcept { return values[c * nodes + d]; }
};

DescriptorTensor compute_descriptors(const EvalPlan& plan, const cell::CellHistory& history, std::size_t n_cycles,
                                     const ResampleOptions& options = {});

/// Feature vector in plan column order. Throws ValidationError naming the
/// cell when it has fewer than n_cycles cycles or N < K.
std::vector<double> evaluate(const EvalPlan& plan, const cell::CellHistory& history, std::size_t n_cycles,
                             const ResampleOptions& options = {});

/// Reference interpreter: evaluates each expression on its own, with no
/// shared nodes. Slow; used to check the plan.
std::vector<double> evaluate_naive(std::span<const FeatureExpr> exprs, const cell::CellHistory& history,
                                   std::size_t n_cycles, const ResampleOptions& options = {});

struct FeatureMatrix {
    std::vector<std::string> cell_ids;
    std::vector<std::string> names;
    Matrix values; ///< cells x features

    void validate() const;
};

/// One row per history, in input order; cells are spread over `jobs` threads.
FeatureMatrix evaluate_matrix(const EvalPlan& plan, std::span<const cell::CellHistory> histories,
                              std::size_t n_cycles, const ResampleOptions& options = {}, std::size_t jobs = 1);

std::vector<std::string> feature_names(const EvalPlan& plan);

/// CSV: header `cell_id,<name>,...`, NaN spelled NaN.
void write_feature_csv(std::ostream& out, const FeatureMatrix& m);
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(std::istream& in, const std::string& source_name);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

/// Plain text, one canonical name per line.
void write_feature_list(const std::filesystem::path& path, std::span<const FeatureExpr> exprs);
std::vector<FeatureExpr> read_feature_list(const std::filesystem::path& path);

} // namespace batdeg::features
