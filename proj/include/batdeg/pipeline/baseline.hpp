#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "batdeg/cell/cell.hpp"
#include "batdeg/features/resample.hpp"
#include "batdeg/pipeline/metrics.hpp"

namespace batdeg::pipeline {

/// Q_j(V) - Q_i(V) of the discharge QV curves of 1-based cycles i and j on
/// the resampling voltage grid; NaN where either curve is undefined.
std::vector<double> delta_q_curve(const cell::CellHistory& history, std::size_t i = 10, std::size_t j = 50,
                                  const features::ResampleOptions& options = {});

/// Population variance of delta_q_curve, NaNs ignored.
double delta_q_variance(const cell::CellHistory& history, std::size_t i = 10, std::size_t j = 50,
                        const features::ResampleOptions& options = {});

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;

    double operator()(double x) const noexcept { return intercept + slope * x; }
};

/// Ordinary least squares y = a + b x; needs two distinct x values.
LinearFit ols(std::span<const double> x, std::span<const double> y);

/// log10(life) = a + b log10(var). Cells whose variance is not positive and
/// finite are dropped (listed in `dropped`, indices into the inputs).
struct VarianceModel {
    LinearFit fit;
    std::vector<std::size_t> dropped;

    double predict(double variance) const noexcept;
};

VarianceModel fit_variance_model(std::span<const double> variance, std::span<const double> life);

struct BaselineScores {
    RegressionMetrics train;
    RegressionMetrics test;
    std::vector<double> train_pred; ///< NaN for dropped cells
    std::vector<double> test_pred;
    std::vector<std::size_t> dropped_train;
    std::vector<std::size_t> dropped_test;
};

/// Fits on the training cells and scores both sets; dropped cells are left
/// out of the metrics. Needs three usable training cells.
BaselineScores baseline_variance_model(std::span<const double> train_variance, std::span<const double> train_life,
                                       std::span<const double> test_variance, std::span<const double> test_life);

} // namespace batdeg::pipeline
