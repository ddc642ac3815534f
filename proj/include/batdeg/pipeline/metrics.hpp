#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "batdeg/matrix.hpp"

namespace batdeg::pipeline {

/// 100 mean(|yhat - y| / |y|). Throws ValidationError naming the offending
/// entries (by id when ids are given) when a target is zero.
double mape(std::span<const double> y, std::span<const double> yhat, std::span<const std::string> ids = {});
double mae(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);

struct RegressionMetrics {
    double mape = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
};

RegressionMetrics regression_metrics(std::span<const double> y, std::span<const double> yhat,
                                     std::span<const std::string> ids = {});

/// Entry k is the mean of the first k + 1 absolute errors.
std::vector<double> cumulated_mae_curve(std::span<const double> abs_errors);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0; ///< score >= threshold counts as positive
};

/// Threshold sweep over the distinct scores, highest first, from (0, 0) to
/// (1, 1). Needs both classes present; labels are 0/1.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
/// Trapezoid area under a curve from roc_curve.
double auc(const std::vector<RocPoint>& curve);
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct MulticlassRoc {
    std::vector<std::vector<RocPoint>> curves; ///< per class; empty when a class is absent or alone
    std::vector<double> auc;                   ///< per class; NaN when undefined
    double macro_auc = 0.0;                    ///< mean over classes with a defined AUC
};

/// One-vs-rest per class using column c of `proba` as the class-c score.
MulticlassRoc one_vs_rest(const Matrix& proba, std::span<const int> labels);

double accuracy(std::span<const int> y, std::span<const int> yhat);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0; ///< sample standard deviation; 0 for one value
};

MeanSd mean_sd(std::span<const double> values);

} // namespace batdeg::pipeline
