#include "batdeg/pipeline/baseline.hpp"

#include <cmath>
#include <limits>

#include "batdeg/error.hpp"
#include "batdeg/features/aggregate.hpp"

namespace batdeg::pipeline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool usable(double v) { return std::isfinite(v) && v > 0.0; }

} // namespace

std::vector<double> delta_q_curve(const cell::CellHistory& h, std::size_t i, std::size_t j,
                                  const features::ResampleOptions& options) {
    if (i == 0 || j == 0 || i > h.cycles.size() || j > h.cycles.size()) {
        throw ValidationError("cell " + h.cell_id + " has " + std::to_string(h.cycles.size()) +
                              " cycles; delta Q needs cycles " + std::to_string(i) + " and " + std::to_string(j));
    }
    const features::Signal qv{features::SignalKind::QV, features::Direction::discharge};
    const auto a = features::resample_cycle(h.cycles[i - 1], options)[qv];
    const auto b = features::resample_cycle(h.cycles[j - 1], options)[qv];
    std::vector<double> out(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        out[k] = b[k] - a[k];
    }
    return out;
}

double delta_q_variance(const cell::CellHistory& h, std::size_t i, std::size_t j,
                        const features::ResampleOptions& options) {
    return features::nan_aggregate(features::AggKind::nanvar, delta_q_curve(h, i, j, options));
}

LinearFit ols(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ValidationError("least squares needs at least two paired points");
    }
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (sxx == 0.0) {
        throw ValidationError("least squares needs two distinct x values");
    }
    const double b = sxy / sxx;
    return {b, my - b * mx};
}

double VarianceModel::predict(double variance) const noexcept {
    if (!usable(variance)) {
        return kNaN;
    }
    return std::pow(10.0, fit(std::log10(variance)));
}

VarianceModel fit_variance_model(std::span<const double> variance, std::span<const double> life) {
    if (variance.size() != life.size()) {
        throw ValidationError("variance and life lengths differ");
    }
    VarianceModel m;
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t k = 0; k < variance.size(); ++k) {
        if (!usable(variance[k]) || !(life[k] > 0)) {
            m.dropped.push_back(k);
            continue;
        }
        x.push_back(std::log10(variance[k]));
        y.push_back(std::log10(life[k]));
    }
    if (x.size() < 3) {
        throw ValidationError("variance model needs at least three usable training cells, got " +
                              std::to_string(x.size()));
    }
    m.fit = ols(x, y);
    return m;
}

BaselineScores baseline_variance_model(std::span<const double> train_variance, std::span<const double> train_life,
                                       std::span<const double> test_variance, std::span<const double> test_life) {
    if (test_variance.size() != test_life.size()) {
        throw ValidationError("test variance and life lengths differ");
    }
    const auto model = fit_variance_model(train_variance, train_life);
    BaselineScores out;
    out.dropped_train = model.dropped;
    auto score = [&](std::span<const double> var, std::span<const double> life, std::vector<double>& pred,
                     std::vector<std::size_t>& dropped, bool record_drops) {
        std::vector<double> y;
        std::vector<double> yhat;
        for (std::size_t k = 0; k < var.size(); ++k) {
            pred.push_back(model.predict(var[k]));
            if (std::isnan(pred.back())) {
                if (record_drops) {
                    dropped.push_back(k);
                }
                continue;
            }
            y.push_back(life[k]);
            yhat.push_back(pred.back());
        }
        if (y.empty()) {
            return RegressionMetrics{kNaN, kNaN, kNaN};
        }
        return regression_metrics(y, yhat);
    };
    out.train = score(train_variance, train_life, out.train_pred, out.dropped_train, false);
    out.test = score(test_variance, test_life, out.test_pred, out.dropped_test, true);
    return out;
}

} // namespace batdeg::pipeline
