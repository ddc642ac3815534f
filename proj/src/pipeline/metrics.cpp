#include "batdeg/pipeline/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "batdeg/error.hpp"

namespace batdeg::pipeline {

namespace {

void check_pair(std::size_t a, std::size_t b, const char* what) {
    if (a == 0 || a != b) {
        throw ValidationError(std::string(what) + " needs equal, non-empty inputs (" + std::to_string(a) + " vs " +
                              std::to_string(b) + ")");
    }
}

} // namespace

double mape(std::span<const double> y, std::span<const double> yhat, std::span<const std::string> ids) {
    check_pair(y.size(), yhat.size(), "MAPE");
    std::string bad;
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        if (y[k] == 0.0) {
            bad += (bad.empty() ? "" : ", ") + (k < ids.size() ? ids[k] : "#" + std::to_string(k));
            continue;
        }
        s += std::abs(yhat[k] - y[k]) / std::abs(y[k]);
    }
    if (!bad.empty()) {
        throw ValidationError("MAPE undefined for zero targets: " + bad);
    }
    return 100.0 * s / static_cast<double>(y.size());
}

double mae(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y.size(), yhat.size(), "MAE");
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        s += std::abs(yhat[k] - y[k]);
    }
    return s / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check_pair(y.size(), yhat.size(), "RMSE");
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double d = yhat[k] - y[k];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(y.size()));
}

RegressionMetrics regression_metrics(std::span<const double> y, std::span<const double> yhat,
                                     std::span<const std::string> ids) {
    return {mape(y, yhat, ids), mae(y, yhat), rmse(y, yhat)};
}

std::vector<double> cumulated_mae_curve(std::span<const double> abs_errors) {
    std::vector<double> out;
    out.reserve(abs_errors.size());
    double s = 0.0;
    for (std::size_t k = 0; k < abs_errors.size(); ++k) {
        s += abs_errors[k];
        out.push_back(s / static_cast<double>(k + 1));
    }
    return out;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
    check_pair(scores.size(), labels.size(), "ROC");
    std::size_t pos = 0;
    for (int l : labels) {
        if (l != 0 && l != 1) {
            throw ValidationError("ROC labels must be 0 or 1");
        }
        pos += static_cast<std::size_t>(l);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) {
        throw ValidationError("ROC needs both positive and negative labels");
    }
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    std::vector<RocPoint> curve{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        (labels[idx[k]] == 1 ? tp : fp) += 1;
        if (k + 1 == idx.size() || scores[idx[k + 1]] != scores[idx[k]]) {
            curve.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                             static_cast<double>(tp) / static_cast<double>(pos), scores[idx[k]]});
        }
    }
    return curve;
}

double auc(const std::vector<RocPoint>& curve) {
    double a = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k) {
        a += (curve[k].fpr - curve[k - 1].fpr) * (curve[k].tpr + curve[k - 1].tpr) / 2.0;
    }
    return a;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    return auc(roc_curve(scores, labels));
}

MulticlassRoc one_vs_rest(const Matrix& proba, std::span<const int> labels) {
    check_pair(proba.rows(), labels.size(), "one-vs-rest ROC");
    MulticlassRoc out;
    const std::size_t classes = proba.cols();
    out.curves.resize(classes);
    out.auc.assign(classes, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> scores(labels.size());
    std::vector<int> binary(labels.size());
    double sum = 0.0;
    std::size_t defined = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        std::size_t pos = 0;
        for (std::size_t r = 0; r < labels.size(); ++r) {
            scores[r] = proba(r, c);
            binary[r] = labels[r] == static_cast<int>(c) ? 1 : 0;
            pos += static_cast<std::size_t>(binary[r]);
        }
        if (pos == 0 || pos == labels.size()) {
            continue;
        }
        out.curves[c] = roc_curve(scores, binary);
        out.auc[c] = auc(out.curves[c]);
        sum += out.auc[c];
        ++defined;
    }
    out.macro_auc = defined == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(defined);
    return out;
}

double accuracy(std::span<const int> y, std::span<const int> yhat) {
    check_pair(y.size(), yhat.size(), "accuracy");
    std::size_t hit = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        hit += y[k] == yhat[k] ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(y.size());
}

MeanSd mean_sd(std::span<const double> v) {
    if (v.empty()) {
        return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() == 1) {
        return {m, 0.0};
    }
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

} // namespace batdeg::pipeline
