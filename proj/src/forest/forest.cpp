#include "batdeg/forest/forest.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"

namespace batdeg::forest {

namespace {

using json = nlohmann::json;

constexpr std::uint32_t kTieBit = 0x80000000u;

// Column-major copy of the training data with sentinels substituted, and
// two views of each column's ordering:
//   order: rows sorted by value (row index on ties); the top bit of an entry
//          flags a value equal to the one before it.
//   rank:  dense rank of each row's value, one byte per row when n <= 255.
// Large nodes walk `order`; small nodes sort their own rows by rank.
struct Columns {
    std::size_t n = 0;
    std::size_t p = 0;
    std::vector<double> x;
    std::vector<std::uint32_t> order;
    std::vector<std::uint8_t> rank8;
    std::vector<std::uint32_t> rank32;

    double at(std::size_t f, std::size_t r) const noexcept { return x[f * n + r]; }
};

struct Split {
    bool found = false;
    std::size_t feature = 0;
    std::size_t priority = 0; ///< smaller wins ties
    std::uint32_t below = 0; ///< row holding the largest value sent left
    std::uint32_t above = 0; ///< row holding the smallest value sent right
    double score = -std::numeric_limits<double>::infinity();
};

class TreeBuilder {
public:
    TreeBuilder(const Columns& cols, std::span<const double> y, std::size_t n_classes, const ForestConfig& cfg,
                std::uint64_t tree_seed)
        : c_(cols), y_(y), classes_(n_classes), cfg_(cfg), rng_(make_rng(cfg.seed, tree_seed)),
          mtry_(cfg.features_per_split(cols.p)), node_of_(cols.n, -1), w_(cols.n, 0.0) {
        perm_.resize(c_.p);
        drawpos_.resize(c_.p);
        mask_.assign((c_.p + 63) / 64, 0);
        keys_.resize(c_.n);
        srow_.resize(c_.n);
        schg_.resize(c_.n);
        std::iota(perm_.begin(), perm_.end(), 0u);
    }

    DecisionTree build() {
        if (cfg_.bootstrap) {
            std::uniform_int_distribution<std::size_t> pick(0, c_.n - 1);
            for (std::size_t k = 0; k < c_.n; ++k) {
                w_[pick(rng_)] += 1.0;
            }
        } else {
            std::fill(w_.begin(), w_.end(), 1.0);
        }
        wy_.resize(c_.n);
        for (std::size_t r = 0; r < c_.n; ++r) {
            wy_[r] = classification() ? 0.0 : w_[r] * y_[r];
        }
        std::vector<std::uint32_t> rows;
        for (std::size_t r = 0; r < c_.n; ++r) {
            if (w_[r] > 0) {
                rows.push_back(static_cast<std::uint32_t>(r));
            }
        }
        grow(std::move(rows), 0);
        return std::move(tree_);
    }

private:
    static std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t tree) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(tree), static_cast<std::uint32_t>(tree >> 32)};
        return std::mt19937_64(seq);
    }

    bool classification() const noexcept { return classes_ > 0; }

    // Appends a node and returns its index; fills weight, impurity and value.
    std::size_t add_node(const std::vector<std::uint32_t>& rows, bool& pure) {
        const std::size_t id = tree_.node_count();
        double wsum = 0.0;
        for (auto r : rows) {
            wsum += w_[r];
        }
        tree_.feature.push_back(-1);
        tree_.threshold.push_back(0.0);
        tree_.left.push_back(-1);
        tree_.right.push_back(-1);
        tree_.weight.push_back(wsum);
        if (classification()) {
            std::vector<double> counts(classes_, 0.0);
            for (auto r : rows) {
                counts[static_cast<std::size_t>(y_[r])] += w_[r];
            }
            double gini = 1.0;
            std::size_t nonzero = 0;
            for (double& cnt : counts) {
                nonzero += cnt > 0 ? 1 : 0;
                const double p = cnt / wsum;
                gini -= p * p;
                cnt = p;
            }
            pure = nonzero <= 1;
            tree_.impurity.push_back(pure ? 0.0 : std::max(0.0, gini));
            tree_.value.insert(tree_.value.end(), counts.begin(), counts.end());
        } else {
            double lo = y_[rows.front()];
            double hi = lo;
            double s = 0.0;
            for (auto r : rows) {
                lo = std::min(lo, y_[r]);
                hi = std::max(hi, y_[r]);
                s += w_[r] * y_[r];
            }
            pure = lo == hi;
            const double mean = pure ? lo : s / wsum;
            double ss = 0.0;
            for (auto r : rows) {
                const double d = y_[r] - mean;
                ss += w_[r] * d * d;
            }
            tree_.impurity.push_back(pure ? 0.0 : ss / wsum);
            tree_.value.push_back(mean);
        }
        return id;
    }

    // Rows of the node in value order (srow_) with a flag for "value differs
    // from the previous row" (schg_).
    void ordered_rows(std::size_t f, std::int32_t node, const std::vector<std::uint32_t>& rows) {
        slen_ = 0;
        const std::size_t m = rows.size();
        if (m * static_cast<std::size_t>(std::bit_width(m)) >= c_.n) {
            const std::uint32_t* ord = c_.order.data() + f * c_.n;
            bool changed = false;
            for (std::size_t k = 0; k < c_.n; ++k) {
                const std::uint32_t e = ord[k];
                changed = changed || !(e & kTieBit);
                const std::uint32_t r = e & ~kTieBit;
                if (node_of_[r] == node) {
                    srow_[slen_] = r;
                    schg_[slen_++] = changed;
                    changed = false;
                }
            }
            return;
        }
        if (!c_.rank8.empty()) {
            sort_by_rank(c_.rank8.data() + f * c_.n, rows);
        } else {
            sort_by_rank(c_.rank32.data() + f * c_.n, rows);
        }
    }

    template <typename Rank>
    void sort_by_rank(const Rank* rank, const std::vector<std::uint32_t>& rows) {
        const std::size_t m = rows.size();
        for (std::size_t i = 0; i < m; ++i) {
            keys_[i] = (static_cast<std::uint64_t>(rank[rows[i]]) << 32) | rows[i];
        }
        for (std::size_t i = 1; i < m; ++i) {
            const auto key = keys_[i];
            std::size_t j = i;
            for (; j > 0 && keys_[j - 1] > key; --j) {
                keys_[j] = keys_[j - 1];
            }
            keys_[j] = key;
        }
        for (std::size_t i = 0; i < m; ++i) {
            srow_[i] = static_cast<std::uint32_t>(keys_[i]);
            schg_[i] = i == 0 || (keys_[i] >> 32) != (keys_[i - 1] >> 32);
        }
        slen_ = m;
    }

    // Best threshold of feature f given its ordered node rows.
    void scan_feature(std::size_t f, double node_w, std::span<const double> node_stats, Split& best,
                      bool& varying) {
        const double min_leaf = static_cast<double>(cfg_.min_samples_leaf);
        double lw = 0.0;
        double ls = 0.0;
        if (classification()) {
            std::fill(left_counts_.begin(), left_counts_.end(), 0.0);
        }
        for (std::size_t k = 0; k < slen_; ++k) {
            const std::uint32_t r = srow_[k];
            if (k > 0 && schg_[k]) {
                varying = true;
                const double rw = node_w - lw;
                if (lw >= min_leaf && rw >= min_leaf) {
                    const double score = split_score(lw, ls, rw, node_stats);
                    const std::size_t prio = cfg_.tie_break == TieBreak::draw_order ? drawpos_[f] : f;
                    if (score > best.score || (score == best.score && prio < best.priority)) {
                        best = {true, f, prio, srow_[k - 1], r, score};
                    }
                }
            }
            lw += w_[r];
            if (classification()) {
                left_counts_[static_cast<std::size_t>(y_[r])] += w_[r];
            } else {
                ls += wy_[r];
            }
        }
    }

    // Larger is better. Regression: S_l^2/W_l + S_r^2/W_r (SSE reduction up to
    // a node constant). Classification: -(W_l gini_l + W_r gini_r).
    double split_score(double lw, double ls, double rw, std::span<const double> node_stats) const {
        if (classification()) {
            double l2 = 0.0;
            double r2 = 0.0;
            for (std::size_t k = 0; k < classes_; ++k) {
                const double cl = left_counts_[k];
                const double cr = node_stats[k] - cl;
                l2 += cl * cl;
                r2 += cr * cr;
            }
            return l2 / lw + r2 / rw - (lw + rw);
        }
        const double rs = node_stats[0] - ls;
        return ls * ls / lw + rs * rs / rw;
    }

    void grow(std::vector<std::uint32_t> rows, std::size_t depth) {
        struct Pending {
            std::vector<std::uint32_t> rows;
            std::size_t depth;
            std::int32_t parent;
            bool is_left;
        };
        std::vector<Pending> stack;
        stack.push_back({std::move(rows), depth, -1, false});
        left_counts_.assign(std::max<std::size_t>(classes_, 1), 0.0);

        while (!stack.empty()) {
            Pending item = std::move(stack.back());
            stack.pop_back();
            bool pure = false;
            const auto id = add_node(item.rows, pure);
            if (item.parent >= 0) {
                (item.is_left ? tree_.left : tree_.right)[static_cast<std::size_t>(item.parent)] =
                    static_cast<std::int32_t>(id);
            }
            const double node_w = tree_.weight[id];
            const bool depth_ok = cfg_.max_depth == 0 || item.depth < cfg_.max_depth;
            if (pure || !depth_ok || node_w < 2.0 * static_cast<double>(cfg_.min_samples_leaf)) {
                continue;
            }

            std::vector<double> stats(std::max<std::size_t>(classes_, 1), 0.0);
            for (auto r : item.rows) {
                node_of_[r] = static_cast<std::int32_t>(id);
                if (classification()) {
                    stats[static_cast<std::size_t>(y_[r])] += w_[r];
                } else {
                    stats[0] += w_[r] * y_[r];
                }
            }

            // Draw features without replacement until mtry of them vary in
            // this node or every feature has been tried. Each batch draws as
            // many features as are still missing, so the visited set is the
            // same as drawing one at a time; columns are visited in index
            // order so memory is read sequentially.
            Split best;
            std::size_t drawn = 0;
            std::size_t tried_varying = 0;
            while (drawn < c_.p && tried_varying < mtry_) {
                const std::size_t batch_end = std::min(c_.p, drawn + (mtry_ - tried_varying));
                for (std::size_t k = drawn; k < batch_end; ++k) {
                    // Multiply-shift bounded draw in [k, p).
                    const auto span_k = static_cast<unsigned __int128>(c_.p - k);
                    const auto j = k + static_cast<std::size_t>((rng_() * span_k) >> 64);
                    std::swap(perm_[k], perm_[j]);
                    drawpos_[perm_[k]] = static_cast<std::uint32_t>(k);
                    mask_[perm_[k] / 64] |= std::uint64_t{1} << (perm_[k] % 64);
                }
                drawn = batch_end;
                for (std::size_t wi = 0; wi < mask_.size(); ++wi) {
                    std::uint64_t bits = mask_[wi];
                    mask_[wi] = 0;
                    while (bits != 0) {
                        const std::size_t f = wi * 64 + static_cast<std::size_t>(std::countr_zero(bits));
                        bits &= bits - 1;
                        bool varying = false;
                        ordered_rows(f, static_cast<std::int32_t>(id), item.rows);
                        scan_feature(f, node_w, stats, best, varying);
                        tried_varying += varying ? 1 : 0;
                    }
                }
            }
            for (auto r : item.rows) {
                node_of_[r] = -1;
            }
            if (!best.found) {
                continue;
            }

            // Midpoint of the two neighbouring values; the lower value when
            // they are adjacent doubles.
            const double lo = c_.at(best.feature, best.below);
            const double hi = c_.at(best.feature, best.above);
            double threshold = lo + (hi - lo) / 2.0;
            if (!(threshold < hi)) {
                threshold = lo;
            }
            std::vector<std::uint32_t> lrows;
            std::vector<std::uint32_t> rrows;
            for (auto r : item.rows) {
                (c_.at(best.feature, r) <= threshold ? lrows : rrows).push_back(r);
            }
            tree_.feature[id] = static_cast<std::int32_t>(best.feature);
            tree_.threshold[id] = threshold;
            // Right first so the left child is expanded (and numbered) first.
            stack.push_back({std::move(rrows), item.depth + 1, static_cast<std::int32_t>(id), false});
            stack.push_back({std::move(lrows), item.depth + 1, static_cast<std::int32_t>(id), true});
        }
    }

    const Columns& c_;
    std::span<const double> y_;
    std::size_t classes_;
    const ForestConfig& cfg_;
    std::mt19937_64 rng_;
    std::size_t mtry_;
    std::vector<std::int32_t> node_of_;
    std::vector<double> w_;
    std::vector<std::uint32_t> perm_;
    std::vector<std::uint32_t> drawpos_;
    std::vector<double> left_counts_;
    std::vector<double> wy_;
    std::vector<std::uint32_t> srow_;
    std::vector<std::uint8_t> schg_;
    std::size_t slen_ = 0;
    std::vector<std::uint64_t> keys_;
    std::vector<std::uint64_t> mask_;
    DecisionTree tree_;
};

json tree_to_json(const DecisionTree& t) {
    return {{"feature", t.feature}, {"threshold", t.threshold}, {"left", t.left},         {"right", t.right},
            {"weight", t.weight},   {"impurity", t.impurity},   {"value", t.value}};
}

DecisionTree tree_from_json(const json& j) {
    DecisionTree t;
    j.at("feature").get_to(t.feature);
    j.at("threshold").get_to(t.threshold);
    j.at("left").get_to(t.left);
    j.at("right").get_to(t.right);
    j.at("weight").get_to(t.weight);
    j.at("impurity").get_to(t.impurity);
    j.at("value").get_to(t.value);
    return t;
}

} // namespace

std::string to_string(Task t) { return t == Task::regression ? "regression" : "classification"; }

Task task_from_string(const std::string& s) {
    if (s == "regression") {
        return Task::regression;
    }
    if (s == "classification") {
        return Task::classification;
    }
    throw ValidationError("unknown forest task '" + s + "' (expected regression or classification)");
}

std::string to_string(MaxFeatures m) {
    switch (m) {
    case MaxFeatures::automatic: return "auto";
    case MaxFeatures::sqrt: return "sqrt";
    case MaxFeatures::third: return "third";
    case MaxFeatures::all: return "all";
    }
    return "auto";
}

MaxFeatures max_features_from_string(const std::string& s) {
    for (auto m : {MaxFeatures::automatic, MaxFeatures::sqrt, MaxFeatures::third, MaxFeatures::all}) {
        if (to_string(m) == s) {
            return m;
        }
    }
    throw ValidationError("unknown max_features '" + s + "' (expected auto, sqrt, third or all)");
}

std::string to_string(TieBreak t) { return t == TieBreak::lowest_index ? "lowest_index" : "draw_order"; }

TieBreak tie_break_from_string(const std::string& s) {
    if (s == "lowest_index") {
        return TieBreak::lowest_index;
    }
    if (s == "draw_order") {
        return TieBreak::draw_order;
    }
    throw ValidationError("unknown tie_break '" + s + "' (expected lowest_index or draw_order)");
}

void ForestConfig::validate() const {
    if (n_trees < 1) {
        throw ValidationError("n_trees must be at least 1");
    }
    if (min_samples_leaf < 1) {
        throw ValidationError("min_samples_leaf must be at least 1");
    }
}

std::size_t ForestConfig::features_per_split(std::size_t p) const {
    auto rule = max_features;
    if (rule == MaxFeatures::automatic) {
        rule = task == Task::classification ? MaxFeatures::sqrt : MaxFeatures::third;
    }
    std::size_t m = p;
    if (rule == MaxFeatures::sqrt) {
        m = static_cast<std::size_t>(std::sqrt(static_cast<double>(p)));
    } else if (rule == MaxFeatures::third) {
        m = p / 3;
    }
    return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(p, 1));
}

std::size_t DecisionTree::leaf_for(std::span<const double> row) const noexcept {
    std::size_t n = 0;
    while (feature[n] >= 0) {
        n = static_cast<std::size_t>(row[static_cast<std::size_t>(feature[n])] <= threshold[n] ? left[n] : right[n]);
    }
    return n;
}

std::string ImportanceReport::to_text(std::size_t top) const {
    std::string out;
    char buf[64];
    for (std::size_t k = 0; k < std::min(top, ranked.size()); ++k) {
        std::snprintf(buf, sizeof buf, "%4zu  %.6f  ", k + 1, ranked[k].second);
        out += buf;
        out += ranked[k].first;
        out += '\n';
    }
    return out;
}

RandomForest RandomForest::fit(const Matrix& x, std::span<const double> y, const ForestConfig& config) {
    config.validate();
    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    if (n < 2) {
        throw ValidationError("forest needs at least two training rows");
    }
    if (p == 0) {
        throw ValidationError("forest needs at least one feature column");
    }
    if (y.size() != n) {
        throw ValidationError("target length " + std::to_string(y.size()) + " does not match " +
                              std::to_string(n) + " rows");
    }
    if (n >= (std::size_t{1} << 31)) {
        throw ValidationError("too many training rows");
    }
    RandomForest f;
    f.config_ = config;
    f.n_features_ = p;
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw ValidationError("targets must be finite");
        }
        if (config.task == Task::classification) {
            if (v < 0 || v != std::floor(v) || v > 1e6) {
                throw ValidationError("classification targets must be small non-negative integers");
            }
            f.n_classes_ = std::max(f.n_classes_, static_cast<std::size_t>(v) + 1);
        }
    }

    Columns cols;
    cols.n = n;
    cols.p = p;
    cols.x.resize(n * p);
    cols.order.resize(n * p);
    if (n <= 255) {
        cols.rank8.resize(n * p);
    } else {
        cols.rank32.resize(n * p);
    }
    std::vector<std::uint32_t> ord(n);
    f.sentinels_.assign(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < n; ++r) {
            const double v = x(r, j);
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
            }
        }
        const double sentinel = std::isfinite(lo) ? lo - 1.0 - std::abs(lo) : 0.0;
        f.sentinels_[j] = sentinel;
        double* col = cols.x.data() + j * n;
        for (std::size_t r = 0; r < n; ++r) {
            const double v = x(r, j);
            col[r] = std::isfinite(v) ? v : sentinel;
        }
        std::iota(ord.begin(), ord.end(), 0u);
        std::sort(ord.begin(), ord.end(), [col](std::uint32_t a, std::uint32_t b) {
            return col[a] < col[b] || (col[a] == col[b] && a < b);
        });
        std::uint32_t rank = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const bool tie = k > 0 && col[ord[k]] == col[ord[k - 1]];
            rank += (k > 0 && !tie) ? 1 : 0;
            cols.order[j * n + k] = ord[k] | (tie ? kTieBit : 0u);
            if (n <= 255) {
                cols.rank8[j * n + ord[k]] = static_cast<std::uint8_t>(rank);
            } else {
                cols.rank32[j * n + ord[k]] = rank;
            }
        }
    }

    const std::size_t classes = config.task == Task::classification ? f.n_classes_ : 0;
    f.trees_.resize(config.n_trees);
    const std::size_t workers = std::max<std::size_t>(1, std::min(config.jobs, config.n_trees));
    auto work = [&](std::size_t w) {
        for (std::size_t t = w; t < config.n_trees; t += workers) {
            f.trees_[t] = TreeBuilder(cols, y, classes, config, t).build();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work, w);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    return f;
}

void RandomForest::check_columns(const Matrix& x) const {
    if (trees_.empty()) {
        throw ValidationError("forest is not fitted");
    }
    if (x.cols() != n_features_) {
        throw ValidationError("input has " + std::to_string(x.cols()) + " columns, model expects " +
                              std::to_string(n_features_));
    }
}

std::vector<double> RandomForest::substituted(std::span<const double> row) const {
    std::vector<double> out(row.begin(), row.end());
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (!std::isfinite(out[j])) {
            out[j] = sentinels_[j];
        }
    }
    return out;
}

std::vector<double> RandomForest::predict(const Matrix& x) const {
    if (config_.task == Task::classification) {
        const auto cls = predict_class(x);
        return {cls.begin(), cls.end()};
    }
    check_columns(x);
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = substituted(x.row(r));
        // Running mean: exact when every tree returns the same value.
        double m = 0.0;
        for (std::size_t k = 0; k < trees_.size(); ++k) {
            m += (trees_[k].value[trees_[k].leaf_for(row)] - m) / static_cast<double>(k + 1);
        }
        out[r] = m;
    }
    return out;
}

Matrix RandomForest::predict_proba(const Matrix& x) const {
    if (config_.task != Task::classification) {
        throw ValidationError("predict_proba needs a classification forest");
    }
    check_columns(x);
    Matrix out(x.rows(), n_classes_, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = substituted(x.row(r));
        auto dst = out.row(r);
        for (const auto& t : trees_) {
            const auto leaf = t.leaf_for(row);
            for (std::size_t k = 0; k < n_classes_; ++k) {
                dst[k] += t.value[leaf * n_classes_ + k];
            }
        }
        for (double& v : dst) {
            v /= static_cast<double>(trees_.size());
        }
    }
    return out;
}

std::vector<int> RandomForest::predict_class(const Matrix& x) const {
    const auto proba = predict_proba(x);
    std::vector<int> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = proba.row(r);
        out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

std::vector<double> RandomForest::importances() const {
    std::vector<double> imp(n_features_, 0.0);
    for (const auto& t : trees_) {
        const double root = t.weight.empty() ? 0.0 : t.weight[0];
        for (std::size_t n = 0; n < t.node_count(); ++n) {
            if (t.feature[n] < 0) {
                continue;
            }
            const auto l = static_cast<std::size_t>(t.left[n]);
            const auto r = static_cast<std::size_t>(t.right[n]);
            const double dec =
                t.weight[n] * t.impurity[n] - t.weight[l] * t.impurity[l] - t.weight[r] * t.impurity[r];
            imp[static_cast<std::size_t>(t.feature[n])] += std::max(0.0, dec) / root;
        }
    }
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total > 0) {
        for (double& v : imp) {
            v /= total;
        }
    }
    return imp;
}

ImportanceReport RandomForest::importance_report(const std::vector<std::string>& names) const {
    if (!names.empty() && names.size() != n_features_) {
        throw ValidationError("importance report needs one name per feature");
    }
    ImportanceReport rep;
    rep.scores = importances();
    std::vector<std::size_t> idx(n_features_);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return rep.scores[a] > rep.scores[b]; });
    for (auto j : idx) {
        rep.ranked.emplace_back(names.empty() ? "x" + std::to_string(j) : names[j], rep.scores[j]);
    }
    return rep;
}

std::string RandomForest::to_json() const {
    json trees = json::array();
    for (const auto& t : trees_) {
        trees.push_back(tree_to_json(t));
    }
    json j = {{"version", 1},
              {"config",
               {{"n_trees", config_.n_trees},
                {"max_features", to_string(config_.max_features)},
                {"min_samples_leaf", config_.min_samples_leaf},
                {"max_depth", config_.max_depth},
                {"bootstrap", config_.bootstrap},
                {"seed", config_.seed},
                {"task", to_string(config_.task)},
                {"tie_break", to_string(config_.tie_break)}}},
              {"n_features", n_features_},
              {"n_classes", n_classes_},
              {"sentinels", sentinels_},
              {"trees", trees}};
    return j.dump();
}

RandomForest RandomForest::from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        if (j.at("version").get<int>() != 1) {
            throw ValidationError("unsupported forest model version");
        }
        RandomForest f;
        const auto& c = j.at("config");
        f.config_.n_trees = c.at("n_trees").get<std::size_t>();
        f.config_.max_features = max_features_from_string(c.at("max_features").get<std::string>());
        f.config_.min_samples_leaf = c.at("min_samples_leaf").get<std::size_t>();
        f.config_.max_depth = c.at("max_depth").get<std::size_t>();
        f.config_.bootstrap = c.at("bootstrap").get<bool>();
        f.config_.seed = c.at("seed").get<std::uint64_t>();
        f.config_.task = task_from_string(c.at("task").get<std::string>());
        f.config_.tie_break = tie_break_from_string(c.at("tie_break").get<std::string>());
        f.n_features_ = j.at("n_features").get<std::size_t>();
        f.n_classes_ = j.at("n_classes").get<std::size_t>();
        j.at("sentinels").get_to(f.sentinels_);
        for (const auto& t : j.at("trees")) {
            f.trees_.push_back(tree_from_json(t));
        }
        if (f.sentinels_.size() != f.n_features_ || f.trees_.size() != f.config_.n_trees) {
            throw ValidationError("forest model arrays are inconsistent");
        }
        return f;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed forest model: ") + e.what());
    }
}

void RandomForest::save(const std::string& path) const { io::write_file_atomic(path, to_json()); }

RandomForest RandomForest::load(const std::string& path) { return from_json(io::read_file(path)); }

} // namespace batdeg::forest
