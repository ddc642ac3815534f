#include "batdeg/cluster/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "batdeg/error.hpp"

namespace batdeg::cluster {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// Nearest centroid, lowest index on ties.
std::pair<std::size_t, double> nearest(std::span<const double> p, const Matrix& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = sq_dist(p, centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return {best, best_d};
}

// Running means: a cluster of identical points gets exactly that point.
void update_centroids(const Matrix& x, const std::vector<std::size_t>& assign, Matrix& centroids,
                      std::vector<std::size_t>& counts) {
    const std::size_t k = centroids.rows();
    const std::size_t d = x.cols();
    Matrix means(k, d, 0.0);
    counts.assign(k, 0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = x.row(r);
        auto dst = means.row(assign[r]);
        const double n = static_cast<double>(++counts[assign[r]]);
        for (std::size_t j = 0; j < d; ++j) {
            dst[j] += (row[j] - dst[j]) / n;
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            continue;
        }
        std::copy(means.row(c).begin(), means.row(c).end(), centroids.row(c).begin());
    }
}

KMeansModel lloyd(const Matrix& x, Matrix centroids, const KMeansOptions& options) {
    const std::size_t n = x.rows();
    const std::size_t k = centroids.rows();
    KMeansModel model;
    model.k = k;
    std::vector<std::size_t> assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> counts;
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < std::max<std::size_t>(options.max_iter, 1); ++iter) {
        bool changed = false;
        for (std::size_t r = 0; r < n; ++r) {
            const auto c = nearest(x.row(r), centroids).first;
            if (c != assign[r]) {
                assign[r] = c;
                changed = true;
            }
        }
        model.n_iter = iter + 1;
        if (!changed) {
            break;
        }
        update_centroids(x, assign, centroids, counts);

        // Re-seed empty clusters with the point farthest from its centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) {
                continue;
            }
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t r = 0; r < n; ++r) {
                if (counts[assign[r]] <= 1) {
                    continue;
                }
                const double d = sq_dist(x.row(r), centroids.row(assign[r]));
                if (d > far_d) {
                    far_d = d;
                    far = r;
                }
            }
            if (far_d < 0) {
                break;
            }
            --counts[assign[far]];
            assign[far] = c;
            counts[c] = 1;
            update_centroids(x, assign, centroids, counts);
        }

        const double inertia = inertia_of(x, centroids, assign);
        model.inertia_trace.push_back(inertia);
        if (options.tol > 0 && prev_inertia - inertia <= options.tol) {
            break;
        }
        prev_inertia = inertia;
    }
    model.centroids = std::move(centroids);
    model.assignments = std::move(assign);
    model.inertia = inertia_of(x, model.centroids, model.assignments);
    return model;
}

} // namespace

std::vector<std::size_t> KMeansModel::cluster_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (auto a : assignments) {
        ++sizes[a];
    }
    return sizes;
}

double inertia_of(const Matrix& x, const Matrix& centroids, const std::vector<std::size_t>& assignments) {
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        s += sq_dist(x.row(r), centroids.row(assignments[r]));
    }
    return s;
}

std::vector<std::size_t> kmeans_plus_plus(const Matrix& x, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = x.rows();
    if (k == 0 || n < k) {
        throw ValidationError("k-means++ needs 1 <= k <= rows (k=" + std::to_string(k) +
                              ", rows=" + std::to_string(n) + ")");
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    chosen.push_back(std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n))));
    std::vector<double> d2(n);
    for (std::size_t r = 0; r < n; ++r) {
        d2[r] = sq_dist(x.row(r), x.row(chosen[0]));
    }
    while (chosen.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0) {
            const double target = unit(rng) * total;
            double run = 0.0;
            pick = n - 1;
            for (std::size_t r = 0; r < n; ++r) {
                run += d2[r];
                if (run > target && d2[r] > 0) {
                    pick = r;
                    break;
                }
            }
        } else {
            pick = std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
        }
        chosen.push_back(pick);
        for (std::size_t r = 0; r < n; ++r) {
            d2[r] = std::min(d2[r], sq_dist(x.row(r), x.row(pick)));
        }
    }
    return chosen;
}

KMeansModel kmeans_from(const Matrix& x, const Matrix& initial_centroids, const KMeansOptions& options) {
    if (initial_centroids.cols() != x.cols() || initial_centroids.rows() == 0) {
        throw ValidationError("initial centroids do not match data dimensions");
    }
    if (x.rows() < initial_centroids.rows()) {
        throw ValidationError("k-means needs at least k rows");
    }
    return lloyd(x, initial_centroids, options);
}

KMeansModel kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options) {
    if (k == 0 || x.rows() < k) {
        throw ValidationError("k-means needs rows >= k (rows=" + std::to_string(x.rows()) +
                              ", k=" + std::to_string(k) + ")");
    }
    std::mt19937_64 rng(seed);
    KMeansModel best;
    bool have = false;
    for (std::size_t run = 0; run < std::max<std::size_t>(options.n_init, 1); ++run) {
        const auto seeds = kmeans_plus_plus(x, k, rng);
        Matrix init(k, x.cols());
        for (std::size_t c = 0; c < k; ++c) {
            auto src = x.row(seeds[c]);
            std::copy(src.begin(), src.end(), init.row(c).begin());
        }
        auto model = lloyd(x, std::move(init), options);
        if (!have || model.inertia < best.inertia) {
            best = std::move(model);
            have = true;
        }
    }
    best.seed = seed;
    return best;
}

std::vector<std::pair<std::size_t, double>> inertia_curve(const Matrix& x, std::size_t k_min, std::size_t k_max,
                                                          std::uint64_t seed, std::size_t restarts) {
    if (k_min < 1 || k_max < k_min || k_max > x.rows()) {
        throw ValidationError("k range must lie within [1, rows]");
    }
    std::vector<std::pair<std::size_t, double>> curve;
    KMeansOptions opts;
    opts.n_init = restarts;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        const double inertia = kmeans_fit(x, k, seed + k, opts).inertia;
        // Restarts can miss the optimum; the best inertia at k is never above the one at k - 1.
        const double bounded = curve.empty() ? inertia : std::min(inertia, curve.back().second);
        curve.emplace_back(k, bounded);
    }
    return curve;
}

std::size_t elbow_pick(const std::vector<std::pair<std::size_t, double>>& curve) {
    if (curve.size() < 3) {
        throw ValidationError("elbow_pick needs at least three points");
    }
    std::size_t best = curve[1].first;
    double best_d = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double d = curve[i - 1].second - 2.0 * curve[i].second + curve[i + 1].second;
        if (d > best_d) {
            best_d = d;
            best = curve[i].first;
        }
    }
    return best;
}

} // namespace batdeg::cluster
