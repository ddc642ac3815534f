#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "batdeg/matrix.hpp"

namespace batdeg::cluster {

struct KMeansOptions {
    std::size_t max_iter = 300;
    double tol = 0.0; ///< stop early when the inertia gain drops to tol or below
    std::size_t n_init = 1; ///< restarts; the lowest-inertia run is kept
};

struct KMeansModel {
    std::size_t k = 0;
    Matrix centroids; ///< k x d
    double inertia = 0.0;
    std::vector<std::size_t> assignments;
    std::uint64_t seed = 0;
    std::size_t n_iter = 0;
    /// Inertia after every Lloyd update of the kept run; non-increasing.
    std::vector<double> inertia_trace;

    std::vector<std::size_t> cluster_sizes() const;
};

/// D^2-weighted seeding. Returns the indices of the chosen rows.
std::vector<std::size_t> kmeans_plus_plus(const Matrix& x, std::size_t k, std::mt19937_64& rng);

/// Lloyd iterations from k-means++ seeds until the assignment stops changing
/// (or the inertia gain is <= tol). A cluster that empties is re-seeded with
/// the point farthest from its current centroid. Throws ValidationError when
/// rows < k.
KMeansModel kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed, const KMeansOptions& options = {});

/// Lloyd iterations from caller-supplied starting centroids.
KMeansModel kmeans_from(const Matrix& x, const Matrix& initial_centroids, const KMeansOptions& options = {});

double inertia_of(const Matrix& x, const Matrix& centroids, const std::vector<std::size_t>& assignments);

/// Best-of-`restarts` inertia for every k in [k_min, k_max].
std::vector<std::pair<std::size_t, double>> inertia_curve(const Matrix& x, std::size_t k_min, std::size_t k_max,
                                                          std::uint64_t seed, std::size_t restarts = 10);

/// k with the largest second difference I(k-1) - 2 I(k) + I(k+1). A hint,
/// not a decision; needs at least three points.
std::size_t elbow_pick(const std::vector<std::pair<std::size_t, double>>& curve);

} // namespace batdeg::cluster
