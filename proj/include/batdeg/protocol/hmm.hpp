#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "batdeg/protocol/protocol.hpp"

namespace batdeg::protocol {

/// Hidden Markov model with one Gaussian emission per hidden state.
struct GaussianHmm {
    std::size_t n_states = 0;
    std::vector<double> transition; ///< row-major n x n, row i = P(next | i)
    std::vector<double> means;
    std::vector<double> variances;
    std::vector<double> initial;

    double a(std::size_t from, std::size_t to) const noexcept { return transition[from * n_states + to]; }

    /// Throws ValidationError unless rows and the initial vector sum to 1
    /// within 1e-9 and every variance is positive.
    void validate() const;
};

struct FitOptions {
    std::size_t n_states = 8;
    std::uint64_t seed = 0;
    std::size_t max_iter = 200;
    double tol = 1e-6; ///< stop when the log-likelihood gain falls below tol
    double variance_floor = 1e-6;
};

struct HmmFit {
    GaussianHmm model;
    /// Log-likelihood of the parameters entering each EM iteration; the last
    /// entry belongs to the returned model.
    std::vector<double> loglik_trace;
    std::size_t iterations = 0;
    bool converged = false;
    bool variance_floor_applied = false;
};

/// Baum-Welch fit. Means start from k-means++ seeds, variances from the
/// global variance, transitions from a uniform matrix with a doubled diagonal.
HmmFit fit_hmm(std::span<const double> observations, const FitOptions& options);
HmmFit fit_hmm(const PowerTrace& trace, std::size_t n_states, std::uint64_t seed, std::size_t max_iter,
               double tol);

/// Forward-algorithm log-likelihood with per-step rescaling.
double loglik(const GaussianHmm& model, std::span<const double> observations);
double loglik(const GaussianHmm& model, const PowerTrace& trace);

/// Draws an initial state, then alternates Gaussian emissions and state
/// transitions, one draw every `step_s` seconds for floor(duration / step)
/// samples (at least one).
PowerTrace sample_protocol(const GaussianHmm& model, double duration_s, double step_s, std::uint64_t seed);

} // namespace batdeg::protocol

namespace batdeg::protocol {

struct GenerateOptions {
    double duration_s = 8.0 * 3600.0; ///< long enough that discharge ends at v_min
    double step_s = 125.0; ///< each HMM draw is held this long
    double cap_w = 16.0;
    double zero_keep_ratio = 0.25;
};

/// sample_protocol followed by postprocess.
ProtocolSpec generate_protocol(const GaussianHmm& model, const GenerateOptions& options, std::uint64_t seed,
                               std::string protocol_id);

/// Fits an n-state HMM to a synthetic highway trace converted to single-cell
/// power (pack power divided by `pack_cells`).
GaussianHmm default_protocol_model(std::uint64_t seed, std::size_t n_states = 8, double trace_s = 20000.0,
                                   double pack_cells = 3000.0);

} // namespace batdeg::protocol
