#include "batdeg/protocol/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "batdeg/cluster/kmeans.hpp"
#include "batdeg/error.hpp"
#include "batdeg/simd/kernels.hpp"

namespace batdeg::protocol {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836; // log(2 pi)

// Emission likelihoods rescaled per time step: b[t*n + j] = exp(log p_j(x_t) - shift[t]).
struct Emissions {
    std::vector<double> b;
    std::vector<double> shift;
};

Emissions emissions(const GaussianHmm& m, std::span<const double> x) {
    const std::size_t n = m.n_states;
    const std::size_t len = x.size();
    const auto& k = simd::kernels();
    std::vector<double> logp(len * n);
    std::vector<double> column(len);
    for (std::size_t j = 0; j < n; ++j) {
        const double offset = -0.5 * (kLogTwoPi + std::log(m.variances[j]));
        k.gaussian_logpdf(x.data(), len, m.means[j], offset, 0.5 / m.variances[j], column.data());
        for (std::size_t t = 0; t < len; ++t) {
            logp[t * n + j] = column[t];
        }
    }
    Emissions e;
    e.b.resize(len * n);
    e.shift.resize(len);
    for (std::size_t t = 0; t < len; ++t) {
        const double* row = logp.data() + t * n;
        const double mx = *std::max_element(row, row + n);
        e.shift[t] = mx;
        for (std::size_t j = 0; j < n; ++j) {
            // Floor keeps far-away states reachable instead of exactly impossible.
            e.b[t * n + j] = std::max(std::exp(row[j] - mx), 1e-300);
        }
    }
    return e;
}

// Scaled forward pass; alpha rows are normalized, scale[t] holds the normalizer.
double forward(const GaussianHmm& m, const Emissions& e, std::vector<double>& alpha, std::vector<double>& scale) {
    const std::size_t n = m.n_states;
    const std::size_t len = e.shift.size();
    alpha.assign(len * n, 0.0);
    scale.assign(len, 0.0);
    double ll = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
        double* cur = alpha.data() + t * n;
        const double* b = e.b.data() + t * n;
        if (t == 0) {
            for (std::size_t j = 0; j < n; ++j) {
                cur[j] = m.initial[j] * b[j];
            }
        } else {
            const double* prev = alpha.data() + (t - 1) * n;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    s += prev[i] * m.transition[i * n + j];
                }
                cur[j] = s * b[j];
            }
        }
        double c = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            c += cur[j];
        }
        if (!(c > 0) || !std::isfinite(c)) {
            return -std::numeric_limits<double>::infinity();
        }
        for (std::size_t j = 0; j < n; ++j) {
            cur[j] /= c;
        }
        scale[t] = c;
        ll += std::log(c) + e.shift[t];
    }
    return ll;
}

void normalize(std::span<double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    for (double& x : v) {
        x /= s;
    }
}

GaussianHmm initial_model(std::span<const double> x, const FitOptions& opt) {
    const std::size_t n = opt.n_states;
    const std::size_t len = x.size();
    GaussianHmm m;
    m.n_states = n;

    double mean = 0.0;
    for (double v : x) {
        mean += v;
    }
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
    }
    var = std::max(var / static_cast<double>(len), opt.variance_floor);

    Matrix pts(len, 1);
    std::copy(x.begin(), x.end(), pts.data().begin());
    std::mt19937_64 rng(opt.seed);
    const auto seeds = cluster::kmeans_plus_plus(pts, n, rng);
    for (auto s : seeds) {
        m.means.push_back(x[s]);
    }
    std::sort(m.means.begin(), m.means.end());
    m.variances.assign(n, var);
    m.initial.assign(n, 1.0 / static_cast<double>(n));
    m.transition.assign(n * n, 1.0 / static_cast<double>(n + 1));
    for (std::size_t i = 0; i < n; ++i) {
        m.transition[i * n + i] = 2.0 / static_cast<double>(n + 1);
    }
    return m;
}

} // namespace

void GaussianHmm::validate() const {
    if (n_states == 0) {
        throw ValidationError("HMM needs at least one state");
    }
    if (transition.size() != n_states * n_states || means.size() != n_states || variances.size() != n_states ||
        initial.size() != n_states) {
        throw ValidationError("HMM parameter arrays do not match n_states");
    }
    auto check_dist = [](std::span<const double> p, const std::string& what) {
        double s = 0.0;
        for (double v : p) {
            if (!(v >= 0) || !std::isfinite(v)) {
                throw ValidationError(what + " has a negative or non-finite probability");
            }
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) {
            throw ValidationError(what + " does not sum to 1");
        }
    };
    check_dist(initial, "initial distribution");
    for (std::size_t i = 0; i < n_states; ++i) {
        check_dist(std::span<const double>(transition).subspan(i * n_states, n_states),
                   "transition row " + std::to_string(i));
        if (!(variances[i] > 0) || !std::isfinite(variances[i]) || !std::isfinite(means[i])) {
            throw ValidationError("state " + std::to_string(i) + " has an invalid mean or variance");
        }
    }
}

double loglik(const GaussianHmm& model, std::span<const double> observations) {
    model.validate();
    if (observations.empty()) {
        return 0.0;
    }
    std::vector<double> alpha;
    std::vector<double> scale;
    return forward(model, emissions(model, observations), alpha, scale);
}

double loglik(const GaussianHmm& model, const PowerTrace& trace) { return loglik(model, trace.power_w); }

HmmFit fit_hmm(std::span<const double> x, const FitOptions& opt) {
    const std::size_t n = opt.n_states;
    const std::size_t len = x.size();
    if (n == 0) {
        throw ValidationError("n_states must be at least 1");
    }
    if (len < n) {
        throw ValidationError("trace has " + std::to_string(len) + " samples, fewer than n_states=" +
                              std::to_string(n));
    }
    if (!(opt.variance_floor > 0)) {
        throw ValidationError("variance floor must be positive");
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw ValidationError("trace contains a non-finite power");
        }
    }

    HmmFit fit;
    GaussianHmm m = initial_model(x, opt);
    fit.variance_floor_applied = m.variances[0] == opt.variance_floor;

    std::vector<double> alpha;
    std::vector<double> scale;
    std::vector<double> beta(len * n);
    std::vector<double> gamma(len * n);
    std::vector<double> xi(n * n);
    std::vector<double> tmp(n);

    for (std::size_t iter = 0; iter < std::max<std::size_t>(opt.max_iter, 1); ++iter) {
        const Emissions e = emissions(m, x);
        const double ll = forward(m, e, alpha, scale);
        if (!fit.loglik_trace.empty()) {
            const double gain = ll - fit.loglik_trace.back();
            fit.loglik_trace.push_back(ll);
            fit.iterations = iter;
            // tol is a per-sample gain so it means the same for short and long traces.
            if (gain < opt.tol * static_cast<double>(len)) {
                fit.converged = true;
                break;
            }
        } else {
            fit.loglik_trace.push_back(ll);
        }
        if (iter + 1 == opt.max_iter) {
            fit.iterations = opt.max_iter;
            break;
        }

        // Backward pass, scaled with the forward normalizers.
        std::fill(beta.end() - static_cast<std::ptrdiff_t>(n), beta.end(), 1.0);
        std::fill(xi.begin(), xi.end(), 0.0);
        for (std::size_t t = len - 1; t-- > 0;) {
            const double* bn = e.b.data() + (t + 1) * n;
            const double* betan = beta.data() + (t + 1) * n;
            const double* a = alpha.data() + t * n;
            for (std::size_t j = 0; j < n; ++j) {
                tmp[j] = bn[j] * betan[j] / scale[t + 1];
            }
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double w = m.transition[i * n + j] * tmp[j];
                    s += w;
                    xi[i * n + j] += a[i] * w;
                }
                beta[t * n + i] = s;
            }
        }
        for (std::size_t t = 0; t < len; ++t) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                gamma[t * n + j] = alpha[t * n + j] * beta[t * n + j];
                s += gamma[t * n + j];
            }
            for (std::size_t j = 0; j < n; ++j) {
                gamma[t * n + j] /= s;
            }
        }

        // M-step. States with no occupancy keep their previous parameters.
        GaussianHmm next = m;
        for (std::size_t j = 0; j < n; ++j) {
            next.initial[j] = gamma[j];
        }
        normalize(next.initial);
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                row += xi[i * n + j];
            }
            if (row > 0) {
                for (std::size_t j = 0; j < n; ++j) {
                    next.transition[i * n + j] = xi[i * n + j] / row;
                }
                normalize(std::span<double>(next.transition).subspan(i * n, n));
            }
        }
        fit.variance_floor_applied = false;
        for (std::size_t j = 0; j < n; ++j) {
            double w = 0.0;
            double wx = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                w += gamma[t * n + j];
                wx += gamma[t * n + j] * x[t];
            }
            if (!(w > 0)) {
                continue;
            }
            const double mu = wx / w;
            double wv = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                const double d = x[t] - mu;
                wv += gamma[t * n + j] * d * d;
            }
            double var = wv / w;
            if (!(var > opt.variance_floor)) {
                var = opt.variance_floor;
                fit.variance_floor_applied = true;
            }
            next.means[j] = mu;
            next.variances[j] = var;
        }
        m = std::move(next);
    }
    fit.model = std::move(m);
    return fit;
}

HmmFit fit_hmm(const PowerTrace& trace, std::size_t n_states, std::uint64_t seed, std::size_t max_iter, double tol) {
    FitOptions opt;
    opt.n_states = n_states;
    opt.seed = seed;
    opt.max_iter = max_iter;
    opt.tol = tol;
    return fit_hmm(trace.power_w, opt);
}

PowerTrace sample_protocol(const GaussianHmm& model, double duration_s, double step_s, std::uint64_t seed) {
    model.validate();
    if (!(duration_s > 0) || !(step_s > 0)) {
        throw ValidationError("duration and step must be positive");
    }
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(duration_s / step_s + 1e-9)));
    const std::size_t n = model.n_states;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    auto draw = [&rng](std::span<const double> p) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double u = unit(rng);
        double run = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            run += p[i];
            if (u < run) {
                return i;
            }
        }
        return p.size() - 1;
    };

    PowerTrace out;
    out.time_s.reserve(count);
    out.power_w.reserve(count);
    std::size_t state = draw(model.initial);
    for (std::size_t k = 0; k < count; ++k) {
        out.time_s.push_back(static_cast<double>(k) * step_s);
        out.power_w.push_back(model.means[state] + std::sqrt(model.variances[state]) * normal(rng));
        state = draw(std::span<const double>(model.transition).subspan(state * n, n));
    }
    return out;
}

} // namespace batdeg::protocol

namespace batdeg::protocol {

ProtocolSpec generate_protocol(const GaussianHmm& model, const GenerateOptions& options, std::uint64_t seed,
                               std::string protocol_id) {
    auto spec = postprocess(sample_protocol(model, options.duration_s, options.step_s, seed), options.cap_w,
                            options.zero_keep_ratio, std::move(protocol_id), seed);
    return spec;
}

GaussianHmm default_protocol_model(std::uint64_t seed, std::size_t n_states, double trace_s, double pack_cells) {
    if (!(pack_cells > 0)) {
        throw ValidationError("pack cell count must be positive");
    }
    const auto power = scale_power(speed_to_power(synthetic_highway_trace(trace_s, seed), {}), 1.0 / pack_cells);
    FitOptions opt;
    opt.n_states = n_states;
    opt.seed = seed;
    return fit_hmm(power.power_w, opt).model;
}

} // namespace batdeg::protocol
