#include "batdeg/features/evaluate.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "batdeg/error.hpp"
#include "batdeg/features/aggregate.hpp"
#include "batdeg/io/file.hpp"

namespace batdeg::features {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double activate(Activator a, double x) { return a == Activator::abs ? std::abs(x) : x; }

void check_history(const cell::CellHistory& h, std::size_t n_cycles, int groups) {
    if (groups < 1 || n_cycles < static_cast<std::size_t>(groups)) {
        throw ValidationError("early window of " + std::to_string(n_cycles) + " cycles is shorter than " +
                              std::to_string(groups) + " groups");
    }
    if (h.cycles.size() < n_cycles) {
        throw ValidationError("cell " + h.cell_id + " has " + std::to_string(h.cycles.size()) +
                              " cycles, needs " + std::to_string(n_cycles));
    }
}

ResampledCycle resample_checked(const cell::CellHistory& h, std::size_t c, const ResampleOptions& o) {
    try {
        return resample_cycle(h.cycles[c], o);
    } catch (const ValidationError& e) {
        throw ValidationError("cell " + h.cell_id + ": " + e.what());
    }
}

} // namespace

std::vector<std::pair<std::size_t, std::size_t>> group_cycles(std::size_t n, int groups) {
    if (groups < 1 || n < static_cast<std::size_t>(groups)) {
        throw ValidationError("cannot split " + std::to_string(n) + " cycles into " + std::to_string(groups) +
                              " groups");
    }
    const auto k = static_cast<std::size_t>(groups);
    const std::size_t w = n / k;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t a = 1; a <= k; ++a) {
        out.emplace_back((a - 1) * w, a == k ? n : a * w);
    }
    return out;
}

DescriptorTensor compute_descriptors(const EvalPlan& plan, const cell::CellHistory& h, std::size_t n_cycles,
                                     const ResampleOptions& o) {
    check_history(h, n_cycles, plan.groups);
    // Descriptors sharing a (signal, segment) slice share one moment pass.
    std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> by_slice;
    for (std::size_t d = 0; d < plan.descriptors.size(); ++d) {
        const auto& node = plan.descriptors[d];
        by_slice[{node.signal.index(), node.segment.index}].push_back(d);
    }
    DescriptorTensor t;
    t.cycles = n_cycles;
    t.nodes = plan.descriptors.size();
    t.values.assign(t.cycles * t.nodes, kNaN);
    for (std::size_t c = 0; c < n_cycles; ++c) {
        const auto rc = resample_checked(h, c, o);
        for (const auto& [slice, members] : by_slice) {
            const auto& node = plan.descriptors[members.front()];
            const auto& arr = rc[node.signal];
            const auto [b, e] = segment_bounds(arr.size(), node.segment);
            const auto stats = nan_stats(std::span<const double>(arr).subspan(b, e - b));
            for (auto d : members) {
                t.values[c * t.nodes + d] = stats.get(plan.descriptors[d].inner);
            }
        }
    }
    return t;
}

std::vector<double> evaluate(const EvalPlan& plan, const cell::CellHistory& h, std::size_t n_cycles,
                             const ResampleOptions& o) {
    const auto t = compute_descriptors(plan, h, n_cycles, o);
    const auto ranges = group_cycles(n_cycles, plan.groups);

    std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> by_group;
    for (std::size_t g = 0; g < plan.group_nodes.size(); ++g) {
        by_group[{plan.group_nodes[g].descriptor, plan.group_nodes[g].group}].push_back(g);
    }
    std::vector<double> gv(plan.group_nodes.size(), kNaN);
    std::vector<double> column;
    for (const auto& [key, members] : by_group) {
        const auto [b, e] = ranges[static_cast<std::size_t>(key.second - 1)];
        column.clear();
        for (std::size_t c = b; c < e; ++c) {
            column.push_back(t(c, key.first));
        }
        const auto stats = nan_stats(column);
        for (auto g : members) {
            gv[g] = stats.get(plan.group_nodes[g].outer);
        }
    }

    std::vector<double> out(plan.features.size());
    for (std::size_t f = 0; f < plan.features.size(); ++f) {
        const auto& node = plan.features[f];
        double v = gv[node.lhs];
        if (node.rhs != FeatureNode::kNone) {
            v -= gv[node.rhs];
        }
        out[f] = activate(node.activator, v);
    }
    return out;
}

std::vector<double> evaluate_naive(std::span<const FeatureExpr> exprs, const cell::CellHistory& h,
                                   std::size_t n_cycles, const ResampleOptions& o) {
    if (exprs.empty()) {
        return {};
    }
    check_history(h, n_cycles, exprs.front().selector.groups);
    std::vector<ResampledCycle> cycles;
    cycles.reserve(n_cycles);
    for (std::size_t c = 0; c < n_cycles; ++c) {
        cycles.push_back(resample_checked(h, c, o));
    }
    auto group_value = [&](const FeatureExpr& e, int group) {
        const auto [b, end] = group_cycles(n_cycles, e.selector.groups)[static_cast<std::size_t>(group - 1)];
        std::vector<double> per_cycle;
        for (std::size_t c = b; c < end; ++c) {
            per_cycle.push_back(segment_agg(cycles[c][e.signal], e.segment, e.inner));
        }
        return nan_aggregate(e.outer, per_cycle);
    };
    std::vector<double> out;
    out.reserve(exprs.size());
    for (const auto& e : exprs) {
        validate(e);
        double v = group_value(e, e.selector.group);
        if (e.selector.is_diff()) {
            v -= group_value(e, e.selector.minus);
        }
        out.push_back(activate(e.activator, v));
    }
    return out;
}

void FeatureMatrix::validate() const {
    if (values.rows() != cell_ids.size() || values.cols() != names.size()) {
        throw ValidationError("feature matrix shape does not match its labels");
    }
}

std::vector<std::string> feature_names(const EvalPlan& plan) {
    std::vector<std::string> names;
    names.reserve(plan.exprs.size());
    for (const auto& e : plan.exprs) {
        names.push_back(render(e));
    }
    return names;
}

FeatureMatrix evaluate_matrix(const EvalPlan& plan, std::span<const cell::CellHistory> histories,
                              std::size_t n_cycles, const ResampleOptions& o, std::size_t jobs) {
    FeatureMatrix m;
    m.names = feature_names(plan);
    m.values = Matrix(histories.size(), plan.features.size());
    for (const auto& h : histories) {
        m.cell_ids.push_back(h.cell_id);
    }
    const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, histories.size()));
    std::vector<std::string> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t r = w; r < histories.size(); r += workers) {
                const auto row = evaluate(plan, histories[r], n_cycles, o);
                std::copy(row.begin(), row.end(), m.values.row(r).begin());
            }
        } catch (const std::exception& e) {
            errors[w] = e.what();
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
    for (const auto& e : errors) {
        if (!e.empty()) {
            throw ValidationError(e);
        }
    }
    return m;
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& m) {
    m.validate();
    out << "cell_id";
    for (const auto& n : m.names) {
        out << ',' << n;
    }
    out << '\n';
    for (std::size_t r = 0; r < m.values.rows(); ++r) {
        out << m.cell_ids[r];
        for (double v : m.values.row(r)) {
            out << ',' << io::format_double(v);
        }
        out << '\n';
    }
}

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
    std::ostringstream ss;
    write_feature_csv(ss, m);
    io::write_file_atomic(path, ss.str());
}

FeatureMatrix read_feature_csv(std::istream& in, const std::string& source) {
    FeatureMatrix m;
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(source + ": empty feature file");
    }
    auto header = io::split_csv_line(line);
    if (header.empty() || header[0] != "cell_id") {
        throw ValidationError(source + ": first column must be cell_id");
    }
    m.names.assign(header.begin() + 1, header.end());
    std::vector<double> data;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto f = io::split_csv_line(line);
        if (f.size() != header.size()) {
            throw ValidationError(source + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        }
        m.cell_ids.push_back(f[0]);
        for (std::size_t k = 1; k < f.size(); ++k) {
            data.push_back(io::parse_double(f[k], m.names[k - 1]));
        }
    }
    m.values = Matrix(m.cell_ids.size(), m.names.size());
    std::copy(data.begin(), data.end(), m.values.data().begin());
    return m;
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw RuntimeError("cannot open " + path.string());
    }
    return read_feature_csv(in, path.string());
}

void write_feature_list(const std::filesystem::path& path, std::span<const FeatureExpr> exprs) {
    std::string text;
    for (const auto& e : exprs) {
        text += render(e);
        text += '\n';
    }
    io::write_file_atomic(path, text);
}

std::vector<FeatureExpr> read_feature_list(const std::filesystem::path& path) {
    std::istringstream in(io::read_file(path));
    std::vector<FeatureExpr> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        try {
            out.push_back(parse(line));
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

} // namespace batdeg::features
