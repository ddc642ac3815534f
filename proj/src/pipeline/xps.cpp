#include "batdeg/pipeline/xps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "batdeg/error.hpp"
#include "batdeg/io/file.hpp"
#include "batdeg/matrix.hpp"

namespace batdeg::pipeline {

namespace {

struct RawRow {
    const char* tag;
    double life;
    double temperature;
    std::array<double, kXpsElements> fractions;
    double co;
    double pf;
    double ratio;
    int group;
};

// Per-battery table: tag, life, temperature, eight fractions, the table's
// CO, PF and CO/(CO+PF) columns, group.
const RawRow kRows[] = {
    {"25C-19", 159, 25, {20.766, 33.630, 27.310, 12.786, 3.676, 1.086, 0.720, 0.026}, 60.940, 16.462, 0.787074, 0},
    {"25C-20", 106, 25, {18.774, 33.524, 25.534, 15.128, 4.958, 1.016, 1.034, 0.036}, 59.058, 20.086, 0.746375, 0},
    {"70C-3", 509, 70, {20.656, 36.706, 21.818, 13.618, 5.070, 0.866, 0.736, 0.090}, 58.524, 18.688, 0.758241, 0},
    {"70C-7", 501, 70, {22.730, 30.240, 21.812, 17.832, 5.454, 0.926, 0.684, 0.108}, 52.052, 23.286, 0.690711, 0},
    {"70C-9", 353, 70, {21.806, 32.080, 20.896, 17.800, 4.944, 1.432, 1.000, 0.038}, 52.976, 22.744, 0.698596, 0},
    {"70C-12", 486, 70, {23.240, 31.106, 23.276, 15.752, 5.088, 0.830, 0.656, 0.054}, 54.382, 20.840, 0.722738, 0},
    {"30C-30", 169, 30, {21.200, 33.828, 25.690, 13.634, 3.888, 0.998, 0.730, 0.036}, 59.518, 17.522, 0.772685, 0},
    {"30C-31", 213, 30, {19.842, 33.572, 24.728, 15.534, 4.610, 1.112, 0.602, 0.006}, 58.300, 20.144, 0.742968, 0},
    {"30C-32", 182, 30, {18.864, 35.810, 24.670, 13.884, 4.822, 1.038, 0.874, 0.032}, 60.480, 18.706, 0.763888, 0},
    {"30C-41", 157, 30, {20.538, 37.384, 27.028, 9.944, 2.852, 1.408, 0.848, 0.000}, 64.412, 12.796, 0.834954, 0},
    {"55C-1", 674, 55, {23.240, 29.914, 24.134, 16.772, 4.384, 0.860, 0.648, 0.054}, 54.048, 21.156, 0.718212, 0},
    {"55C-11", 450, 55, {22.126, 31.708, 25.418, 14.430, 4.456, 1.010, 0.848, 0.006}, 57.126, 18.886, 0.751465, 0},
    {"55C-15", 427, 55, {23.988, 29.238, 25.560, 15.288, 4.196, 0.910, 0.826, 0.002}, 54.798, 19.484, 0.737058, 0},
    {"25C-6", 54, 25, {25.632, 22.430, 33.292, 14.270, 2.740, 1.194, 0.442, 0.000}, 55.722, 17.010, 0.765812, 1},
    {"25C-8", 71, 25, {28.522, 23.562, 31.874, 10.866, 3.562, 0.736, 0.866, 0.010}, 55.436, 14.428, 0.793673, 1},
    {"25C-9", 76, 25, {30.752, 19.670, 33.116, 11.604, 2.852, 0.950, 1.018, 0.034}, 52.786, 14.456, 0.783842, 1},
    {"25C-15", 89, 25, {27.940, 23.550, 29.922, 11.518, 2.897, 0.392, 4.202, 0.152}, 53.472, 15.126, 0.780715, 1},
    {"25C-16", 118, 25, {24.318, 23.108, 31.066, 13.952, 3.306, 0.292, 3.840, 0.120}, 54.174, 17.258, 0.758460, 1},
    {"25C-21", 85, 25, {26.264, 23.000, 32.824, 13.698, 2.610, 1.244, 0.354, 0.008}, 55.824, 16.308, 0.772745, 1},
    {"30C-22", 191, 30, {25.892, 25.384, 30.852, 13.140, 3.200, 0.936, 0.550, 0.044}, 56.236, 16.340, 0.775328, 1},
    {"30C-24", 248, 30, {28.310, 20.810, 33.898, 12.106, 3.166, 0.888, 0.792, 0.026}, 54.708, 15.272, 0.781909, 1},
    {"30C-26", 143, 30, {29.548, 19.968, 33.644, 11.716, 3.168, 0.834, 1.104, 0.014}, 53.612, 14.884, 0.783181, 1},
    {"30C-27", 163, 30, {27.540, 20.980, 32.414, 13.548, 3.894, 1.010, 0.580, 0.034}, 53.394, 17.442, 0.753802, 1},
    {"30C-28", 172, 30, {25.548, 22.748, 32.390, 13.820, 3.678, 1.054, 0.698, 0.066}, 55.138, 17.498, 0.759323, 1},
    {"30C-29", 305, 30, {28.962, 23.120, 29.858, 12.670, 3.168, 1.168, 0.990, 0.062}, 52.978, 15.838, 0.769274, 1},
    {"30C-33", 854, 30, {29.396, 20.956, 31.742, 11.438, 2.522, 0.542, 3.326, 0.080}, 52.698, 13.960, 0.790336, 1},
    {"30C-36", 233, 30, {25.216, 24.216, 29.900, 13.712, 3.408, 1.594, 1.778, 0.170}, 54.116, 17.120, 0.760245, 1},
    {"30C-38", 439, 30, {29.932, 21.814, 29.774, 13.516, 2.960, 1.192, 0.772, 0.036}, 51.588, 16.476, 0.755750, 1},
    {"-10C-1", 4, -10, {34.820, 13.600, 21.800, 24.450, 2.570, 0.690, 2.080, 0.000}, 35.400, 27.020, 0.567126, 2},
    {"25C-1", 40, 25, {32.912, 18.184, 23.858, 19.764, 3.134, 0.896, 1.048, 0.000}, 42.042, 22.898, 0.647777, 2},
    {"25C-3", 38, 25, {32.930, 19.016, 25.162, 17.572, 2.984, 1.130, 1.208, 0.000}, 44.178, 20.556, 0.682161, 2},
    {"25C-4", 47, 25, {32.050, 19.564, 28.826, 13.216, 2.183, 0.224, 4.242, 0.144}, 48.390, 15.472, 0.757593, 2},
    {"25C-5", 47, 25, {32.064, 19.120, 27.220, 14.502, 2.244, 0.392, 4.358, 0.096}, 46.340, 16.746, 0.734476, 2},
    {"30C-25", 278, 30, {30.590, 19.322, 26.718, 17.064, 4.044, 0.886, 1.186, 0.016}, 46.040, 21.108, 0.685623, 2},
    {"25C-2", 42, 25, {27.710, 23.886, 28.768, 14.982, 2.908, 1.062, 0.668, 0.014}, 52.654, 17.890, 0.744441, 3},
    {"25C-10", 57, 25, {27.596, 19.726, 28.194, 18.766, 3.690, 0.970, 0.882, 0.018}, 47.920, 22.456, 0.682233, 3},
    {"25C-14", 98, 25, {25.684, 23.914, 26.720, 18.324, 3.310, 1.072, 0.972, 0.006}, 50.634, 21.634, 0.700064, 3},
    {"25C-17", 121, 25, {26.340, 22.902, 28.774, 18.298, 4.535, 0.950, 0.704, 0.018}, 51.676, 22.350, 0.692944, 3},
    {"25C-18", 125, 25, {25.944, 22.528, 23.234, 21.048, 2.816, 0.222, 4.088, 0.116}, 45.762, 23.864, 0.663259, 3},
    {"30C-21", 251, 30, {26.428, 25.560, 22.630, 18.730, 4.438, 0.852, 1.298, 0.058}, 48.190, 23.168, 0.675514, 3},
    {"30C-23", 303, 30, {27.822, 24.026, 24.686, 16.672, 4.376, 0.992, 1.286, 0.136}, 48.712, 21.048, 0.698095, 3},
    {"30C-37", 164, 30, {31.094, 24.286, 25.338, 12.868, 2.298, 0.680, 3.368, 0.070}, 49.624, 15.166, 0.765489, 3},
    {"55C-7", 683, 55, {24.686, 26.042, 25.124, 17.670, 4.546, 1.106, 0.786, 0.042}, 51.166, 22.216, 0.697074, 3},
    {"25C-11", 54, 25, {3.62, 42.03, 33.076, 17.632, 1.888, 0.718, 0.426, 0.962}, 75.106, 19.866, 0.789069, 4},
    {"70C-14", 331, 70, {18.0, 51.434, 17.158, 10.156, 1.656, 0.636, 0.862, 0.098}, 68.592, 11.812, 0.853065, 5},
    {"25C-7", 47, 25, {25.876, 28.410, 29.002, 11.718, 3.572, 0.634, 0.786, 0.000}, 57.412, 15.290, 0.790284, 6},
    {"25C-13", 60, 25, {24.776, 29.060, 27.328, 13.894, 3.204, 1.038, 0.700, 0.002}, 56.388, 17.098, 0.766761, 6},
    {"30C-34", 203, 30, {26.626, 27.026, 34.146, 8.412, 2.178, 1.004, 0.604, 0.002}, 61.172, 10.590, 0.852432, 6},
    {"30C-35", 201, 30, {26.040, 27.564, 31.456, 10.922, 2.400, 0.884, 0.576, 0.052}, 59.020, 13.189, 0.818959, 6},
    {"30C-39", 238, 30, {23.748, 35.920, 31.082, 5.920, 1.872, 0.892, 0.572, 0.000}, 67.002, 7.792, 0.895892, 6},
    {"30C-40", 246, 30, {21.700, 35.314, 31.082, 5.008, 1.809, 0.870, 0.640, 0.016}, 66.396, 6.988, 0.90765, 6},
    {"25C-12", 12, 25, {19.912, 26.866, 24.132, 23.768, 3.454, 1.142, 0.676, 0.048}, 50.998, 27.222, 0.651598, 7},
    {"70C-2", 692, 70, {28.216, 22.586, 15.548, 26.150, 4.564, 0.634, 2.224, 0.086}, 38.134, 30.714, 0.553442, 7},
    {"70C-5", 523, 70, {25.504, 28.520, 18.758, 20.440, 4.874, 0.770, 1.116, 0.016}, 47.278, 25.314, 0.649729, 7},
    {"70C-17", 344, 70, {26.114, 27.994, 20.122, 18.994, 4.694, 1.028, 1.044, 0.008}, 48.116, 23.688, 0.670004, 7},
    {"55C-19", 397, 55, {27.534, 23.430, 19.656, 22.646, 4.240, 1.308, 1.164, 0.020}, 43.086, 26.886, 0.613232, 7},
};

const std::vector<XpsCenter> kCenters = {
    {0, {21.366923, 32.98, 24.451846, 14.800154, 4.492154, 1.037846, 0.785077, 0.037538}},
    {1, {27.5848, 22.3544, 31.771067, 12.7716, 3.142067, 0.935067, 1.4208, 0.057067}},
    {2, {32.561, 18.134333, 25.597333, 17.761333, 2.859833, 0.703, 2.353667, 0.042667}},
    {3, {27.033778, 23.652222, 25.940889, 17.484222, 3.657444, 0.878444, 1.561333, 0.053111}},
    {4, {3.62, 42.03, 33.076, 17.632, 1.888, 0.718, 0.426, 0.962}},
    {5, {18.0, 51.434, 17.158, 10.156, 1.656, 0.636, 0.862, 0.098}},
    {6, {24.794333, 30.549, 30.682667, 9.312333, 2.505833, 0.887, 0.646333, 0.012}},
    {7, {25.456, 25.8792, 19.6432, 22.3996, 4.3652, 0.9764, 1.2448, 0.0356}},
};

using Vec = std::array<double, kXpsElements>;

double sq_dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t e = 0; e < kXpsElements; ++e) {
        s += (a[e] - b[e]) * (a[e] - b[e]);
    }
    return s;
}

Vec mean_of(const std::vector<XpsSample>& samples, const std::vector<std::size_t>& members) {
    Vec m{};
    double n = 0.0;
    for (auto i : members) {
        n += 1.0;
        for (std::size_t e = 0; e < kXpsElements; ++e) {
            m[e] += (samples[i].fractions[e] - m[e]) / n;
        }
    }
    return m;
}

// Retained clusters -> reference centres, one-to-one, minimum total squared
// distance. Exhaustive over assignments; both sides are small.
std::vector<std::size_t> match_centres(const std::vector<Vec>& clusters, const std::vector<Vec>& refs) {
    const std::size_t n = clusters.size();
    std::vector<std::size_t> best(n);
    std::vector<std::size_t> cur(n);
    std::vector<bool> used(refs.size(), false);
    double best_cost = std::numeric_limits<double>::infinity();
    auto rec = [&](auto&& self, std::size_t i, double cost) -> void {
        if (cost >= best_cost) {
            return;
        }
        if (i == n) {
            best_cost = cost;
            best = cur;
            return;
        }
        for (std::size_t r = 0; r < refs.size(); ++r) {
            if (used[r]) {
                continue;
            }
            used[r] = true;
            cur[i] = r;
            self(self, i + 1, cost + sq_dist(clusters[i], refs[r]));
            used[r] = false;
        }
    };
    rec(rec, 0, 0.0);
    return best;
}

XpsPatterns name_patterns(const std::vector<XpsSample>& samples, const std::vector<int>& cluster_of,
                          std::size_t k, const std::vector<XpsCenter>& reference, bool listed = false) {
    XpsPatterns out;
    out.cluster_of = cluster_of;
    out.pattern_of.assign(samples.size(), 0);
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        members[static_cast<std::size_t>(cluster_of[i])].push_back(i);
    }
    std::vector<int> retained;
    for (std::size_t c = 0; c < k; ++c) {
        if (members[c].size() == 1) {
            out.excluded_clusters.push_back(static_cast<int>(c));
            out.excluded.push_back(members[c].front());
        } else if (members[c].size() > 1) {
            retained.push_back(static_cast<int>(c));
        }
    }

    std::vector<std::pair<int, std::string>> order; // (cluster, name) in pattern order
    if (listed) {
        for (const auto& p : kFixturePatterns) {
            if (std::find(retained.begin(), retained.end(), p.group) != retained.end()) {
                order.emplace_back(p.group, p.name);
            }
        }
        for (int c : retained) {
            if (std::none_of(order.begin(), order.end(), [c](const auto& o) { return o.first == c; })) {
                order.emplace_back(c, "");
            }
        }
    } else if (!reference.empty()) {
        // Only the named reference groups take part in the matching.
        std::vector<Vec> refs;
        std::vector<const char*> names;
        for (const auto& p : kFixturePatterns) {
            for (const auto& c : reference) {
                if (c.group == p.group) {
                    refs.push_back(c.center);
                    names.push_back(p.name);
                }
            }
        }
        if (refs.size() < retained.size()) {
            throw ValidationError("more retained clusters (" + std::to_string(retained.size()) +
                                  ") than named reference centres (" + std::to_string(refs.size()) + ")");
        }
        std::vector<Vec> cents;
        for (int c : retained) {
            cents.push_back(mean_of(samples, members[static_cast<std::size_t>(c)]));
        }
        const auto match = match_centres(cents, refs);
        std::vector<std::pair<std::size_t, std::size_t>> by_ref;
        for (std::size_t i = 0; i < retained.size(); ++i) {
            by_ref.emplace_back(match[i], i);
        }
        std::sort(by_ref.begin(), by_ref.end());
        for (auto [r, i] : by_ref) {
            order.emplace_back(retained[i], names[r]);
        }
    } else {
        std::stable_sort(retained.begin(), retained.end(), [&](int a, int b) {
            return members[static_cast<std::size_t>(a)].size() > members[static_cast<std::size_t>(b)].size();
        });
        for (int c : retained) {
            order.emplace_back(c, "");
        }
    }

    for (std::size_t p = 0; p < order.size(); ++p) {
        Pattern pat;
        pat.index = static_cast<int>(p + 1);
        pat.cluster = order[p].first;
        pat.name = order[p].second.empty() ? "Pattern " + std::to_string(p + 1) : order[p].second;
        pat.members = members[static_cast<std::size_t>(pat.cluster)];
        pat.centroid = mean_of(samples, pat.members);
        for (auto i : pat.members) {
            out.pattern_of[i] = pat.index;
        }
        out.patterns.push_back(std::move(pat));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out.inertia += sq_dist(samples[i].fractions, mean_of(samples, members[static_cast<std::size_t>(cluster_of[i])]));
    }
    return out;
}

} // namespace

const std::vector<XpsFixtureRow>& xps_fixture_rows() {
    static const std::vector<XpsFixtureRow> rows = [] {
        std::vector<XpsFixtureRow> v;
        for (const auto& r : kRows) {
            v.push_back({{r.tag, r.life, r.temperature, r.fractions, r.group}, r.co, r.pf, r.ratio});
        }
        return v;
    }();
    return rows;
}

std::vector<XpsSample> xps_fixture() {
    std::vector<XpsSample> out;
    for (const auto& r : xps_fixture_rows()) {
        out.push_back(r.sample);
    }
    return out;
}

const std::vector<XpsCenter>& xps_fixture_centers() { return kCenters; }

std::vector<XpsIssue> xps_check(const std::vector<XpsSample>& samples, const XpsCheckOptions& opt) {
    std::vector<XpsIssue> issues;
    for (const auto& s : samples) {
        double sum = 0.0;
        for (std::size_t e = 0; e < kXpsElements; ++e) {
            sum += s.fractions[e];
            if (s.fractions[e] < 0) {
                issues.push_back({s.data_tag, std::string("negative ") + kXpsElementNames[e], 0.0, s.fractions[e]});
            }
        }
        if (std::abs(sum - 100.0) > opt.sum_tolerance) {
            issues.push_back({s.data_tag, "fraction sum", 100.0, sum});
        }
    }
    return issues;
}

std::vector<XpsIssue> xps_check(const std::vector<XpsFixtureRow>& rows, const XpsCheckOptions& opt) {
    std::vector<XpsSample> samples;
    for (const auto& r : rows) {
        samples.push_back(r.sample);
    }
    auto issues = xps_check(samples, opt);
    for (const auto& r : rows) {
        const auto& s = r.sample;
        if (std::abs(s.co() - r.listed_co) > opt.derived_tolerance) {
            issues.push_back({s.data_tag, "CO = C1s + O1s", r.listed_co, s.co()});
        }
        if (std::abs(s.pf() - r.listed_pf) > opt.derived_tolerance) {
            issues.push_back({s.data_tag, "PF = F1s + P2p", r.listed_pf, s.pf()});
        }
        if (std::abs(s.co_ratio() - r.listed_ratio) > opt.ratio_tolerance) {
            issues.push_back({s.data_tag, "CO/(CO+PF)", r.listed_ratio, s.co_ratio()});
        }
    }
    return issues;
}

std::vector<XpsSample> read_xps_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(source + ": empty XPS file");
    }
    const auto header = io::split_csv_line(line);
    std::vector<std::string> expected{"data_tag", "life", "temperature"};
    expected.insert(expected.end(), kXpsElementNames.begin(), kXpsElementNames.end());
    expected.push_back("group");
    if (header != expected) {
        throw ValidationError(source + ": header must be " + [&] {
            std::string h;
            for (const auto& e : expected) {
                h += (h.empty() ? "" : ",") + e;
            }
            return h;
        }());
    }
    std::vector<XpsSample> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        const auto f = io::split_csv_line(line);
        const std::string where = source + ":" + std::to_string(lineno);
        if (f.size() != expected.size()) {
            throw ValidationError(where + ": expected " + std::to_string(expected.size()) + " fields");
        }
        XpsSample s;
        s.data_tag = f[0];
        s.life = io::parse_double(f[1], where + " life");
        s.temperature = io::parse_double(f[2], where + " temperature");
        for (std::size_t e = 0; e < kXpsElements; ++e) {
            s.fractions[e] = io::parse_double(f[3 + e], where + " " + kXpsElementNames[e]);
            if (!std::isfinite(s.fractions[e])) {
                throw ValidationError(where + ": " + kXpsElementNames[e] + " must be finite");
            }
        }
        s.group = f.back().empty() ? -1 : static_cast<int>(io::parse_double(f.back(), where + " group"));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<XpsSample> read_xps_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw RuntimeError("cannot open " + path.string());
    }
    return read_xps_csv(in, path.string());
}

void write_xps_csv(std::ostream& out, const std::vector<XpsSample>& samples) {
    out << "data_tag,life,temperature";
    for (const char* e : kXpsElementNames) {
        out << ',' << e;
    }
    out << ",group\n";
    for (const auto& s : samples) {
        out << s.data_tag << ',' << io::format_double(s.life) << ',' << io::format_double(s.temperature);
        for (double v : s.fractions) {
            out << ',' << io::format_double(v);
        }
        out << ',';
        if (s.group >= 0) {
            out << s.group;
        }
        out << '\n';
    }
}

XpsPatterns xps_patterns(const std::vector<XpsSample>& samples, const XpsPatternOptions& opt) {
    if (opt.k == 0 || samples.size() < opt.k) {
        throw ValidationError("XPS clustering needs at least k=" + std::to_string(opt.k) + " samples, got " +
                              std::to_string(samples.size()));
    }
    Matrix x(samples.size(), kXpsElements);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::copy(samples[i].fractions.begin(), samples[i].fractions.end(), x.row(i).begin());
    }
    cluster::KMeansOptions ko;
    ko.n_init = opt.restarts;
    const auto model = cluster::kmeans_fit(x, opt.k, opt.seed, ko);
    std::vector<int> cluster_of;
    for (auto a : model.assignments) {
        cluster_of.push_back(static_cast<int>(a));
    }
    auto out = name_patterns(samples, cluster_of, opt.k, opt.reference);
    out.inertia = model.inertia;
    return out;
}

XpsPatterns xps_listed_patterns(const std::vector<XpsSample>& samples) {
    int k = 0;
    std::vector<int> cluster_of;
    for (const auto& s : samples) {
        if (s.group < 0) {
            throw ValidationError("sample " + s.data_tag + " has no listed group");
        }
        k = std::max(k, s.group + 1);
        cluster_of.push_back(s.group);
    }
    return name_patterns(samples, cluster_of, static_cast<std::size_t>(k), {}, true);
}

} // namespace batdeg::pipeline
