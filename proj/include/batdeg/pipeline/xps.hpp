#pragma once

// Per-cell XPS surface compositions and their grouping into interfacial
// chemistry patterns.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "batdeg/cluster/kmeans.hpp"

namespace batdeg::pipeline {

inline constexpr std::size_t kXpsElements = 8;
inline constexpr std::array<const char*, kXpsElements> kXpsElementNames{"Li1s", "C1s",   "O1s",   "F1s",
                                                                        "P2p",  "Ni3p1", "Co3p1", "Mn3p"};

struct XpsSample {
    std::string data_tag;
    double life = 0.0; ///< cycles
    double temperature = 0.0;
    std::array<double, kXpsElements> fractions{}; ///< percent, in kXpsElementNames order
    int group = -1; ///< listed group, -1 when unknown

    double co() const noexcept { return fractions[1] + fractions[2]; }
    double pf() const noexcept { return fractions[3] + fractions[4]; }
    double co_ratio() const noexcept { return co() / (co() + pf()); }
};

/// A fixture row with the table's own derived columns, kept for reconciliation.
struct XpsFixtureRow {
    XpsSample sample;
    double listed_co = 0.0;
    double listed_pf = 0.0;
    double listed_ratio = 0.0;
};

struct XpsCenter {
    int group = 0;
    std::array<double, kXpsElements> center{};
};

/// The 56 embedded rows, in table order.
const std::vector<XpsFixtureRow>& xps_fixture_rows();
std::vector<XpsSample> xps_fixture();
/// Listed cluster centres of groups 0..7.
const std::vector<XpsCenter>& xps_fixture_centers();

/// Retained groups in pattern order with their names.
struct PatternName {
    int group;
    const char* name;
};
inline constexpr std::array<PatternName, 6> kFixturePatterns{
    {{2, "LT-SL"}, {1, "MT-MLL"}, {6, "MT-SL"}, {3, "MT-ML"}, {0, "HT-LL"}, {7, "HT-LRL"}}};

struct XpsIssue {
    std::string data_tag;
    std::string check;
    double expected = 0.0;
    double actual = 0.0;
};

struct XpsCheckOptions {
    double sum_tolerance = 0.5;
    double derived_tolerance = 1e-6;
    double ratio_tolerance = 5e-4;
};

/// Fraction sums, non-negativity, and (for fixture rows) the listed CO, PF
/// and CO/(CO+PF) columns against values recomputed from the fractions.
std::vector<XpsIssue> xps_check(const std::vector<XpsSample>& samples, const XpsCheckOptions& opt = {});
std::vector<XpsIssue> xps_check(const std::vector<XpsFixtureRow>& rows, const XpsCheckOptions& opt = {});

/// CSV with header data_tag,life,temperature,<8 elements>,group (group may be empty).
std::vector<XpsSample> read_xps_csv(std::istream& in, const std::string& source_name);
std::vector<XpsSample> read_xps_csv(const std::filesystem::path& path);
void write_xps_csv(std::ostream& out, const std::vector<XpsSample>& samples);

struct Pattern {
    int index = 0; ///< 1-based
    std::string name;
    int cluster = 0; ///< k-means cluster or listed group
    std::vector<std::size_t> members;
    std::array<double, kXpsElements> centroid{};
};

struct XpsPatterns {
    std::vector<Pattern> patterns;
    std::vector<int> pattern_of; ///< per sample, 0 when excluded
    std::vector<int> cluster_of; ///< per sample
    std::vector<std::size_t> excluded; ///< samples in singleton clusters
    std::vector<int> excluded_clusters;
    double inertia = 0.0;
};

struct XpsPatternOptions {
    std::size_t k = 8;
    std::uint64_t seed = 0;
    std::size_t restarts = 10;
    /// Centres used to name clusters; when empty, patterns follow descending size.
    std::vector<XpsCenter> reference;
};

/// K-means on the raw fractions; singleton clusters are excluded and the rest
/// become Pattern 1.. either by matching centroids to `reference` (minimum
/// total squared distance over one-to-one assignments) or by size.
XpsPatterns xps_patterns(const std::vector<XpsSample>& samples, const XpsPatternOptions& opt = {});

/// Patterns from the listed groups of the samples (fixture naming).
XpsPatterns xps_listed_patterns(const std::vector<XpsSample>& samples);

} // namespace batdeg::pipeline
