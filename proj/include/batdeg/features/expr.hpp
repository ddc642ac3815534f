#pragma once

// Feature-expression grammar.
//
//   ACT( OUT( SEL )[ INN( SIG(a/D) ) ] )
//   SEL := Cycle(a/b) | Cycle(a/b) - Cycle(c/b)
//
// e.g. identity(nanmax(Cycle(6/7))[nanvar(VQ_d(1/4))])
//
// INN aggregates segment a of D of one resampled signal within a cycle, OUT
// aggregates those per-cycle values over cycle group a of b, and ACT is applied
// last. A two-group selector subtracts the OUT aggregate of group c from that
// of group a.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace batdeg::features {

enum class Activator : std::uint8_t { identity, abs };
enum class AggKind : std::uint8_t { nanmin, nanmax, nanmean, nanvar, nanskew, nankurtosis };
enum class SignalKind : std::uint8_t { VQ, QV, dVdQ, I, V, E, W };
enum class Direction : std::uint8_t { charge, discharge };

inline constexpr std::size_t kSignalKinds = 7;
inline constexpr std::size_t kAggKinds = 6;

inline constexpr SignalKind kAllSignals[] = {SignalKind::VQ, SignalKind::QV, SignalKind::dVdQ, SignalKind::I,
                                             SignalKind::V,  SignalKind::E,  SignalKind::W};
inline constexpr AggKind kAllAggs[] = {AggKind::nanmin, AggKind::nanmax,  AggKind::nanmean,
                                       AggKind::nanvar, AggKind::nanskew, AggKind::nankurtosis};

std::string_view to_string(Activator a) noexcept;
std::string_view to_string(AggKind a) noexcept;
std::string_view to_string(SignalKind s) noexcept;
char direction_suffix(Direction d) noexcept;

struct Signal {
    SignalKind kind = SignalKind::VQ;
    Direction dir = Direction::discharge;

    /// Dense index in [0, 14): charge signals first.
    std::size_t index() const noexcept {
        return static_cast<std::size_t>(dir) * kSignalKinds + static_cast<std::size_t>(kind);
    }
    bool operator==(const Signal&) const = default;
};

std::string to_string(Signal s);

struct Segment {
    int index = 1; ///< 1-based
    int total = 1;
    bool operator==(const Segment&) const = default;
};

/// Cycle(group/groups), or Cycle(group/groups) - Cycle(minus/groups) when minus != 0.
struct CycleSelector {
    int group = 1;
    int groups = 1;
    int minus = 0;

    static CycleSelector single(int a, int b) { return {a, b, 0}; }
    static CycleSelector diff(int a, int c, int b) { return {a, b, c}; }
    bool is_diff() const noexcept { return minus != 0; }
    bool operator==(const CycleSelector&) const = default;
};

struct FeatureExpr {
    Activator activator = Activator::identity;
    AggKind outer = AggKind::nanmean;
    CycleSelector selector;
    AggKind inner = AggKind::nanmean;
    Signal signal;
    Segment segment;

    bool operator==(const FeatureExpr&) const = default;
};

/// Throws ValidationError when an index is out of range or a two-group
/// selector is not of the form Cycle(a/b) - Cycle(c/b) with a < c.
void validate(const FeatureExpr& e);

/// Parses one feature name. Whitespace between tokens is ignored. Throws
/// ParseError (with byte offset) on malformed text and ValidationError on
/// out-of-range indices.
FeatureExpr parse(std::string_view text);

/// Canonical spelling; parse(render(e)) == e for every valid e.
std::string render(const FeatureExpr& e);

struct SpaceConfig {
    int groups = 7;      ///< K
    int segments = 4;    ///< D
    int early_cycles = 50; ///< N
    std::vector<Direction> directions{Direction::charge, Direction::discharge};
    std::vector<SignalKind> signals{std::begin(kAllSignals), std::end(kAllSignals)};
    std::vector<AggKind> inner{std::begin(kAllAggs), std::end(kAllAggs)};
    std::vector<AggKind> outer{std::begin(kAllAggs), std::end(kAllAggs)};
    std::vector<Activator> activators{Activator::identity, Activator::abs};

    void validate() const;
};

/// |dirs| * |signals| * D * |inner| * (K + K(K-1)/2) * |outer| * |activators|
std::size_t space_size(const SpaceConfig& cfg);

/// Fixed order: direction, signal, segment, inner aggregate, selector (single
/// groups ascending, then pairs (a, c) lexicographic), outer aggregate,
/// activator. Column order of feature matrices follows this order.
std::vector<FeatureExpr> enumerate_space(const SpaceConfig& cfg);

struct FeatureExprHash {
    std::size_t operator()(const FeatureExpr& e) const noexcept;
};

} // namespace batdeg::features
