#include "batdeg/features/expr.hpp"

#include <array>
#include <cctype>
#include <limits>
#include <optional>

#include "batdeg/error.hpp"

namespace batdeg::features {

std::string_view to_string(Activator a) noexcept {
    return a == Activator::identity ? "identity" : "abs";
}

std::string_view to_string(AggKind a) noexcept {
    switch (a) {
    case AggKind::nanmin:
        return "nanmin";
    case AggKind::nanmax:
        return "nanmax";
    case AggKind::nanmean:
        return "nanmean";
    case AggKind::nanvar:
        return "nanvar";
    case AggKind::nanskew:
        return "nanskew";
    case AggKind::nankurtosis:
        return "nankurtosis";
    }
    return "?";
}

std::string_view to_string(SignalKind s) noexcept {
    constexpr std::array<std::string_view, kSignalKinds> names{"VQ", "QV", "dVdQ", "I", "V", "E", "W"};
    return names[static_cast<std::size_t>(s)];
}

char direction_suffix(Direction d) noexcept { return d == Direction::charge ? 'c' : 'd'; }

std::string to_string(Signal s) {
    std::string out(to_string(s.kind));
    out += '_';
    out += direction_suffix(s.dir);
    return out;
}

void validate(const FeatureExpr& e) {
    const auto& sel = e.selector;
    if (e.segment.total < 1 || e.segment.index < 1 || e.segment.index > e.segment.total) {
        throw ValidationError("segment index out of range: " + std::to_string(e.segment.index) + "/" +
                              std::to_string(e.segment.total));
    }
    if (sel.groups < 1 || sel.group < 1 || sel.group > sel.groups) {
        throw ValidationError("cycle group out of range: " + std::to_string(sel.group) + "/" +
                              std::to_string(sel.groups));
    }
    if (sel.is_diff() && (sel.minus < 1 || sel.minus > sel.groups || sel.group >= sel.minus)) {
        throw ValidationError("cycle-group difference must satisfy a < c <= b, got " + std::to_string(sel.group) +
                              " - " + std::to_string(sel.minus) + " of " + std::to_string(sel.groups));
    }
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    FeatureExpr parse_feature() {
        FeatureExpr e;
        e.activator = parse_activator();
        expect('(');
        e.outer = parse_agg();
        expect('(');
        e.selector = parse_selector();
        expect(')');
        expect('[');
        e.inner = parse_agg();
        expect('(');
        e.signal = parse_signal();
        expect('(');
        const auto [a, d] = parse_fraction();
        e.segment = {a, d};
        expect(')');
        expect(')');
        expect(']');
        expect(')');
        skip_ws();
        if (pos_ != text_.size()) {
            throw ParseError("unexpected trailing text", pos_);
        }
        return e;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= text_.size()) {
            throw ParseError(std::string("expected '") + c + "' but reached end of input", pos_);
        }
        if (text_[pos_] != c) {
            throw ParseError(std::string("expected '") + c + "' but found '" + text_[pos_] + "'", pos_);
        }
        ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::pair<std::string_view, std::size_t> identifier() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        if (pos_ == start) {
            throw ParseError("expected identifier", start);
        }
        return {text_.substr(start, pos_ - start), start};
    }

    int integer() {
        skip_ws();
        const std::size_t start = pos_;
        long long value = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            value = value * 10 + (text_[pos_] - '0');
            if (value > std::numeric_limits<int>::max()) {
                throw ParseError("integer too large", start);
            }
            ++pos_;
        }
        if (pos_ == start) {
            throw ParseError("expected integer", start);
        }
        return static_cast<int>(value);
    }

    std::pair<int, int> parse_fraction() {
        const int a = integer();
        expect('/');
        const int b = integer();
        return {a, b};
    }

    Activator parse_activator() {
        const auto [name, at] = identifier();
        if (name == "identity") {
            return Activator::identity;
        }
        if (name == "abs") {
            return Activator::abs;
        }
        throw ParseError("unknown activator '" + std::string(name) + "'", at);
    }

    AggKind parse_agg() {
        const auto [name, at] = identifier();
        for (AggKind k : kAllAggs) {
            if (name == to_string(k)) {
                return k;
            }
        }
        throw ParseError("unknown aggregator '" + std::string(name) + "'", at);
    }

    Signal parse_signal() {
        const auto [name, at] = identifier();
        const auto us = name.rfind('_');
        if (us == std::string_view::npos || us + 2 != name.size()) {
            throw ParseError("signal must look like KIND_c or KIND_d, got '" + std::string(name) + "'", at);
        }
        Signal s;
        const char dir = name[us + 1];
        if (dir == 'c') {
            s.dir = Direction::charge;
        } else if (dir == 'd') {
            s.dir = Direction::discharge;
        } else {
            throw ParseError("unknown signal direction '" + std::string(1, dir) + "'", at + us + 1);
        }
        const auto kind = name.substr(0, us);
        for (SignalKind k : kAllSignals) {
            if (kind == to_string(k)) {
                s.kind = k;
                return s;
            }
        }
        throw ParseError("unknown signal '" + std::string(kind) + "'", at);
    }

    CycleSelector parse_selector() {
        cycle_keyword();
        expect('(');
        const auto [a, b] = parse_fraction();
        expect(')');
        if (!accept('-')) {
            return CycleSelector::single(a, b);
        }
        cycle_keyword();
        expect('(');
        const std::size_t at = pos_;
        const auto [c, d] = parse_fraction();
        expect(')');
        if (d != b) {
            throw ValidationError("cycle-group difference needs equal group counts, got " + std::to_string(b) +
                                  " and " + std::to_string(d) + " (byte " + std::to_string(at) + ")");
        }
        return CycleSelector::diff(a, c, b);
    }

    void cycle_keyword() {
        const auto [name, at] = identifier();
        if (name != "Cycle") {
            throw ParseError("expected 'Cycle', got '" + std::string(name) + "'", at);
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace

FeatureExpr parse(std::string_view text) {
    FeatureExpr e = Parser(text).parse_feature();
    validate(e);
    return e;
}

std::string render(const FeatureExpr& e) {
    std::string out;
    out.reserve(64);
    out += to_string(e.activator);
    out += '(';
    out += to_string(e.outer);
    out += "(Cycle(";
    out += std::to_string(e.selector.group);
    out += '/';
    out += std::to_string(e.selector.groups);
    out += ')';
    if (e.selector.is_diff()) {
        out += " - Cycle(";
        out += std::to_string(e.selector.minus);
        out += '/';
        out += std::to_string(e.selector.groups);
        out += ')';
    }
    out += ")[";
    out += to_string(e.inner);
    out += '(';
    out += to_string(e.signal);
    out += '(';
    out += std::to_string(e.segment.index);
    out += '/';
    out += std::to_string(e.segment.total);
    out += "))])";
    return out;
}

void SpaceConfig::validate() const {
    if (groups < 1 || segments < 1) {
        throw ValidationError("K and D must be at least 1");
    }
    if (early_cycles < groups) {
        throw ValidationError("early-cycle window N=" + std::to_string(early_cycles) +
                              " must be at least K=" + std::to_string(groups));
    }
    if (directions.empty() || signals.empty() || inner.empty() || outer.empty() || activators.empty()) {
        throw ValidationError("feature space needs at least one direction, signal, aggregator and activator");
    }
}

std::size_t space_size(const SpaceConfig& cfg) {
    const auto k = static_cast<std::size_t>(cfg.groups);
    const std::size_t selectors = k + k * (k - 1) / 2;
    return cfg.directions.size() * cfg.signals.size() * static_cast<std::size_t>(cfg.segments) *
           cfg.inner.size() * selectors * cfg.outer.size() * cfg.activators.size();
}

std::vector<FeatureExpr> enumerate_space(const SpaceConfig& cfg) {
    cfg.validate();
    std::vector<CycleSelector> selectors;
    for (int a = 1; a <= cfg.groups; ++a) {
        selectors.push_back(CycleSelector::single(a, cfg.groups));
    }
    for (int a = 1; a <= cfg.groups; ++a) {
        for (int c = a + 1; c <= cfg.groups; ++c) {
            selectors.push_back(CycleSelector::diff(a, c, cfg.groups));
        }
    }

    std::vector<FeatureExpr> out;
    out.reserve(space_size(cfg));
    for (Direction dir : cfg.directions) {
        for (SignalKind kind : cfg.signals) {
            for (int seg = 1; seg <= cfg.segments; ++seg) {
                for (AggKind inner : cfg.inner) {
                    for (const auto& sel : selectors) {
                        for (AggKind outer : cfg.outer) {
                            for (Activator act : cfg.activators) {
                                out.push_back({act, outer, sel, inner, {kind, dir}, {seg, cfg.segments}});
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::size_t FeatureExprHash::operator()(const FeatureExpr& e) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    mix(static_cast<std::uint64_t>(e.activator));
    mix(static_cast<std::uint64_t>(e.outer));
    mix(static_cast<std::uint64_t>(e.selector.group));
    mix(static_cast<std::uint64_t>(e.selector.groups));
    mix(static_cast<std::uint64_t>(e.selector.minus));
    mix(static_cast<std::uint64_t>(e.inner));
    mix(e.signal.index());
    mix(static_cast<std::uint64_t>(e.segment.index));
    mix(static_cast<std::uint64_t>(e.segment.total));
    return static_cast<std::size_t>(h);
}

} // namespace batdeg::features
