#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "batdeg/features/expr.hpp"

namespace batdeg::features {

/// Stage 1: one per distinct (signal, segment, inner aggregate).
struct DescriptorNode {
    Signal signal;
    Segment segment;
    AggKind inner = AggKind::nanmean;
    bool operator==(const DescriptorNode&) const = default;
};

/// Stage 2: outer aggregate of one descriptor over one cycle group.
struct GroupNode {
    std::size_t descriptor = 0;
    int group = 1; ///< 1-based group a of the plan's K
    AggKind outer = AggKind::nanmean;
    bool operator==(const GroupNode&) const = default;
};

/// Stage 3: activator(lhs) or activator(lhs - rhs).
struct FeatureNode {
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::size_t lhs = 0;
    std::size_t rhs = kNone;
    Activator activator = Activator::identity;
};

struct EvalPlan {
    int groups = 0;   ///< K shared by every selector
    int segments = 0; ///< D shared by every signal segment
    std::vector<DescriptorNode> descriptors;
    std::vector<GroupNode> group_nodes;
    std::vector<FeatureNode> features; ///< one per input expression, in input order
    std::vector<FeatureExpr> exprs;
};

/// Deduplicates stage-1 and stage-2 nodes. Throws ValidationError when the
/// expressions disagree on K or D, or when the list is empty.
EvalPlan compile(std::span<const FeatureExpr> exprs);

} // namespace batdeg::features
