#include "batdeg/features/plan.hpp"

#include <unordered_map>

#include "batdeg/error.hpp"

namespace batdeg::features {

namespace {

std::size_t descriptor_key(const DescriptorNode& d) {
    return (d.signal.index() * 64 + static_cast<std::size_t>(d.segment.index)) * kAggKinds +
           static_cast<std::size_t>(d.inner);
}

std::size_t group_key(const GroupNode& g) {
    return (g.descriptor * 1024 + static_cast<std::size_t>(g.group)) * kAggKinds + static_cast<std::size_t>(g.outer);
}

} // namespace

EvalPlan compile(std::span<const FeatureExpr> exprs) {
    if (exprs.empty()) {
        throw ValidationError("cannot compile an empty feature list");
    }
    EvalPlan plan;
    plan.groups = exprs.front().selector.groups;
    plan.segments = exprs.front().segment.total;
    if (plan.segments > 63 || plan.groups > 1023) {
        throw ValidationError("plan supports at most 63 segments and 1023 groups");
    }
    std::unordered_map<std::size_t, std::size_t> desc_index;
    std::unordered_map<std::size_t, std::size_t> group_index;
    plan.features.reserve(exprs.size());
    plan.exprs.assign(exprs.begin(), exprs.end());

    auto group_node = [&](std::size_t desc, int group, AggKind outer) {
        const GroupNode g{desc, group, outer};
        const auto [it, added] = group_index.try_emplace(group_key(g), plan.group_nodes.size());
        if (added) {
            plan.group_nodes.push_back(g);
        }
        return it->second;
    };

    for (std::size_t k = 0; k < exprs.size(); ++k) {
        const auto& e = exprs[k];
        validate(e);
        if (e.selector.groups != plan.groups || e.segment.total != plan.segments) {
            throw ValidationError("feature " + std::to_string(k) + " (" + render(e) +
                                  ") mixes configurations: expected groups " + std::to_string(plan.groups) +
                                  " and segments " + std::to_string(plan.segments));
        }
        const DescriptorNode d{e.signal, e.segment, e.inner};
        const auto [it, added] = desc_index.try_emplace(descriptor_key(d), plan.descriptors.size());
        if (added) {
            plan.descriptors.push_back(d);
        }
        FeatureNode f;
        f.lhs = group_node(it->second, e.selector.group, e.outer);
        if (e.selector.is_diff()) {
            f.rhs = group_node(it->second, e.selector.minus, e.outer);
        }
        f.activator = e.activator;
        plan.features.push_back(f);
    }
    return plan;
}

} // namespace batdeg::features
