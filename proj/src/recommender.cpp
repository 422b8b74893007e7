#include "iplan/recommender.hpp"

#include <cmath>

namespace iplan {

namespace {

std::string join_actions(const std::vector<ActionId>& actions) {
    std::string out;
    for (const auto& a : actions) {
        if (!out.empty()) out += ", ";
        out += a.name;
    }
    return out.empty() ? "none" : out;
}

// Most probable successor; unvisited nodes first, then the lowest id.
const Outcome& pick_successor(const Edge& edge, const std::vector<bool>& visited) {
    const Outcome* best = nullptr;
    for (const auto& o : edge.outcomes) {
        if (best == nullptr) {
            best = &o;
            continue;
        }
        const bool fresh = !visited[o.target];
        const bool best_fresh = !visited[best->target];
        if (fresh != best_fresh) {
            if (fresh) best = &o;
        } else if (o.count > best->count || (o.count == best->count && o.target < best->target)) {
            best = &o;
        }
    }
    return *best;
}

}  // namespace

std::vector<ActionId> Plan::actions() const {
    std::vector<ActionId> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.action);
    return out;
}

ActionUnavailable::ActionUnavailable(const ActionId& action, std::vector<ActionId> available)
    : std::runtime_error("action '" + action.name + "' is not available here; available: " + join_actions(available)),
      available_(std::move(available)) {}

Plan plan_from(const Model& model, NodeId start, const std::optional<ActionId>& forced) {
    if (!model.solved()) throw ModelNotSolved("model has not been solved");
    const auto& mdp = model.mdp();
    const auto& solution = model.solution();
    if (start >= mdp.size()) throw std::out_of_range("node id out of range");

    Plan plan;
    plan.match.node = start;
    plan.forecast = model.forecasts().at(start);

    const Node& first = mdp.node(start);
    if (forced) {
        const Edge* edge = mdp.edge(start, *forced);
        if (edge == nullptr || first.is_goal) {
            std::vector<ActionId> available;
            if (!first.is_goal) {
                for (const auto& e : first.edges) available.push_back(e.action);
            }
            throw ActionUnavailable(*forced, std::move(available));
        }
    } else if (!first.is_goal && !std::isfinite(solution.value[start])) {
        throw NoResolutionPath("no known resolution path from node " + std::to_string(start));
    }

    std::vector<bool> visited(mdp.size(), false);
    NodeId s = start;
    visited[s] = true;
    while (!mdp.node(s).is_goal) {
        if (plan.steps.size() >= mdp.size())
            throw NoResolutionPath("plan from node " + std::to_string(start) + " does not reach a goal within " +
                                   std::to_string(mdp.size()) + " steps");
        const Edge* edge = nullptr;
        if (forced && plan.steps.empty()) {
            edge = mdp.edge(s, *forced);
        } else {
            const auto action = solution.policy_action(model.ssp(), s);
            if (!action) throw NoResolutionPath("no known resolution path from node " + std::to_string(s));
            edge = mdp.edge(s, *action);
        }
        const Outcome& next = pick_successor(*edge, visited);
        plan.steps.push_back({edge->action, edge->mean_duration, mdp.node(next.target).key, next.target,
                              next.probability});
        plan.total_expected_min += edge->mean_duration;
        s = next.target;
        visited[s] = true;
    }
    return plan;
}

namespace {

Plan matched_plan(const Model& model, const EventState& query, const std::optional<ActionId>& forced) {
    if (!model.solved()) throw ModelNotSolved("model has not been solved");
    validate(query, model.schema());
    const auto encoded = encode(query, model.schema());
    const auto match = model.index().nearest(encoded, model.weights());
    Plan plan = plan_from(model, match.node, forced);
    plan.match.distance = match.distance;
    plan.match.low_confidence = match.distance > model.confidence_threshold();
    return plan;
}

}  // namespace

Plan recommend(const Model& model, const EventState& query) { return matched_plan(model, query, std::nullopt); }

Plan what_if(const Model& model, const EventState& query, const ActionId& forced) {
    return matched_plan(model, query, forced);
}

}  // namespace iplan
