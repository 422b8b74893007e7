#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iplan/model.hpp"

namespace iplan {

struct PlanStep {
    ActionId action;
    double expected_duration_min = 0.0;  // T(s, a)
    std::string state_key_after;
    NodeId node_after = 0;
    double branch_probability = 1.0;  // P(successor shown | s, a)
};

struct MatchInfo {
    NodeId node = 0;
    double distance = 0.0;
    bool low_confidence = false;
};

struct Plan {
    std::vector<PlanStep> steps;
    double total_expected_min = 0.0;  // sum of the step durations along the shown path
    MatchInfo match;
    Forecast forecast;

    std::vector<ActionId> actions() const;
};

class ActionUnavailable : public std::runtime_error {
public:
    ActionUnavailable(const ActionId& action, std::vector<ActionId> available);
    const std::vector<ActionId>& available() const noexcept { return available_; }

private:
    std::vector<ActionId> available_;
};

class ModelNotSolved : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Nearest node, then the most probable trajectory under the policy.
/// Throws NoResolutionPath when the matched node cannot reach a goal.
Plan recommend(const Model& model, const EventState& query);

/// Like recommend, but the first step is `forced`; throws ActionUnavailable
/// when the matched node has no such edge.
Plan what_if(const Model& model, const EventState& query, const ActionId& forced);

/// Plan from an explicit node, optionally forcing the first action.
Plan plan_from(const Model& model, NodeId start, const std::optional<ActionId>& forced = std::nullopt);

}  // namespace iplan
