#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "iplan/corpus.hpp"

namespace iplan {

using NodeId = std::size_t;

struct Transition {
    EventState state;
    ActionId action;
    double duration_min = 0.0;
    EventState next_state;
};

/// A report seen as a deterministic MDP: one transition per step, the last
/// one entering the resolved (goal) state.
struct Chain {
    std::string report_id;
    std::vector<Transition> transitions;
    EventState goal;
};

Chain build_chain(const Report& report);

struct Outcome {
    NodeId target = 0;
    std::uint64_t count = 0;
    double probability = 0.0;  // count / n
};

struct Edge {
    ActionId action;
    std::uint64_t n = 0;             // executions of the action in this state
    double total_duration = 0.0;     // sum of observed durations
    double mean_duration = 0.0;      // T(s, a)
    std::vector<Outcome> outcomes;   // sorted by target
};

struct Node {
    EventState state;
    std::string key;
    bool is_goal = false;
    std::vector<Edge> edges;  // sorted by action
};

class BuildError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoSuchAction : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Historical reports merged on identical event descriptions.
///
/// Node ids follow the lexicographic order of the canonical state keys, so
/// the graph does not depend on the order in which reports were merged.
class StochasticMdp {
public:
    StochasticMdp() = default;
    /// Takes fully populated nodes (edges carrying n, total_duration and
    /// outcome counts); derives means, probabilities and the penalty.
    StochasticMdp(FeatureSchema schema, std::vector<Node> nodes, std::size_t n_reports);

    const FeatureSchema& schema() const noexcept { return schema_; }
    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const Node& node(NodeId id) const { return nodes_.at(id); }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t edge_count() const noexcept;
    std::size_t report_count() const noexcept { return n_reports_; }
    std::uint64_t execution_count() const noexcept { return executions_; }

    /// Mean duration over every observed action execution.
    double penalty() const noexcept { return penalty_; }

    std::optional<NodeId> find(const std::string& key) const;
    const Edge* edge(NodeId id, const ActionId& action) const;
    /// T(s, a) + penalty / n(s, a).
    double cost(NodeId id, const ActionId& action) const;

private:
    FeatureSchema schema_;
    std::vector<Node> nodes_;
    std::unordered_map<std::string, NodeId> index_;
    std::size_t n_reports_ = 0;
    std::uint64_t executions_ = 0;
    double penalty_ = 0.0;
};

StochasticMdp merge(const std::vector<Chain>& chains, const FeatureSchema& schema);

/// build_chain + merge over the given reports.
StochasticMdp build_mdp(const std::vector<const Report*>& reports, const FeatureSchema& schema);

/// The frequency-penalised action cost.
double action_cost(double mean_duration, double penalty, std::uint64_t n);

}  // namespace iplan
