#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "iplan/mdp.hpp"

namespace iplan {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SspAction {
    ActionId id;
    double cost = 0.0;
    std::vector<std::pair<NodeId, double>> outcomes;  // (successor, probability)
};

/// Undiscounted stochastic shortest-path problem: reach any goal state at
/// minimum expected cost. Actions of goal states are ignored.
struct SspModel {
    std::vector<bool> goal;
    std::vector<std::vector<SspAction>> actions;

    std::size_t size() const noexcept { return goal.size(); }
};

enum class CostModel {
    frequency_penalized,  // T(s, a) + penalty / n(s, a)
    time_only,            // T(s, a)
};

SspModel to_ssp(const StochasticMdp& mdp, CostModel costs);

struct SolveStats {
    std::size_t pops = 0;
    std::size_t q_updates = 0;
    std::size_t fallback_backups = 0;
    bool used_fallback = false;
    bool converged = true;
    double max_enqueued_priority = -kInfinity;
    std::vector<double> popped_values;  // V(x) at each pop, in order
};

struct Solution {
    std::vector<double> value;                          // V(s); +inf when no proper path exists
    std::vector<std::vector<double>> q;                 // aligned with SspModel::actions
    std::vector<std::optional<std::size_t>> policy;     // index into SspModel::actions[s]
    std::vector<bool> closed;
    std::vector<NodeId> unreachable;
    SolveStats stats;

    /// Name of π(s) for the model the solution was computed on.
    std::optional<ActionId> policy_action(const SspModel& model, NodeId s) const;
};

/// Queue key for a state whose best action estimate moved from `current_value`
/// to `candidate_q`: (Q - V) / Q, i.e. the value change scaled by the 1/Q
/// priority bound. Never positive; -inf on first discovery or zero cost.
double ips_priority(double candidate_q, double current_value);

struct SolveOptions {
    double residual_tolerance = 1e-12;  // relative, used by the Bellman fallback
    std::size_t max_pops = 0;           // 0 = automatic cap
    bool record_pops = false;
};

/// Improved Prioritized Sweeping: backward search from the goal states with
/// a priority queue ordered by ips_priority, then (ties) by the current value
/// and the node id. When every action of a state has an undiscovered
/// successor (stochastic cycles) the sweep stalls; `finish` then completes
/// the solution with prioritized Bellman backups over the states that reach
/// a goal with probability one.
class IpsSolver {
public:
    explicit IpsSolver(const SspModel& model, SolveOptions options = {});

    /// Pops the lowest-priority state and expands its predecessors.
    /// Returns false once the queue is empty.
    bool step();

    bool queued(NodeId s) const;
    std::optional<double> queued_priority(NodeId s) const;
    double value(NodeId s) const { return value_.at(s); }
    double q(NodeId s, std::size_t action) const { return q_.at(s).at(action); }
    bool expanded(NodeId s) const { return expanded_.at(s); }
    const SolveStats& stats() const noexcept { return stats_; }

    Solution finish();

private:
    using Key = std::tuple<double, double, NodeId>;

    void expand(NodeId x);
    double backup_q(NodeId s, std::size_t action) const;
    void push_or_decrease(NodeId s, double priority);
    void bellman_fallback(const std::vector<bool>& proper);

    const SspModel& model_;
    SolveOptions options_;
    std::vector<std::vector<std::pair<NodeId, std::size_t>>> predecessors_;
    std::vector<double> value_;
    std::vector<std::vector<double>> q_;
    std::vector<std::optional<std::size_t>> policy_;
    std::vector<bool> expanded_;
    std::vector<std::optional<Key>> key_;
    std::set<Key> queue_;
    SolveStats stats_;
    std::size_t max_pops_ = 0;
};

Solution solve(const SspModel& model, SolveOptions options = {});

/// States that can reach a goal with probability one under some policy.
std::vector<bool> proper_states(const SspModel& model);

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OracleResult {
    std::vector<double> value;
    std::vector<std::vector<double>> q;
    std::size_t sweeps = 0;
    double residual = 0.0;
};

/// Gauss-Seidel value iteration, independent of IpsSolver; used to verify it.
/// Throws OracleError when the residual does not fall below `tolerance`
/// within `max_sweeps` sweeps.
OracleResult value_iteration_oracle(const SspModel& model, double tolerance = 1e-12,
                                    std::size_t max_sweeps = 1'000'000);

}  // namespace iplan
