#include <algorithm>
#include <cmath>

#include "iplan/solver.hpp"

namespace iplan {

namespace {

// Almost-sure reachability, computed without sharing code with the solver:
// repeatedly drop states that cannot reach a goal through actions whose
// outcomes all remain in the candidate set.
std::vector<bool> almost_sure_goal_states(const SspModel& model) {
    const std::size_t n = model.size();
    std::vector<bool> candidate(n, true);
    bool changed = true;
    while (changed) {
        std::vector<bool> reaches(n, false);
        for (NodeId s = 0; s < n; ++s) reaches[s] = candidate[s] && model.goal[s];
        bool grew = true;
        while (grew) {
            grew = false;
            for (NodeId s = 0; s < n; ++s) {
                if (reaches[s] || !candidate[s]) continue;
                for (const auto& a : model.actions[s]) {
                    bool inside = !a.outcomes.empty();
                    bool hits = false;
                    for (const auto& [t, p] : a.outcomes) {
                        if (p <= 0.0) continue;
                        inside = inside && candidate[t];
                        hits = hits || reaches[t];
                    }
                    if (inside && hits) {
                        reaches[s] = true;
                        grew = true;
                        break;
                    }
                }
            }
        }
        changed = reaches != candidate;
        candidate = std::move(reaches);
    }
    return candidate;
}

}  // namespace

OracleResult value_iteration_oracle(const SspModel& model, double tolerance, std::size_t max_sweeps) {
    const std::size_t n = model.size();
    const auto ok = almost_sure_goal_states(model);
    OracleResult out;
    out.value.assign(n, 0.0);
    for (NodeId s = 0; s < n; ++s) {
        if (!ok[s]) out.value[s] = kInfinity;
    }

    auto action_value = [&](const SspAction& a) {
        double total = a.cost;
        for (const auto& [t, p] : a.outcomes) {
            if (p <= 0.0) continue;
            if (!ok[t]) return kInfinity;
            total += p * out.value[t];
        }
        return total;
    };

    for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
        double residual = 0.0;
        for (NodeId s = 0; s < n; ++s) {
            if (!ok[s] || model.goal[s]) continue;
            double best = kInfinity;
            for (const auto& a : model.actions[s]) best = std::min(best, action_value(a));
            residual = std::max(residual, std::fabs(best - out.value[s]) / std::max(1.0, std::fabs(best)));
            out.value[s] = best;
        }
        out.residual = residual;
        if (residual <= tolerance) break;
    }
    if (out.residual > tolerance)
        throw OracleError("value iteration did not reach residual " + std::to_string(tolerance) +
                          " (zero-cost cycle?)");

    out.q.resize(n);
    for (NodeId s = 0; s < n; ++s) {
        out.q[s].assign(model.actions[s].size(), kInfinity);
        if (model.goal[s] || !ok[s]) continue;
        for (std::size_t i = 0; i < model.actions[s].size(); ++i) out.q[s][i] = action_value(model.actions[s][i]);
    }
    return out;
}

}  // namespace iplan
