#include "iplan/solver.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace iplan {

namespace {

bool improves(double candidate, double current) {
    if (!std::isfinite(candidate)) return false;
    if (!std::isfinite(current)) return true;
    return candidate < current && (current - candidate) > 1e-13 * std::max(1.0, std::fabs(candidate));
}

bool ties(double a, double b) {
    if (a == b) return true;
    if (!std::isfinite(a) || !std::isfinite(b)) return false;
    return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

}  // namespace

SspModel to_ssp(const StochasticMdp& mdp, CostModel costs) {
    SspModel model;
    model.goal.resize(mdp.size());
    model.actions.resize(mdp.size());
    for (NodeId s = 0; s < mdp.size(); ++s) {
        const auto& node = mdp.node(s);
        model.goal[s] = node.is_goal;
        for (const auto& edge : node.edges) {
            SspAction action;
            action.id = edge.action;
            action.cost = costs == CostModel::time_only ? edge.mean_duration
                                                        : action_cost(edge.mean_duration, mdp.penalty(), edge.n);
            for (const auto& o : edge.outcomes) action.outcomes.emplace_back(o.target, o.probability);
            model.actions[s].push_back(std::move(action));
        }
    }
    return model;
}

std::optional<ActionId> Solution::policy_action(const SspModel& model, NodeId s) const {
    if (!policy.at(s)) return std::nullopt;
    return model.actions.at(s).at(*policy[s]).id;
}

double ips_priority(double candidate_q, double current_value) {
    if (!std::isfinite(current_value) || candidate_q == 0.0) return -kInfinity;
    return (candidate_q - current_value) / candidate_q;
}

IpsSolver::IpsSolver(const SspModel& model, SolveOptions options)
    : model_(model),
      options_(options),
      predecessors_(model.size()),
      value_(model.size(), kInfinity),
      q_(model.size()),
      policy_(model.size()),
      expanded_(model.size(), false),
      key_(model.size()) {
    std::size_t outcome_count = 0;
    for (NodeId s = 0; s < model.size(); ++s) {
        q_[s].assign(model.actions[s].size(), kInfinity);
        if (model.goal[s]) continue;
        for (std::size_t a = 0; a < model.actions[s].size(); ++a) {
            for (const auto& [succ, p] : model.actions[s][a].outcomes) {
                if (p > 0.0) predecessors_.at(succ).emplace_back(s, a);
                ++outcome_count;
            }
        }
    }
    max_pops_ = options_.max_pops > 0 ? options_.max_pops : 64 * (model.size() + outcome_count) + 1024;
    for (NodeId s = 0; s < model.size(); ++s) {
        if (!model.goal[s]) continue;
        value_[s] = 0.0;
        push_or_decrease(s, -kInfinity);
    }
}

bool IpsSolver::queued(NodeId s) const { return key_.at(s).has_value(); }

std::optional<double> IpsSolver::queued_priority(NodeId s) const {
    if (!key_.at(s)) return std::nullopt;
    return std::get<0>(*key_[s]);
}

void IpsSolver::push_or_decrease(NodeId s, double priority) {
    if (priority > stats_.max_enqueued_priority) stats_.max_enqueued_priority = priority;
    double pri = priority;
    if (key_[s]) {
        pri = std::min(pri, std::get<0>(*key_[s]));
        queue_.erase(*key_[s]);
    }
    Key key{pri, value_[s], s};
    queue_.insert(key);
    key_[s] = key;
}

double IpsSolver::backup_q(NodeId s, std::size_t action) const {
    const auto& a = model_.actions[s][action];
    double total = a.cost;
    for (const auto& [succ, p] : a.outcomes) {
        if (p == 0.0) continue;
        if (!std::isfinite(value_[succ])) return kInfinity;
        total += p * value_[succ];
    }
    return total;
}

bool IpsSolver::step() {
    if (queue_.empty()) return false;
    if (stats_.pops >= max_pops_) {
        stats_.converged = false;
        return false;
    }
    const Key top = *queue_.begin();
    queue_.erase(queue_.begin());
    const NodeId x = std::get<2>(top);
    key_[x].reset();
    expanded_[x] = true;
    ++stats_.pops;
    if (options_.record_pops) stats_.popped_values.push_back(value_[x]);
    expand(x);
    return true;
}

void IpsSolver::expand(NodeId x) {
    for (const auto& [y, b] : predecessors_[x]) {
        if (model_.goal[y]) continue;
        const double q = backup_q(y, b);
        q_[y][b] = q;
        ++stats_.q_updates;
        // Closed test: only a strictly better action reopens y.
        if (!improves(q, value_[y])) continue;
        const double previous = value_[y];
        value_[y] = q;
        policy_[y] = b;
        push_or_decrease(y, ips_priority(q, previous));
    }
}

std::vector<bool> proper_states(const SspModel& model) {
    const std::size_t n = model.size();
    std::vector<bool> keep(n, true);
    while (true) {
        // Backward reachability from the goals using actions that stay inside `keep`.
        std::vector<bool> reach(n, false);
        std::vector<std::vector<NodeId>> reverse(n);
        for (NodeId s = 0; s < n; ++s) {
            if (!keep[s] || model.goal[s]) continue;
            for (const auto& a : model.actions[s]) {
                bool safe = !a.outcomes.empty();
                for (const auto& [succ, p] : a.outcomes) safe = safe && (p == 0.0 || keep[succ]);
                if (!safe) continue;
                for (const auto& [succ, p] : a.outcomes) {
                    if (p > 0.0) reverse[succ].push_back(s);
                }
            }
        }
        std::queue<NodeId> frontier;
        for (NodeId s = 0; s < n; ++s) {
            if (keep[s] && model.goal[s]) {
                reach[s] = true;
                frontier.push(s);
            }
        }
        while (!frontier.empty()) {
            const NodeId t = frontier.front();
            frontier.pop();
            for (NodeId s : reverse[t]) {
                if (!reach[s]) {
                    reach[s] = true;
                    frontier.push(s);
                }
            }
        }
        if (reach == keep) return keep;
        keep = std::move(reach);
    }
}

void IpsSolver::bellman_fallback(const std::vector<bool>& proper) {
    const std::size_t n = model_.size();
    auto safe_q = [&](NodeId s, std::size_t a) {
        const auto& act = model_.actions[s][a];
        double total = act.cost;
        for (const auto& [succ, p] : act.outcomes) {
            if (p == 0.0) continue;
            if (!proper[succ]) return kInfinity;
            total += p * value_[succ];
        }
        return total;
    };
    auto best = [&](NodeId s) {
        double m = kInfinity;
        for (std::size_t a = 0; a < model_.actions[s].size(); ++a) m = std::min(m, safe_q(s, a));
        return m;
    };
    auto tolerance = [&](double v) { return options_.residual_tolerance * std::max(1.0, std::fabs(v)); };

    // Stalled proper states start from zero; value iteration converges from
    // any finite start once improper states are excluded.
    for (NodeId s = 0; s < n; ++s) {
        if (proper[s] && !std::isfinite(value_[s])) value_[s] = 0.0;
    }

    using Entry = std::pair<double, NodeId>;
    std::priority_queue<Entry> heap;
    for (NodeId s = 0; s < n; ++s) {
        if (!proper[s] || model_.goal[s]) continue;
        const double r = std::fabs(best(s) - value_[s]);
        if (r > tolerance(value_[s])) heap.emplace(r, s);
    }
    if (!heap.empty()) stats_.used_fallback = true;

    const std::size_t cap = 200 * (n + 1) * (n + 1) + 100000;
    while (!heap.empty() && stats_.fallback_backups < cap) {
        const NodeId s = heap.top().second;
        heap.pop();
        const double target = best(s);
        if (std::fabs(target - value_[s]) <= tolerance(value_[s])) continue;
        value_[s] = target;
        ++stats_.fallback_backups;
        for (const auto& [y, b] : predecessors_[s]) {
            if (!proper[y] || model_.goal[y]) continue;
            const double r = std::fabs(best(y) - value_[y]);
            if (r > tolerance(value_[y])) heap.emplace(r, y);
        }
    }

    // Full Gauss-Seidel sweeps confirm (or finish) convergence.
    for (std::size_t sweep = 0; sweep < 1'000'000; ++sweep) {
        double worst = 0.0;
        for (NodeId s = 0; s < n; ++s) {
            if (!proper[s] || model_.goal[s]) continue;
            const double target = best(s);
            const double r = std::fabs(target - value_[s]);
            if (r > tolerance(target)) worst = std::max(worst, r / tolerance(target));
            if (target != value_[s]) {
                value_[s] = target;
                ++stats_.fallback_backups;
            }
        }
        if (worst <= 1.0) return;
        stats_.used_fallback = true;
    }
    stats_.converged = false;
}

Solution IpsSolver::finish() {
    while (step()) {
    }
    const std::size_t n = model_.size();
    const auto proper = proper_states(model_);

    // Stalled states (proper but still at +inf) and sub-threshold residuals
    // are settled here; on a fully swept problem this is one checking sweep.
    stats_.converged = true;
    bellman_fallback(proper);

    Solution out;
    out.value.assign(n, kInfinity);
    out.q.resize(n);
    out.policy.resize(n);
    out.closed.assign(n, false);
    for (NodeId s = 0; s < n; ++s) {
        const auto& actions = model_.actions[s];
        out.q[s].assign(actions.size(), kInfinity);
        if (model_.goal[s]) {
            out.value[s] = 0.0;
            out.closed[s] = true;
            continue;
        }
        if (!proper[s]) {
            out.unreachable.push_back(s);
            continue;
        }
        std::optional<std::size_t> chosen;
        for (std::size_t a = 0; a < actions.size(); ++a) {
            double total = actions[a].cost;
            for (const auto& [succ, p] : actions[a].outcomes) {
                if (p == 0.0) continue;
                if (!proper[succ]) {
                    total = kInfinity;
                    break;
                }
                total += p * (model_.goal[succ] ? 0.0 : value_[succ]);
            }
            out.q[s][a] = total;
            if (!std::isfinite(total)) continue;
            if (!chosen) {
                chosen = a;
                continue;
            }
            const double incumbent = out.q[s][*chosen];
            if (ties(total, incumbent) ? actions[a].id < actions[*chosen].id : total < incumbent) chosen = a;
        }
        out.policy[s] = chosen;
        out.value[s] = chosen ? out.q[s][*chosen] : kInfinity;
        out.closed[s] = chosen.has_value();
        if (!chosen) out.unreachable.push_back(s);
    }
    out.stats = std::move(stats_);
    return out;
}

Solution solve(const SspModel& model, SolveOptions options) {
    IpsSolver solver(model, options);
    return solver.finish();
}

}  // namespace iplan
