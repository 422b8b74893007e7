#include "iplan/forecasts.hpp"

#include <algorithm>
#include <cmath>

namespace iplan {

double expected_resolution_time(const Solution& time_solution, NodeId node) {
    const double v = time_solution.value.at(node);
    if (!std::isfinite(v)) throw NoResolutionPath("no known resolution path from node " + std::to_string(node));
    return v;
}

std::vector<double> event_visit_probabilities(const StochasticMdp& mdp, const std::string& event_type,
                                              ForecastPolicy policy, const Solution* optimal, double tolerance) {
    const auto& event_def = mdp.schema().event_def();
    if (std::find(event_def.categories.begin(), event_def.categories.end(), event_type) == event_def.categories.end())
        throw std::invalid_argument("unknown event type '" + event_type + "'");
    if (policy == ForecastPolicy::optimal && optimal == nullptr)
        throw std::invalid_argument("optimal-policy forecast needs a solution");

    const std::size_t n = mdp.size();
    std::vector<double> p(n, 0.0);
    std::vector<bool> fixed(n, false);
    for (NodeId s = 0; s < n; ++s) {
        const auto& node = mdp.node(s);
        if (std::get<std::string>(node.state.values.at(event_def.name)) == event_type) {
            p[s] = 1.0;
            fixed[s] = true;
        } else if (node.is_goal || node.edges.empty()) {
            fixed[s] = true;
        }
    }

    // Action weights per node under the selected policy.
    std::vector<std::vector<double>> weight(n);
    for (NodeId s = 0; s < n; ++s) {
        if (fixed[s]) continue;
        const auto& edges = mdp.node(s).edges;
        weight[s].assign(edges.size(), 0.0);
        if (policy == ForecastPolicy::behavior) {
            double total = 0.0;
            for (const auto& e : edges) total += static_cast<double>(e.n);
            for (std::size_t a = 0; a < edges.size(); ++a) weight[s][a] = static_cast<double>(edges[a].n) / total;
        } else if (optimal->policy.at(s)) {
            weight[s][*optimal->policy[s]] = 1.0;
        }
    }

    // Gauss-Seidel from zero converges monotonically to the hitting probability.
    for (std::size_t sweep = 0; sweep < 1'000'000; ++sweep) {
        double residual = 0.0;
        for (NodeId s = 0; s < n; ++s) {
            if (fixed[s]) continue;
            const auto& edges = mdp.node(s).edges;
            double total = 0.0;
            for (std::size_t a = 0; a < edges.size(); ++a) {
                if (weight[s][a] == 0.0) continue;
                double inner = 0.0;
                for (const auto& o : edges[a].outcomes) inner += o.probability * p[o.target];
                total += weight[s][a] * inner;
            }
            residual = std::max(residual, std::fabs(total - p[s]));
            p[s] = total;
        }
        if (residual <= tolerance) break;
    }
    for (auto& v : p) v = std::clamp(v, 0.0, 1.0);
    return p;
}

double next_event_probability(const StochasticMdp& mdp, NodeId node, const std::string& event_type,
                              ForecastPolicy policy, const Solution* optimal) {
    if (node >= mdp.size()) throw std::out_of_range("node id out of range");
    return event_visit_probabilities(mdp, event_type, policy, optimal).at(node);
}

ForecastTable::ForecastTable(const StochasticMdp& mdp, const Solution& time_solution, ForecastPolicy policy,
                             const Solution* optimal)
    : resolution_(time_solution.value) {
    for (const auto& type : mdp.schema().event_def().categories)
        visits_[type] = event_visit_probabilities(mdp, type, policy, optimal);
}

Forecast ForecastTable::at(NodeId node) const {
    Forecast f;
    f.expected_resolution_min = resolution_.at(node);
    if (!std::isfinite(f.expected_resolution_min))
        throw NoResolutionPath("no known resolution path from node " + std::to_string(node));
    for (const auto& [type, probs] : visits_) f.next_event_probs[type] = probs.at(node);
    return f;
}

}  // namespace iplan
