#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "iplan/solver.hpp"

namespace iplan {

struct Forecast {
    double expected_resolution_min = 0.0;
    std::map<std::string, double> next_event_probs;  // event type -> probability
};

class NoResolutionPath : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Which action distribution drives the next-event forecast.
enum class ForecastPolicy {
    behavior,  // historical frequencies, P(a | s) proportional to n(s, a)
    optimal,   // the solver's policy
};

/// V under the time-only cost model; `time_solution` must come from
/// solve(to_ssp(mdp, CostModel::time_only)).
double expected_resolution_time(const Solution& time_solution, NodeId node);

/// Probability, for every node, that the induced Markov chain visits a state
/// whose event feature equals `event_type` before it is absorbed in a goal.
/// `optimal` is required for ForecastPolicy::optimal.
std::vector<double> event_visit_probabilities(const StochasticMdp& mdp, const std::string& event_type,
                                              ForecastPolicy policy = ForecastPolicy::behavior,
                                              const Solution* optimal = nullptr, double tolerance = 1e-9);

double next_event_probability(const StochasticMdp& mdp, NodeId node, const std::string& event_type,
                              ForecastPolicy policy = ForecastPolicy::behavior, const Solution* optimal = nullptr);

/// Both forecasts for every node, precomputed from an immutable model.
class ForecastTable {
public:
    ForecastTable() = default;
    ForecastTable(const StochasticMdp& mdp, const Solution& time_solution,
                  ForecastPolicy policy = ForecastPolicy::behavior, const Solution* optimal = nullptr);

    /// Throws NoResolutionPath when the node cannot reach a goal.
    Forecast at(NodeId node) const;

private:
    std::vector<double> resolution_;
    std::map<std::string, std::vector<double>> visits_;
};

}  // namespace iplan
