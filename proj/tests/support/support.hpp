#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "iplan/solver.hpp"
#include "iplan/synthetic.hpp"

namespace iplan::testing {

struct RandomSspSpec {
    std::size_t max_states = 20;
    std::size_t max_actions = 4;
    std::size_t max_outcomes = 3;
    double max_cost = 10.0;
    bool deterministic = false;
    bool integer_costs = false;
};

/// Random SSP with one or two goals; action ids "a0".."a3" sorted by index.
/// Some states may have no proper policy.
SspModel random_ssp(std::uint64_t seed, const RandomSspSpec& spec = {});

/// Reverse Dijkstra from the goals over a deterministic SSP.
std::vector<double> dijkstra_to_goal(const SspModel& model);

/// Tiny schema for hand-built fixtures: kind{a, b, c, jam}, stage{s0..s3, done}.
FeatureSchema fixture_schema();
EventState fixture_state(const std::string& kind, const std::string& stage);

struct FixtureStep {
    std::string action;
    double duration;
    std::string kind;
    std::string stage;
};

/// Report with initial state (kind, stage) and the given steps; the last step resolves.
Report fixture_report(const std::string& id, const std::string& kind, const std::string& stage,
                      const std::vector<FixtureStep>& steps);

/// Seven reports over ten fixture states with branching, a cycle and two
/// routes into "jam" states.
std::vector<Report> ten_state_reports();

/// Fraction of rollouts from `start` under the behaviour policy that visit
/// an `event_type` state before a goal.
double monte_carlo_visit(const StochasticMdp& mdp, NodeId start, const std::string& event_type,
                         std::size_t rollouts, std::uint64_t seed);

std::vector<const Report*> pointers(const std::vector<Report>& reports);

}  // namespace iplan::testing
