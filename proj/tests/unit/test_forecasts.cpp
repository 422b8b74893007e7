#include <doctest.h>

#include <cmath>

#include "iplan/forecasts.hpp"
#include "support.hpp"

using namespace iplan;
using namespace iplan::testing;

namespace {

NodeId id_of(const StochasticMdp& mdp, const std::string& kind, const std::string& stage) {
    auto id = mdp.find(state_key(fixture_state(kind, stage), mdp.schema()));
    REQUIRE(id.has_value());
    return *id;
}

}  // namespace

TEST_CASE("resolution time along a deterministic chain") {
    const std::vector<Report> reports{fixture_report("r", "a", "s0", {{"go", 10, "a", "s1"}, {"fix", 20, "a", "done"}})};
    const auto mdp = build_mdp(pointers(reports), fixture_schema());
    const auto time = solve(to_ssp(mdp, CostModel::time_only));
    CHECK(expected_resolution_time(time, id_of(mdp, "a", "s0")) == 30.0);
    CHECK(expected_resolution_time(time, id_of(mdp, "a", "done")) == 0.0);
}

TEST_CASE("resolution time on the three-node stochastic example") {
    const std::vector<Report> reports{fixture_report("r1", "a", "s0", {{"fix", 2, "a", "done"}}),
                                      fixture_report("r2", "a", "s0", {{"fix", 2, "a", "s1"}, {"go", 4, "a", "done"}})};
    const auto mdp = build_mdp(pointers(reports), fixture_schema());
    const auto ssp = to_ssp(mdp, CostModel::time_only);
    const auto time = solve(ssp);
    const auto oracle = value_iteration_oracle(ssp);
    const auto a = id_of(mdp, "a", "s0");
    CHECK(expected_resolution_time(time, a) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(std::fabs(oracle.value[a] - 4.0) <= 1e-9);
}

TEST_CASE("property: time forecast matches time-cost value iteration") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.n_reports = 200;
        spec.noise = 0.2;
        const auto syn = generate_synthetic(spec);
        const auto mdp = build_mdp(pointers(syn.corpus.reports), syn.corpus.schema);
        const auto ssp = to_ssp(mdp, CostModel::time_only);
        const auto time = solve(ssp);
        const auto oracle = value_iteration_oracle(ssp);
        const ForecastTable table(mdp, time);
        double worst = 0.0;
        for (NodeId s = 0; s < mdp.size(); ++s) {
            worst = std::max(worst, std::fabs(table.at(s).expected_resolution_min - oracle.value[s]));
            for (const auto& [type, p] : table.at(s).next_event_probs) {
                CHECK(p >= 0.0);
                CHECK(p <= 1.0);
            }
        }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("one-step absorption and immediate visit") {
    std::vector<Report> reports;
    for (int i = 0; i < 10; ++i) {
        const auto id = "r" + std::to_string(i);
        if (i < 3)
            reports.push_back(fixture_report(id, "a", "s0", {{"fix", 1, "jam", "s1"}, {"go", 1, "jam", "done"}}));
        else
            reports.push_back(fixture_report(id, "a", "s0", {{"fix", 1, "a", "done"}}));
    }
    const auto mdp = build_mdp(pointers(reports), fixture_schema());
    CHECK(next_event_probability(mdp, id_of(mdp, "a", "s0"), "jam") == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(next_event_probability(mdp, id_of(mdp, "jam", "s1"), "jam") == 1.0);
    CHECK(next_event_probability(mdp, id_of(mdp, "a", "done"), "jam") == 0.0);
    CHECK(next_event_probability(mdp, id_of(mdp, "a", "s0"), "b") == 0.0);
}

TEST_CASE("forecast errors") {
    const std::vector<Report> reports{fixture_report("r", "a", "s0", {{"fix", 1, "a", "done"}})};
    const auto mdp = build_mdp(pointers(reports), fixture_schema());
    CHECK_THROWS_AS(next_event_probability(mdp, 0, "meteor"), std::invalid_argument);
    CHECK_THROWS_AS(next_event_probability(mdp, 0, "jam", ForecastPolicy::optimal, nullptr), std::invalid_argument);
    CHECK_THROWS_AS(next_event_probability(mdp, 99, "jam"), std::out_of_range);

    Solution unsolved;
    unsolved.value = {kInfinity};
    CHECK_THROWS_AS(expected_resolution_time(unsolved, 0), NoResolutionPath);
}

TEST_CASE("optimal-policy forecast follows the solver's choice") {
    // From (a, s0): x leads to a jam state, y resolves directly.
    const std::vector<Report> reports{
        fixture_report("r1", "a", "s0", {{"x", 50, "jam", "s1"}, {"go", 50, "jam", "done"}}),
        fixture_report("r2", "a", "s0", {{"y", 1, "a", "done"}})};
    const auto mdp = build_mdp(pointers(reports), fixture_schema());
    const auto sol = solve(to_ssp(mdp, CostModel::frequency_penalized));
    const auto a = id_of(mdp, "a", "s0");
    CHECK(next_event_probability(mdp, a, "jam") == 0.5);
    CHECK(next_event_probability(mdp, a, "jam", ForecastPolicy::optimal, &sol) == 0.0);
}

TEST_CASE("next-event probability matches a Monte-Carlo oracle on a 10-state fixture") {
    const auto reports = ten_state_reports();
    const auto mdp = build_mdp(pointers(reports), fixture_schema());
    REQUIRE(mdp.size() == 10);
    const std::size_t rollouts = 1'000'000;
    for (const char* start : {"s0", "s2"}) {
        const auto id = id_of(mdp, "a", start);
        const double p = next_event_probability(mdp, id, "jam");
        const double mc = monte_carlo_visit(mdp, id, "jam", rollouts, 2024);
        const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(rollouts));
        MESSAGE("start a/" << std::string(start) << ": exact " << p << ", monte-carlo " << mc << ", sigma " << sigma);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        CHECK(std::fabs(mc - p) <= 3 * sigma);
    }
}

TEST_CASE("property: adding a path into the event type never lowers its probability") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.n_reports = 80;
        spec.noise = 0.2;
        auto syn = generate_synthetic(spec);
        const auto& schema = syn.corpus.schema;
        const auto base = build_mdp(pointers(syn.corpus.reports), schema);
        const std::string target = "congestion";
        const auto before = event_visit_probabilities(base, target);

        // A new report jumps from some non-goal state straight into congestion.
        auto reports = syn.corpus.reports;
        NodeId from = 0;
        while (base.node(from).is_goal || before[from] >= 1.0) ++from;
        Report extra;
        extra.id = "extra";
        extra.initial_state = base.node(from).state;
        auto jam = extra.initial_state;
        jam.values[schema.event_feature()] = target;
        auto done = jam;
        done.values["status"] = std::string("resolved");
        extra.steps = {Step{schema.actions().front(), 5, jam, false}, Step{schema.actions().front(), 5, done, true}};
        reports.push_back(extra);
        const auto grown = build_mdp(pointers(reports), schema);
        const auto after = event_visit_probabilities(grown, target);
        for (NodeId s = 0; s < base.size(); ++s) {
            const auto t = *grown.find(base.node(s).key);
            CHECK(after[t] >= before[s] - 1e-9);
        }
        CHECK(after[*grown.find(base.node(from).key)] > before[from]);
    }
}
