#include <doctest.h>

#include "iplan/eval.hpp"
#include "iplan/recommender.hpp"
#include "support.hpp"

using namespace iplan;
using namespace iplan::testing;

namespace {

Model fixture_model(const std::vector<Report>& reports) {
    Corpus c;
    c.schema = fixture_schema();
    c.reports = reports;
    c.splits.assign(reports.size(), Split::unassigned);
    auto m = Model::build(c);
    m.solve();
    return m;
}

std::vector<ActionId> ids(std::initializer_list<const char*> names) {
    std::vector<ActionId> out;
    for (const auto* n : names) out.push_back(ActionId{n});
    return out;
}

}  // namespace

TEST_CASE("zero-noise ground-truth recovery on training states") {
    SyntheticSpec spec;
    spec.n_reports = 500;
    const auto syn = generate_synthetic(spec);
    const auto corpus = split(syn.corpus, 0.8, 1);
    auto model = Model::build(corpus);
    model.solve();
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < corpus.reports.size(); ++i) {
        if (corpus.splits[i] != Split::train) continue;
        ++total;
        const auto plan = recommend(model, corpus.reports[i].initial_state);
        if (plan.actions() == syn.truth[i].intended) ++hits;
        CHECK(plan.match.distance == 0.0);
    }
    CHECK(hits == total);
}

TEST_CASE("recommend is deterministic and every plan ends at a goal") {
    SyntheticSpec spec;
    spec.n_reports = 200;
    spec.noise = 0.2;
    auto model = Model::build(generate_synthetic(spec).corpus);
    model.solve();
    for (NodeId s = 0; s < model.mdp().size(); ++s) {
        const auto plan = recommend(model, model.mdp().node(s).state);
        CHECK(plan.steps.size() <= model.mdp().size());
        if (!plan.steps.empty()) CHECK(model.mdp().node(plan.steps.back().node_after).is_goal);
        CHECK(recommend(model, model.mdp().node(s).state).actions() == plan.actions());
        double sum = 0.0;
        for (const auto& st : plan.steps) sum += st.expected_duration_min;
        CHECK(plan.total_expected_min == sum);
    }
}

TEST_CASE("low-weight perturbations keep the recommendation") {
    SyntheticSpec spec;
    spec.n_reports = 500;
    const auto syn = generate_synthetic(spec);
    auto model = Model::build(syn.corpus);
    model.solve();
    PerturbationSpec perturb;
    perturb.edits = {{"km", FeatureEdit::Kind::shift, 0.5, {}}, {"hour", FeatureEdit::Kind::shift, 0.25, {}}};
    perturb.count = 5;
    std::size_t same = 0, total = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        const auto& initial = syn.corpus.reports[i].initial_state;
        for (const auto& v : perturb.variants(initial, model.schema(), i)) {
            ++total;
            if (recommend(model, v).actions() == syn.truth[i].intended) ++same;
        }
    }
    MESSAGE("perturbed recovery " << same << "/" << total);
    CHECK(static_cast<double>(same) >= 0.95 * static_cast<double>(total));
}

TEST_CASE("goal query gives an empty plan") {
    const auto m = fixture_model({fixture_report("r", "a", "s0", {{"fix", 4, "a", "done"}})});
    const auto plan = recommend(m, fixture_state("a", "done"));
    CHECK(plan.steps.empty());
    CHECK(plan.total_expected_min == 0.0);
    CHECK(plan.forecast.expected_resolution_min == 0.0);
}

TEST_CASE("what-if on a deterministic fixture") {
    // From (a, s0): fix (10) resolves; go (3) then x (2) resolves, seen three times; z (30) resolves.
    const auto m = fixture_model({fixture_report("r1", "a", "s0", {{"fix", 10, "a", "done"}}),
                                  fixture_report("r2", "a", "s0", {{"go", 3, "a", "s1"}, {"x", 2, "a", "done"}}),
                                  fixture_report("r3", "a", "s0", {{"go", 3, "a", "s1"}, {"x", 2, "a", "done"}}),
                                  fixture_report("r4", "a", "s0", {{"go", 3, "a", "s1"}, {"x", 2, "a", "done"}}),
                                  fixture_report("r5", "a", "s0", {{"z", 30, "a", "done"}})});
    const auto q = fixture_state("a", "s0");
    const auto best = recommend(m, q);
    CHECK(best.actions() == ids({"go", "x"}));
    CHECK(best.total_expected_min == 5.0);
    CHECK(best.forecast.expected_resolution_min == 5.0);

    const auto same = what_if(m, q, ActionId{"go"});
    CHECK(same.actions() == best.actions());
    CHECK(same.total_expected_min == best.total_expected_min);

    for (const char* dominated : {"fix", "z"}) {
        const auto alt = what_if(m, q, ActionId{dominated});
        CHECK(alt.steps.front().action == ActionId{dominated});
        CHECK(alt.total_expected_min >= best.total_expected_min);
    }

    try {
        what_if(m, q, ActionId{"patch"});
        FAIL("expected ActionUnavailable");
    } catch (const ActionUnavailable& e) {
        CHECK(e.available() == ids({"fix", "go", "z"}));
        CHECK(std::string(e.what()).find("fix, go, z") != std::string::npos);
    }
    CHECK_THROWS_AS(what_if(m, fixture_state("a", "done"), ActionId{"fix"}), ActionUnavailable);
}

TEST_CASE("with equal support the frequency penalty favours fewer steps") {
    // penalty = 45 / 4; fix: 10 + 11.25 = 21.25, go then x: 5 + 2 * 11.25 = 27.5.
    const auto m = fixture_model({fixture_report("r1", "a", "s0", {{"fix", 10, "a", "done"}}),
                                  fixture_report("r2", "a", "s0", {{"go", 3, "a", "s1"}, {"x", 2, "a", "done"}}),
                                  fixture_report("r3", "a", "s0", {{"z", 30, "a", "done"}})});
    const auto plan = recommend(m, fixture_state("a", "s0"));
    CHECK(plan.actions() == ids({"fix"}));
    CHECK(m.solution().value[plan.match.node] == 21.25);
    // The time forecast still reports the faster path.
    CHECK(plan.forecast.expected_resolution_min == 5.0);
}

TEST_CASE("stochastic step shows the most probable successor") {
    const auto m = fixture_model({fixture_report("r1", "a", "s0", {{"fix", 2, "a", "s1"}, {"go", 1, "a", "done"}}),
                                  fixture_report("r2", "a", "s0", {{"fix", 2, "a", "s1"}, {"go", 1, "a", "done"}}),
                                  fixture_report("r3", "a", "s0", {{"fix", 2, "a", "done"}})});
    const auto plan = recommend(m, fixture_state("a", "s0"));
    REQUIRE(plan.steps.size() == 2);
    CHECK(plan.steps[0].branch_probability == doctest::Approx(2.0 / 3.0));
    CHECK(plan.steps[0].state_key_after == state_key(fixture_state("a", "s1"), m.schema()));
}

TEST_CASE("a node without a proper path raises NoResolutionPath") {
    const auto schema = fixture_schema();
    Node trap;
    trap.state = fixture_state("a", "s0");
    trap.key = state_key(trap.state, schema);
    Node goal;
    goal.state = fixture_state("a", "done");
    goal.key = state_key(goal.state, schema);
    goal.is_goal = true;
    // Ids follow key order: "a,done" < "a,s0".
    Edge loop;
    loop.action = ActionId{"wait"};
    loop.n = 1;
    loop.total_duration = 1.0;
    loop.outcomes = {Outcome{1, 1, 0.0}};
    trap.edges = {loop};
    StochasticMdp mdp(schema, {goal, trap}, 1);
    Model m(std::move(mdp), FeatureWeights{std::vector<double>(schema.dimension(), 1.0)});
    m.solve();
    CHECK_THROWS_AS(recommend(m, fixture_state("a", "s0")), NoResolutionPath);
    CHECK_THROWS_AS(plan_from(m, 1), NoResolutionPath);
}

TEST_CASE("unsolved model and invalid queries") {
    SyntheticSpec spec;
    spec.n_reports = 20;
    const auto syn = generate_synthetic(spec);
    const auto m = Model::build(syn.corpus);
    CHECK_THROWS_AS(recommend(m, syn.corpus.reports[0].initial_state), ModelNotSolved);

    auto solved = m;
    solved.solve();
    auto bad = syn.corpus.reports[0].initial_state;
    bad.values.erase("km");
    CHECK_THROWS_AS(recommend(solved, bad), SchemaError);
}

TEST_CASE("low-confidence flag follows the threshold") {
    auto m = fixture_model({fixture_report("r", "a", "s0", {{"fix", 4, "a", "done"}})});
    m.set_confidence_threshold(0.25);
    CHECK_FALSE(recommend(m, fixture_state("a", "s0")).match.low_confidence);
    CHECK(recommend(m, fixture_state("b", "s0")).match.low_confidence);
}
