#include "support.hpp"

#include <algorithm>
#include <queue>

namespace iplan::testing {

SspModel random_ssp(std::uint64_t seed, const RandomSspSpec& spec) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> size_dist(3, spec.max_states);
    const std::size_t n = size_dist(rng);
    SspModel model;
    model.goal.assign(n, false);
    model.actions.resize(n);
    model.goal[0] = true;
    if (n > 6 && rng() % 2 == 0) model.goal[n - 1] = true;

    std::uniform_int_distribution<std::size_t> action_dist(1, spec.max_actions);
    std::uniform_int_distribution<std::size_t> outcome_dist(1, spec.deterministic ? 1 : spec.max_outcomes);
    std::uniform_int_distribution<NodeId> target_dist(0, n - 1);
    std::uniform_real_distribution<double> cost_dist(0.0, spec.max_cost);
    std::uniform_int_distribution<int> int_cost(1, static_cast<int>(spec.max_cost));
    std::uniform_real_distribution<double> weight(0.05, 1.0);

    for (NodeId s = 0; s < n; ++s) {
        if (model.goal[s]) continue;
        const std::size_t k = action_dist(rng);
        for (std::size_t a = 0; a < k; ++a) {
            SspAction act;
            act.id = ActionId{"a" + std::to_string(a)};
            if (spec.integer_costs) {
                act.cost = int_cost(rng);
            } else {
                double c = 0.0;
                while (c <= 0.0) c = cost_dist(rng);
                act.cost = c;
            }
            const std::size_t m = outcome_dist(rng);
            std::vector<NodeId> targets;
            while (targets.size() < m) {
                const NodeId t = target_dist(rng);
                if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
            }
            std::sort(targets.begin(), targets.end());
            std::vector<double> w;
            double total = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                w.push_back(weight(rng));
                total += w.back();
            }
            for (std::size_t i = 0; i < m; ++i) act.outcomes.emplace_back(targets[i], w[i] / total);
            model.actions[s].push_back(std::move(act));
        }
    }
    return model;
}

std::vector<double> dijkstra_to_goal(const SspModel& model) {
    const std::size_t n = model.size();
    std::vector<std::vector<std::pair<NodeId, double>>> reverse(n);
    for (NodeId s = 0; s < n; ++s) {
        if (model.goal[s]) continue;
        for (const auto& a : model.actions[s]) reverse[a.outcomes.at(0).first].emplace_back(s, a.cost);
    }
    std::vector<double> dist(n, kInfinity);
    using Entry = std::pair<double, NodeId>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (NodeId s = 0; s < n; ++s) {
        if (model.goal[s]) {
            dist[s] = 0.0;
            heap.emplace(0.0, s);
        }
    }
    while (!heap.empty()) {
        auto [d, t] = heap.top();
        heap.pop();
        if (d > dist[t]) continue;
        for (auto [s, c] : reverse[t]) {
            if (model.goal[s]) continue;
            if (d + c < dist[s]) {
                dist[s] = d + c;
                heap.emplace(dist[s], s);
            }
        }
    }
    return dist;
}

FeatureSchema fixture_schema() {
    return FeatureSchema({{"kind", FeatureKind::categorical, {"a", "b", "c", "jam"}, 0, 1},
                          {"stage", FeatureKind::categorical, {"s0", "s1", "s2", "s3", "done"}, 0, 1}},
                         {{"fix"}, {"go"}, {"patch"}, {"wait"}, {"x"}, {"y"}, {"z"}}, "kind");
}

EventState fixture_state(const std::string& kind, const std::string& stage) {
    return EventState{{{"kind", kind}, {"stage", stage}}};
}

Report fixture_report(const std::string& id, const std::string& kind, const std::string& stage,
                      const std::vector<FixtureStep>& steps) {
    Report r;
    r.id = id;
    r.initial_state = fixture_state(kind, stage);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        r.steps.push_back({ActionId{s.action}, s.duration, fixture_state(s.kind, s.stage), i + 1 == steps.size()});
    }
    return r;
}

double monte_carlo_visit(const StochasticMdp& mdp, NodeId start, const std::string& event_type,
                         std::size_t rollouts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto& name = mdp.schema().event_feature();
    auto matches = [&](NodeId s) { return std::get<std::string>(mdp.node(s).state.values.at(name)) == event_type; };
    std::size_t hits = 0;
    for (std::size_t r = 0; r < rollouts; ++r) {
        NodeId s = start;
        for (std::size_t guard = 0; guard < 100000; ++guard) {
            if (matches(s)) {
                ++hits;
                break;
            }
            const auto& node = mdp.node(s);
            if (node.is_goal || node.edges.empty()) break;
            std::uint64_t total = 0;
            for (const auto& e : node.edges) total += e.n;
            double u = unit(rng) * static_cast<double>(total);
            const Edge* edge = &node.edges.back();
            for (const auto& e : node.edges) {
                if (u < static_cast<double>(e.n)) {
                    edge = &e;
                    break;
                }
                u -= static_cast<double>(e.n);
            }
            double v = unit(rng);
            NodeId next = edge->outcomes.back().target;
            for (const auto& o : edge->outcomes) {
                if (v < o.probability) {
                    next = o.target;
                    break;
                }
                v -= o.probability;
            }
            s = next;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(rollouts);
}

std::vector<Report> ten_state_reports() {
    return {fixture_report("r1", "a", "s0", {{"x", 1, "a", "s1"}, {"y", 1, "a", "done"}}),
            fixture_report("r2", "a", "s0", {{"x", 1, "b", "s1"}, {"y", 1, "jam", "s2"}, {"z", 1, "jam", "done"}}),
            fixture_report("r3", "a", "s0", {{"go", 1, "a", "s2"}, {"x", 1, "a", "s1"}, {"y", 1, "a", "done"}}),
            fixture_report("r4", "a", "s1", {{"y", 1, "b", "s2"}, {"z", 1, "b", "done"}}),
            fixture_report("r5", "b", "s1", {{"y", 1, "b", "s2"}, {"go", 1, "jam", "s3"}, {"fix", 1, "jam", "done"}}),
            fixture_report("r6", "a", "s2", {{"x", 1, "a", "s0"}, {"x", 1, "a", "s1"}, {"y", 1, "a", "done"}}),
            fixture_report("r7", "b", "s2", {{"go", 1, "b", "done"}})};
}

std::vector<const Report*> pointers(const std::vector<Report>& reports) {
    std::vector<const Report*> out;
    for (const auto& r : reports) out.push_back(&r);
    return out;
}

}  // namespace iplan::testing
