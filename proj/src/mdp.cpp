#include "iplan/mdp.hpp"

#include <algorithm>
#include <map>

namespace iplan {

Chain build_chain(const Report& report) {
    Chain chain;
    chain.report_id = report.id;
    chain.transitions.reserve(report.steps.size());
    const EventState* current = &report.initial_state;
    for (const auto& step : report.steps) {
        chain.transitions.push_back({*current, step.action, step.duration_min, step.state_after});
        current = &step.state_after;
    }
    chain.goal = *current;
    return chain;
}

double action_cost(double mean_duration, double penalty, std::uint64_t n) {
    return mean_duration + penalty / static_cast<double>(n);
}

StochasticMdp::StochasticMdp(FeatureSchema schema, std::vector<Node> nodes, std::size_t n_reports)
    : schema_(std::move(schema)), nodes_(std::move(nodes)), n_reports_(n_reports) {
    double total = 0.0;
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        auto& node = nodes_[id];
        if (!index_.emplace(node.key, id).second) throw BuildError("duplicate state key " + node.key);
        std::sort(node.edges.begin(), node.edges.end(),
                  [](const Edge& a, const Edge& b) { return a.action < b.action; });
        for (auto& edge : node.edges) {
            if (edge.n == 0) throw BuildError("edge without observations at " + node.key);
            std::uint64_t seen = 0;
            std::sort(edge.outcomes.begin(), edge.outcomes.end(),
                      [](const Outcome& a, const Outcome& b) { return a.target < b.target; });
            for (auto& o : edge.outcomes) {
                if (o.target >= nodes_.size()) throw BuildError("edge points outside the graph");
                seen += o.count;
                o.probability = static_cast<double>(o.count) / static_cast<double>(edge.n);
            }
            if (seen != edge.n) throw BuildError("outcome counts do not add up at " + node.key);
            edge.mean_duration = edge.total_duration / static_cast<double>(edge.n);
            total += edge.total_duration;
            executions_ += edge.n;
        }
        if (!node.is_goal && node.edges.empty())
            throw BuildError("non-goal state without outgoing actions: " + node.key);
    }
    penalty_ = executions_ > 0 ? total / static_cast<double>(executions_) : 0.0;
    for (const auto& node : nodes_) {
        for (const auto& edge : node.edges) {
            if (!(action_cost(edge.mean_duration, penalty_, edge.n) > 0.0))
                throw BuildError("zero-cost action '" + edge.action.name + "' at " + node.key);
        }
    }
}

std::size_t StochasticMdp::edge_count() const noexcept {
    std::size_t total = 0;
    for (const auto& node : nodes_) total += node.edges.size();
    return total;
}

std::optional<NodeId> StochasticMdp::find(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const Edge* StochasticMdp::edge(NodeId id, const ActionId& action) const {
    const auto& edges = nodes_.at(id).edges;
    auto it = std::lower_bound(edges.begin(), edges.end(), action,
                               [](const Edge& e, const ActionId& a) { return e.action < a; });
    if (it == edges.end() || it->action != action) return nullptr;
    return &*it;
}

double StochasticMdp::cost(NodeId id, const ActionId& action) const {
    const Edge* e = edge(id, action);
    if (e == nullptr)
        throw NoSuchAction("action '" + action.name + "' was never taken in state " + nodes_.at(id).key);
    return action_cost(e->mean_duration, penalty_, e->n);
}

StochasticMdp merge(const std::vector<Chain>& chains, const FeatureSchema& schema) {
    struct EdgeAccumulator {
        std::uint64_t n = 0;
        double total = 0.0;
        std::map<std::string, std::uint64_t> successors;
    };
    struct NodeAccumulator {
        EventState state;
        bool goal = false;
        std::map<ActionId, EdgeAccumulator> edges;
    };
    // Keyed by canonical state key; std::map keeps the id assignment sorted.
    std::map<std::string, NodeAccumulator> acc;
    auto touch = [&](const EventState& state) -> std::pair<const std::string, NodeAccumulator>& {
        auto key = state_key(state, schema);
        auto [it, inserted] = acc.try_emplace(std::move(key));
        if (inserted) it->second.state = state;
        return *it;
    };

    for (const auto& chain : chains) {
        for (const auto& t : chain.transitions) {
            auto& from = touch(t.state);
            const auto& to = touch(t.next_state);
            auto& edge = from.second.edges[t.action];
            edge.n += 1;
            edge.total += t.duration_min;
            edge.successors[to.first] += 1;
        }
        touch(chain.goal).second.goal = true;
    }

    std::map<std::string, NodeId> ids;
    for (const auto& [key, _] : acc) ids.emplace(key, ids.size());

    std::vector<Node> nodes;
    nodes.reserve(acc.size());
    for (auto& [key, a] : acc) {
        Node node;
        node.state = std::move(a.state);
        node.key = key;
        node.is_goal = a.goal;
        for (auto& [action, e] : a.edges) {
            Edge edge;
            edge.action = action;
            edge.n = e.n;
            edge.total_duration = e.total;
            for (const auto& [succ, count] : e.successors) edge.outcomes.push_back({ids.at(succ), count, 0.0});
            node.edges.push_back(std::move(edge));
        }
        nodes.push_back(std::move(node));
    }
    return StochasticMdp(schema, std::move(nodes), chains.size());
}

StochasticMdp build_mdp(const std::vector<const Report*>& reports, const FeatureSchema& schema) {
    if (reports.empty()) throw BuildError("cannot build a model from zero reports");
    std::vector<Chain> chains;
    chains.reserve(reports.size());
    for (const auto* r : reports) chains.push_back(build_chain(*r));
    return merge(chains, schema);
}

}  // namespace iplan
