#include "iplan/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace iplan {

std::string ResolutionDocument::key() const {
    std::string out;
    for (const auto& a : resolution) {
        if (!out.empty()) out += '>';
        out += a.name;
    }
    return out;
}

std::vector<ResolutionDocument> group_by_resolution(const std::vector<const Report*>& reports) {
    std::map<std::vector<ActionId>, ResolutionDocument> groups;
    for (const auto* r : reports) {
        std::vector<ActionId> seq;
        seq.reserve(r->steps.size());
        for (const auto& s : r->steps) seq.push_back(s.action);
        auto& doc = groups[seq];
        if (doc.members.empty()) doc.resolution = seq;
        doc.members.push_back(r);
    }
    std::vector<ResolutionDocument> out;
    out.reserve(groups.size());
    for (auto& [_, doc] : groups) out.push_back(std::move(doc));
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
    return out;
}

std::vector<bool> active_dimensions(const FeatureVector& encoded) {
    std::vector<bool> active(encoded.size());
    for (std::size_t i = 0; i < encoded.size(); ++i) {
        // Decile bucket of a value in [0, 1]; bucket 0 counts as absent.
        const auto bucket = std::min(9, static_cast<int>(std::floor(encoded[i] * 10.0)));
        active[i] = bucket > 0;
    }
    return active;
}

FeatureWeights compute_weights(const std::vector<ResolutionDocument>& documents, const FeatureSchema& schema) {
    if (documents.empty()) throw std::invalid_argument("cannot weight features without documents");
    const std::size_t dims = schema.dimension();
    std::vector<std::vector<double>> tf(documents.size(), std::vector<double>(dims, 0.0));
    std::vector<std::size_t> df(dims, 0);

    for (std::size_t d = 0; d < documents.size(); ++d) {
        std::vector<std::size_t> counts(dims, 0);
        std::size_t total = 0;
        auto count_state = [&](const EventState& state) {
            const auto active = active_dimensions(encode(state, schema));
            for (std::size_t i = 0; i < dims; ++i) {
                if (active[i]) {
                    ++counts[i];
                    ++total;
                }
            }
        };
        for (const auto* r : documents[d].members) {
            count_state(r->initial_state);
            for (const auto& step : r->steps) count_state(step.state_after);
        }
        for (std::size_t i = 0; i < dims; ++i) {
            if (counts[i] > 0) ++df[i];
            tf[d][i] = total > 0 ? static_cast<double>(counts[i]) / static_cast<double>(total) : 0.0;
        }
    }

    FeatureWeights weights{std::vector<double>(dims, 0.0)};
    const double n_docs = static_cast<double>(documents.size());
    for (std::size_t i = 0; i < dims; ++i) {
        const double idf = std::log((1.0 + n_docs) / (1.0 + static_cast<double>(df[i]))) + 1.0;
        for (std::size_t d = 0; d < documents.size(); ++d) weights.w[i] = std::max(weights.w[i], tf[d][i] * idf);
    }
    return weights;
}

double distance(std::span<const double> a, std::span<const double> b, const FeatureWeights& weights) {
    if (a.size() != b.size() || a.size() != weights.w.size())
        throw DimensionMismatch("distance needs vectors and weights of equal length (" + std::to_string(a.size()) +
                                ", " + std::to_string(b.size()) + ", " + std::to_string(weights.w.size()) + ")");
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += weights.w[i] * std::fabs(a[i] - b[i]);
    return total;
}

NodeIndex::NodeIndex(const StochasticMdp& mdp) {
    vectors_.reserve(mdp.size());
    for (const auto& node : mdp.nodes()) vectors_.push_back(encode(node.state, mdp.schema()));
}

NearestMatch NodeIndex::nearest(std::span<const double> query, const FeatureWeights& weights) const {
    if (vectors_.empty()) throw std::invalid_argument("nearest-node query on an empty model");
    NearestMatch best{0, distance(query, vectors_[0], weights)};
    for (NodeId id = 1; id < vectors_.size(); ++id) {
        const double d = distance(query, vectors_[id], weights);
        if (d < best.distance) best = {id, d};
    }
    return best;
}

NearestMatch nearest_node(const StochasticMdp& mdp, const EventState& query, const FeatureWeights& weights) {
    if (mdp.size() == 0) throw std::invalid_argument("nearest-node query on an empty model");
    const auto q = encode(query, mdp.schema());
    return NodeIndex(mdp).nearest(q, weights);
}

}  // namespace iplan
