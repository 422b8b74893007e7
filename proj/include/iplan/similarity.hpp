#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "iplan/mdp.hpp"

namespace iplan {

/// Reports that share one ordered action sequence.
struct ResolutionDocument {
    std::vector<ActionId> resolution;
    std::vector<const Report*> members;

    std::string key() const;  // "a>b>c"
};

/// Partitions reports by their action sequence; documents sorted by key.
std::vector<ResolutionDocument> group_by_resolution(const std::vector<const Report*>& reports);

struct FeatureWeights {
    std::vector<double> w;
};

/// Components that count as an occurrence for TF-IDF: one-hot and boolean
/// components equal to 1, numeric components outside the lowest decile.
std::vector<bool> active_dimensions(const FeatureVector& encoded);

/// Per encoded component: max over documents of TF * IDF where TF is the
/// component's share of all active occurrences over every state of the
/// document's reports and IDF = ln((1 + |D|) / (1 + df)) + 1.
FeatureWeights compute_weights(const std::vector<ResolutionDocument>& documents, const FeatureSchema& schema);

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Weighted L1 distance: sum_i w_i |a_i - b_i|.
double distance(std::span<const double> a, std::span<const double> b, const FeatureWeights& weights);

struct NearestMatch {
    NodeId node = 0;
    double distance = 0.0;
};

/// Encoded node states, computed once per model.
class NodeIndex {
public:
    NodeIndex() = default;
    explicit NodeIndex(const StochasticMdp& mdp);

    std::size_t size() const noexcept { return vectors_.size(); }
    const FeatureVector& vector(NodeId id) const { return vectors_.at(id); }

    /// Exhaustive scan; ties go to the lowest node id.
    NearestMatch nearest(std::span<const double> query, const FeatureWeights& weights) const;

private:
    std::vector<FeatureVector> vectors_;
};

NearestMatch nearest_node(const StochasticMdp& mdp, const EventState& query, const FeatureWeights& weights);

}  // namespace iplan
