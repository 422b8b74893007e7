#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "iplan/corpus.hpp"

namespace iplan {

/// Parameters of a seeded synthetic corpus.
struct SyntheticSpec {
    std::uint64_t seed = 7;
    std::size_t n_reports = 500;
    std::size_t n_policies = 3;   // distinct ground-truth action sequences
    double noise = 0.0;           // per-step probability of an off-pattern action
    std::size_t n_classes = 3;    // event types used for initial states
    double subsequent_event_probability = 0.15;

    void validate() const;
};

enum class Deviation { none, ineffective, substituted };

struct GroundTruth {
    std::string event_class;
    std::size_t policy = 0;
    std::vector<ActionId> intended;     // the pattern the report should follow
    std::vector<Deviation> deviations;  // one per pattern position
};

struct SyntheticCorpus {
    Corpus corpus;
    std::vector<std::vector<ActionId>> policies;
    std::vector<std::string> policy_class;
    std::vector<GroundTruth> truth;  // parallel to corpus.reports
    /// Per event class, the lowest-index policy of that class.
    std::map<std::string, std::vector<ActionId>> class_reference;
};

/// Reconstructed highway-incident schema used by the examples and tests:
/// event_type, vehicles, injured, lane_blocked, km, hour, status.
FeatureSchema reference_schema();

/// Generates a corpus against a schema that declares an event feature and a
/// categorical `status` feature (first category = reported, last = resolved).
/// Every report follows the policy selected by its event class and its
/// critical boolean features; with probability `noise` per position the
/// operator first takes an off-pattern action that either leaves the state
/// unchanged or replaces the pattern action.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, const FeatureSchema& schema = reference_schema());

}  // namespace iplan
