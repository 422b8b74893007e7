#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iplan/forecasts.hpp"
#include "iplan/similarity.hpp"
#include "iplan/solver.hpp"

namespace iplan {

inline constexpr int kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChecksumError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};

class VersionError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};

struct ModelStats {
    std::size_t n_nodes = 0;
    std::size_t n_edges = 0;
    std::size_t n_reports = 0;
    std::vector<std::string> categories;
    std::string build_hash;
};

/// A built (and usually solved) decision model: the merged MDP, the TF-IDF
/// weights, the policy and every derived read-only structure. Immutable once
/// solved; safe to share across threads.
class Model {
public:
    Model() = default;
    Model(StochasticMdp mdp, FeatureWeights weights);

    /// Builds from the train split (or every report when no split is tagged).
    static Model build(const Corpus& corpus);

    /// Runs IPS on the frequency-penalised costs and derives the forecasts.
    void solve(SolveOptions options = {});
    /// Installs a previously computed solution (used by load_model).
    void adopt(Solution solution);

    bool solved() const noexcept { return solution_.has_value(); }

    const FeatureSchema& schema() const noexcept { return mdp_.schema(); }
    const StochasticMdp& mdp() const noexcept { return mdp_; }
    const FeatureWeights& weights() const noexcept { return weights_; }
    const SspModel& ssp() const noexcept { return ssp_; }
    const Solution& solution() const;
    const Solution& time_solution() const;
    const ForecastTable& forecasts() const;
    const NodeIndex& index() const noexcept { return index_; }

    /// Distance above which a nearest-node match is flagged as low confidence.
    double confidence_threshold() const noexcept { return threshold_; }
    void set_confidence_threshold(double value) { threshold_ = value; }

    ModelStats stats() const;
    const std::string& build_hash() const noexcept { return build_hash_; }

private:
    friend Model read_model(std::istream& in);
    friend void write_model(const Model& model, std::ostream& out);

    void derive();

    StochasticMdp mdp_;
    FeatureWeights weights_;
    SspModel ssp_;
    NodeIndex index_;
    std::optional<Solution> solution_;
    std::optional<Solution> time_solution_;
    std::optional<ForecastTable> forecasts_;
    double threshold_ = 0.0;
    std::string build_hash_;
};

/// 95th percentile of nearest-other-node distances over (at most 1000
/// evenly spaced) nodes.
double default_confidence_threshold(const NodeIndex& index, const FeatureWeights& weights);

/// Text header "iplan-model <version> <sha256-of-payload> <payload-bytes>"
/// followed by a JSON payload.
void write_model(const Model& model, std::ostream& out);
Model read_model(std::istream& in);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

std::string sha256_hex(const std::string& data);

}  // namespace iplan
