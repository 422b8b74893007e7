#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "iplan/recommender.hpp"
#include "iplan/synthetic.hpp"

namespace iplan {

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<double> embed(const std::string& text) const = 0;
};

/// Signed FNV-1a hashing of lowercased character n-grams, L2-normalised.
class HashingEmbedder : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dimension = 512, std::size_t n = 3);
    std::string name() const override;
    std::size_t dimension() const override { return dimension_; }
    std::vector<double> embed(const std::string& text) const override;

private:
    std::size_t dimension_;
    std::size_t n_;
};

/// 0 when either vector is zero.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

/// Upper- and lowercase ASCII letters drawn uniformly.
std::string random_letters(std::size_t length, std::mt19937_64& rng);

/// Mean cosine between `m_text` and `draws` random letter strings of the same
/// character length. Deterministic in (m_text, seed).
double random_baseline(const std::string& m_text, std::uint64_t seed, const EmbeddingProvider& embedder,
                       std::size_t draws = 32);

/// Maximum of sum gain[i][j] over matchings that pair min(rows, cols)
/// rows with distinct columns.
double best_assignment_exhaustive(const std::vector<std::vector<double>>& gain);
double best_assignment_hungarian(const std::vector<std::vector<double>>& gain);
/// Exhaustive when max(rows, cols) <= 8, Hungarian above.
double best_assignment(const std::vector<std::vector<double>>& gain);

/// Baseline-normalised cosine terms, one row per manual action and one
/// column per predicted action.
std::vector<std::vector<double>> score_terms(const std::vector<std::string>& predicted,
                                             const std::vector<std::string>& manual,
                                             const EmbeddingProvider& embedder, std::uint64_t seed = 0);

/// Mean over the N manual actions of the best-assignment terms; unmatched
/// manual actions add 0. Throws std::invalid_argument on an empty manual.
double score(const std::vector<std::string>& predicted, const std::vector<std::string>& manual,
             const EmbeddingProvider& embedder, std::uint64_t seed = 0);

struct FeatureEdit {
    enum class Kind { shift, set, identity };
    std::string feature;
    Kind kind = Kind::identity;
    double delta = 0.0;  // shift: uniform in [-delta, delta], clamped to the range
    FeatureValue value;  // set
};

/// Edits applied to every variant of an event. Edits may not touch the
/// schema's critical features.
struct PerturbationSpec {
    std::vector<FeatureEdit> edits;
    std::size_t count = 10;  // variants per event
    std::uint64_t seed = 0;

    static PerturbationSpec identity(std::size_t count = 10);
    /// Throws std::invalid_argument naming the offending edit.
    void validate(const FeatureSchema& schema) const;
    std::vector<EventState> variants(const EventState& event, const FeatureSchema& schema,
                                     std::uint64_t event_index = 0) const;
};

using RecommendFn = std::function<std::vector<ActionId>(const EventState&)>;

/// Percentage of variants whose action sequence equals the unperturbed one.
/// A failing recommendation counts as inconsistent.
double consistency(const RecommendFn& recommend_fn, const EventState& event, const PerturbationSpec& spec,
                   const FeatureSchema& schema, std::uint64_t event_index = 0);

/// Manual action texts per event category, plus optional display texts for
/// action ids (default: the id with '-' and '_' read as spaces).
struct ReferenceSet {
    std::map<std::string, std::vector<std::string>> categories;
    std::map<std::string, std::string> action_texts;

    std::string text_of(const ActionId& action) const;
    std::vector<std::string> texts_of(const std::vector<ActionId>& actions) const;
    void validate() const;
};

nlohmann::json to_json(const ReferenceSet& refs);
ReferenceSet reference_set_from_json(const nlohmann::json& doc);
ReferenceSet load_reference_set(const std::string& path);
void save_reference_set(const ReferenceSet& refs, const std::string& path);

/// Per class, the action texts of the class's reference policy.
ReferenceSet reference_from_synthetic(const SyntheticCorpus& synthetic);

struct Distribution {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
    bool operator==(const Distribution&) const = default;
};

/// Quartiles by linear interpolation between order statistics.
Distribution summarize(std::vector<double> values);

struct EventRow {
    std::string report_id;
    std::string split;
    std::string category;
    std::vector<std::string> actions;
    double score = 0.0;
    double consistency = 0.0;
    std::string error;
    bool operator==(const EventRow&) const = default;
};

struct CategorySummary {
    std::string split;
    std::string category;
    std::size_t n_events = 0;
    bool skipped = false;
    std::string reason;
    Distribution score;
    Distribution consistency;
    bool operator==(const CategorySummary&) const = default;
};

struct SuiteReport {
    std::string embedder;
    std::vector<EventRow> rows;
    std::vector<CategorySummary> summaries;
    bool operator==(const SuiteReport&) const = default;
};

struct SuiteOptions {
    std::size_t events_per_category = 50;
    std::uint64_t seed = 0;
};

/// Scores and consistency for up to `events_per_category` report initial
/// states per category and split.
SuiteReport evaluate_suite(const Model& model, const Corpus& corpus, const ReferenceSet& references,
                           const PerturbationSpec& spec, const EmbeddingProvider& embedder,
                           SuiteOptions options = {});

nlohmann::json to_json(const SuiteReport& report);
SuiteReport suite_report_from_json(const nlohmann::json& doc);
void save_results(const SuiteReport& report, const std::string& path);
SuiteReport load_results(const std::string& path);

}  // namespace iplan
