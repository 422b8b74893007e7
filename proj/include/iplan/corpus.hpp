#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "iplan/schema.hpp"

namespace iplan {

struct Step {
    ActionId action;
    double duration_min = 0.0;
    EventState state_after;
    bool resolved = false;

    bool operator==(const Step&) const = default;
};

/// One historical event: the initial description and the actions that led
/// to its resolution. The final step carries `resolved = true`.
struct Report {
    std::string id;
    EventState initial_state;
    std::vector<Step> steps;

    bool operator==(const Report&) const = default;
};

enum class Split { unassigned, train, test };

struct Corpus {
    FeatureSchema schema;
    std::vector<Report> reports;
    std::vector<Split> splits;  // parallel to reports

    std::vector<const Report*> reports_in(Split which) const;
};

/// Corpus loading failure. `record` is the 1-based line number of the
/// offending record (0 when the error is not tied to one record).
class CorpusError : public std::runtime_error {
public:
    CorpusError(std::size_t record, const std::string& message);

    std::size_t record() const noexcept { return record_; }

private:
    std::size_t record_;
};

inline constexpr int kCorpusFormatVersion = 1;

/// Validates one report against the schema; throws CorpusError(record, ...).
void validate_report(const Report& report, const FeatureSchema& schema, std::size_t record = 0);

/// Validates the whole corpus: non-empty, unique ids, every report valid.
void validate_corpus(const Corpus& corpus);

Corpus read_corpus(std::istream& in);
Corpus load_corpus(const std::string& path);
void write_corpus(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::string& path);

/// Seeded random split; |train| = round(train_fraction * |reports|).
Corpus split(Corpus corpus, double train_fraction, std::uint64_t seed);

nlohmann::json to_json(const Report& report);
Report report_from_json(const nlohmann::json& doc, const FeatureSchema& schema);

}  // namespace iplan
