#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace iplan {

enum class FeatureKind { categorical, boolean, numeric };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text);

struct FeatureDef {
    std::string name;
    FeatureKind kind = FeatureKind::categorical;
    std::vector<std::string> categories;  // categorical only
    double min = 0.0;                     // numeric only
    double max = 1.0;
};

/// Operator intervention drawn from the corpus action vocabulary.
struct ActionId {
    std::string name;

    auto operator<=>(const ActionId&) const = default;
};

using FeatureValue = std::variant<std::string, bool, double>;

/// A feature assignment describing an incident at one moment.
/// Values are keyed by feature name; iteration order never matters because
/// every consumer walks the schema order instead.
struct EventState {
    std::map<std::string, FeatureValue> values;

    bool operator==(const EventState&) const = default;
};

using FeatureVector = std::vector<double>;

class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string feature, const std::string& message);

    const std::string& feature() const noexcept { return feature_; }

private:
    std::string feature_;
};

/// Feature layout plus the closed action vocabulary of a corpus.
///
/// `event_feature` names the categorical feature whose values are the event
/// types (used for categories and the next-event forecast).
/// `critical_features` are the features that decide the management action;
/// consistency perturbations may never touch them.
class FeatureSchema {
public:
    FeatureSchema() = default;
    FeatureSchema(std::vector<FeatureDef> features, std::vector<ActionId> actions,
                  std::string event_feature = {}, std::vector<std::string> critical_features = {});

    const std::vector<FeatureDef>& features() const noexcept { return features_; }
    const std::vector<ActionId>& actions() const noexcept { return actions_; }
    const std::string& event_feature() const noexcept { return event_feature_; }
    const std::vector<std::string>& critical_features() const noexcept { return critical_; }

    /// Length N of every encoded vector.
    std::size_t dimension() const noexcept { return dimension_; }
    /// First encoded component of feature `index`.
    std::size_t offset(std::size_t index) const { return offsets_.at(index); }
    /// Number of encoded components of feature `index`.
    std::size_t width(std::size_t index) const;

    const FeatureDef* find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;  // throws SchemaError
    const FeatureDef& event_def() const;
    bool has_action(const ActionId& action) const;
    bool is_critical(std::string_view name) const;

    /// Human-readable label for encoded component `dim`, e.g. "event_type=collision".
    std::string dimension_label(std::size_t dim) const;

    bool operator==(const FeatureSchema& other) const;

private:
    std::vector<FeatureDef> features_;
    std::vector<ActionId> actions_;
    std::string event_feature_;
    std::vector<std::string> critical_;
    std::vector<std::size_t> offsets_;
    std::size_t dimension_ = 0;
};

/// Throws SchemaError naming the first offending feature.
void validate_value(const FeatureDef& def, const FeatureValue& value);
void validate(const EventState& state, const FeatureSchema& schema);

FeatureVector encode(const EventState& state, const FeatureSchema& schema);

/// Canonical "name=value;..." key in schema order.
std::string state_key(const EventState& state, const FeatureSchema& schema);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

std::string format_value(const FeatureValue& value);

nlohmann::json to_json(const FeatureSchema& schema);
FeatureSchema schema_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const EventState& state);
/// Converts JSON values according to the schema kinds, then validates.
EventState state_from_json(const nlohmann::json& doc, const FeatureSchema& schema);
/// Same conversion and per-value checks, but features may be absent.
EventState partial_state_from_json(const nlohmann::json& doc, const FeatureSchema& schema);

FeatureSchema load_schema(const std::string& path);

}  // namespace iplan
