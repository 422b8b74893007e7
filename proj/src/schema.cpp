#include "iplan/schema.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

namespace iplan {

namespace {

bool is_identifier(std::string_view text) {
    if (text.empty()) return false;
    return std::all_of(text.begin(), text.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

}  // namespace

std::string_view to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::categorical: return "categorical";
        case FeatureKind::boolean: return "boolean";
        case FeatureKind::numeric: return "numeric";
    }
    return "unknown";
}

FeatureKind feature_kind_from_string(std::string_view text) {
    if (text == "categorical") return FeatureKind::categorical;
    if (text == "boolean") return FeatureKind::boolean;
    if (text == "numeric") return FeatureKind::numeric;
    throw SchemaError(std::string(text), "unknown feature kind");
}

SchemaError::SchemaError(std::string feature, const std::string& message)
    : std::runtime_error("feature '" + feature + "': " + message), feature_(std::move(feature)) {}

FeatureSchema::FeatureSchema(std::vector<FeatureDef> features, std::vector<ActionId> actions,
                             std::string event_feature, std::vector<std::string> critical_features)
    : features_(std::move(features)),
      actions_(std::move(actions)),
      event_feature_(std::move(event_feature)),
      critical_(std::move(critical_features)) {
    if (features_.empty()) throw SchemaError("", "schema declares no features");
    std::set<std::string> names;
    for (const auto& def : features_) {
        if (!is_identifier(def.name)) throw SchemaError(def.name, "invalid feature name");
        if (!names.insert(def.name).second) throw SchemaError(def.name, "duplicate feature name");
        switch (def.kind) {
            case FeatureKind::categorical: {
                if (def.categories.empty()) throw SchemaError(def.name, "empty category set");
                std::set<std::string> seen;
                for (const auto& c : def.categories) {
                    if (!is_identifier(c)) throw SchemaError(def.name, "invalid category '" + c + "'");
                    if (!seen.insert(c).second) throw SchemaError(def.name, "duplicate category '" + c + "'");
                }
                break;
            }
            case FeatureKind::numeric:
                if (!(def.min < def.max) || !std::isfinite(def.min) || !std::isfinite(def.max))
                    throw SchemaError(def.name, "numeric range requires finite min < max");
                break;
            case FeatureKind::boolean: break;
        }
    }

    std::set<ActionId> seen_actions;
    for (const auto& a : actions_) {
        if (!is_identifier(a.name)) throw SchemaError("", "invalid action name '" + a.name + "'");
        if (!seen_actions.insert(a).second) throw SchemaError("", "duplicate action '" + a.name + "'");
    }

    if (event_feature_.empty()) {
        auto it = std::find_if(features_.begin(), features_.end(),
                               [](const FeatureDef& d) { return d.kind == FeatureKind::categorical; });
        if (it != features_.end()) event_feature_ = it->name;
    } else {
        const auto* def = find(event_feature_);
        if (def == nullptr || def->kind != FeatureKind::categorical)
            throw SchemaError(event_feature_, "event feature must be a declared categorical feature");
    }
    for (const auto& name : critical_) {
        if (find(name) == nullptr) throw SchemaError(name, "critical feature is not declared");
    }

    offsets_.reserve(features_.size());
    for (std::size_t i = 0; i < features_.size(); ++i) {
        offsets_.push_back(dimension_);
        dimension_ += width(i);
    }
}

std::size_t FeatureSchema::width(std::size_t index) const {
    const auto& def = features_.at(index);
    return def.kind == FeatureKind::categorical ? def.categories.size() : 1;
}

const FeatureDef* FeatureSchema::find(std::string_view name) const {
    for (const auto& def : features_) {
        if (def.name == name) return &def;
    }
    return nullptr;
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (features_[i].name == name) return i;
    }
    throw SchemaError(std::string(name), "unknown feature");
}

const FeatureDef& FeatureSchema::event_def() const {
    const auto* def = find(event_feature_);
    if (def == nullptr) throw SchemaError(event_feature_, "schema has no event feature");
    return *def;
}

bool FeatureSchema::has_action(const ActionId& action) const {
    return std::find(actions_.begin(), actions_.end(), action) != actions_.end();
}

bool FeatureSchema::is_critical(std::string_view name) const {
    return std::find(critical_.begin(), critical_.end(), name) != critical_.end();
}

std::string FeatureSchema::dimension_label(std::size_t dim) const {
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (dim >= offsets_[i] && dim < offsets_[i] + width(i)) {
            const auto& def = features_[i];
            if (def.kind == FeatureKind::categorical) return def.name + "=" + def.categories[dim - offsets_[i]];
            return def.name;
        }
    }
    throw std::out_of_range("dimension out of range");
}

bool FeatureSchema::operator==(const FeatureSchema& other) const {
    if (features_.size() != other.features_.size()) return false;
    for (std::size_t i = 0; i < features_.size(); ++i) {
        const auto& a = features_[i];
        const auto& b = other.features_[i];
        if (a.name != b.name || a.kind != b.kind) return false;
        if (a.kind == FeatureKind::categorical && a.categories != b.categories) return false;
        if (a.kind == FeatureKind::numeric && (a.min != b.min || a.max != b.max)) return false;
    }
    return actions_ == other.actions_ && event_feature_ == other.event_feature_ && critical_ == other.critical_;
}

void validate_value(const FeatureDef& def, const FeatureValue& value) {
    switch (def.kind) {
        case FeatureKind::categorical: {
            const auto* text = std::get_if<std::string>(&value);
            if (text == nullptr) throw SchemaError(def.name, "expected a category value");
            if (std::find(def.categories.begin(), def.categories.end(), *text) == def.categories.end())
                throw SchemaError(def.name, "value '" + *text + "' is not in the category set");
            break;
        }
        case FeatureKind::boolean:
            if (!std::holds_alternative<bool>(value)) throw SchemaError(def.name, "expected a boolean");
            break;
        case FeatureKind::numeric: {
            const auto* number = std::get_if<double>(&value);
            if (number == nullptr) throw SchemaError(def.name, "expected a number");
            if (!std::isfinite(*number) || *number < def.min || *number > def.max)
                throw SchemaError(def.name, "value " + format_number(*number) + " outside [" + format_number(def.min) +
                                                ", " + format_number(def.max) + "]");
            break;
        }
    }
}

void validate(const EventState& state, const FeatureSchema& schema) {
    for (const auto& [name, value] : state.values) {
        if (schema.find(name) == nullptr) throw SchemaError(name, "unknown feature");
    }
    for (const auto& def : schema.features()) {
        auto it = state.values.find(def.name);
        if (it == state.values.end()) throw SchemaError(def.name, "missing value");
        validate_value(def, it->second);
    }
}

FeatureVector encode(const EventState& state, const FeatureSchema& schema) {
    validate(state, schema);
    FeatureVector out(schema.dimension(), 0.0);
    const auto& defs = schema.features();
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const auto& def = defs[i];
        const auto& value = state.values.at(def.name);
        const std::size_t base = schema.offset(i);
        switch (def.kind) {
            case FeatureKind::categorical: {
                const auto& text = std::get<std::string>(value);
                auto pos = std::find(def.categories.begin(), def.categories.end(), text) - def.categories.begin();
                out[base + static_cast<std::size_t>(pos)] = 1.0;
                break;
            }
            case FeatureKind::boolean: out[base] = std::get<bool>(value) ? 1.0 : 0.0; break;
            case FeatureKind::numeric:
                out[base] = (std::get<double>(value) - def.min) / (def.max - def.min);
                break;
        }
    }
    return out;
}

std::string format_number(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) throw std::runtime_error("cannot format number");
    return std::string(buffer, end);
}

std::string format_value(const FeatureValue& value) {
    if (const auto* text = std::get_if<std::string>(&value)) return *text;
    if (const auto* flag = std::get_if<bool>(&value)) return *flag ? "true" : "false";
    return format_number(std::get<double>(value));
}

std::string state_key(const EventState& state, const FeatureSchema& schema) {
    validate(state, schema);
    std::string key;
    for (const auto& def : schema.features()) {
        if (!key.empty()) key += ';';
        key += def.name;
        key += '=';
        key += format_value(state.values.at(def.name));
    }
    return key;
}

nlohmann::json to_json(const FeatureSchema& schema) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& def : schema.features()) {
        nlohmann::json f{{"name", def.name}, {"kind", std::string(to_string(def.kind))}};
        if (def.kind == FeatureKind::categorical) f["categories"] = def.categories;
        if (def.kind == FeatureKind::numeric) f["range"] = {def.min, def.max};
        features.push_back(std::move(f));
    }
    nlohmann::json actions = nlohmann::json::array();
    for (const auto& a : schema.actions()) actions.push_back(a.name);
    return {{"features", features},
            {"actions", actions},
            {"event_feature", schema.event_feature()},
            {"critical_features", schema.critical_features()}};
}

FeatureSchema schema_from_json(const nlohmann::json& doc) {
    std::vector<FeatureDef> features;
    for (const auto& f : doc.at("features")) {
        FeatureDef def;
        def.name = f.at("name").get<std::string>();
        def.kind = feature_kind_from_string(f.at("kind").get<std::string>());
        if (def.kind == FeatureKind::categorical) def.categories = f.at("categories").get<std::vector<std::string>>();
        if (def.kind == FeatureKind::numeric) {
            const auto& range = f.at("range");
            if (!range.is_array() || range.size() != 2) throw SchemaError(def.name, "range must be [min, max]");
            def.min = range[0].get<double>();
            def.max = range[1].get<double>();
        }
        features.push_back(std::move(def));
    }
    std::vector<ActionId> actions;
    for (const auto& a : doc.value("actions", nlohmann::json::array())) actions.push_back({a.get<std::string>()});
    return FeatureSchema(std::move(features), std::move(actions), doc.value("event_feature", std::string{}),
                         doc.value("critical_features", std::vector<std::string>{}));
}

nlohmann::json to_json(const EventState& state) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [name, value] : state.values) {
        std::visit([&](const auto& v) { out[name] = v; }, value);
    }
    return out;
}

EventState partial_state_from_json(const nlohmann::json& doc, const FeatureSchema& schema) {
    if (!doc.is_object()) throw SchemaError("", "state must be a JSON object");
    EventState state;
    for (const auto& [name, value] : doc.items()) {
        const auto* def = schema.find(name);
        if (def == nullptr) throw SchemaError(name, "unknown feature");
        switch (def->kind) {
            case FeatureKind::categorical:
                if (!value.is_string()) throw SchemaError(name, "expected a category value");
                state.values[name] = value.get<std::string>();
                break;
            case FeatureKind::boolean:
                if (!value.is_boolean()) throw SchemaError(name, "expected a boolean");
                state.values[name] = value.get<bool>();
                break;
            case FeatureKind::numeric:
                if (!value.is_number()) throw SchemaError(name, "expected a number");
                state.values[name] = value.get<double>();
                break;
        }
        validate_value(*def, state.values[name]);
    }
    return state;
}

EventState state_from_json(const nlohmann::json& doc, const FeatureSchema& schema) {
    auto state = partial_state_from_json(doc, schema);
    validate(state, schema);
    return state;
}

FeatureSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file " + path);
    return schema_from_json(nlohmann::json::parse(in));
}

}  // namespace iplan
