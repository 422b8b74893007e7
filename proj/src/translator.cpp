#include "iplan/translator.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <sstream>

#include <httplib.h>

namespace iplan {

namespace {

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string spaced(std::string s) {
    std::replace(s.begin(), s.end(), '_', ' ');
    std::replace(s.begin(), s.end(), '-', ' ');
    return lower(s);
}

std::optional<double> parse_double(const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

const std::map<std::string, double>& number_words() {
    static const std::map<std::string, double> words = {
        {"zero", 0},     {"no", 0},         {"a", 1},         {"an", 1},        {"one", 1},      {"single", 1},
        {"two", 2},      {"both", 2},       {"three", 3},     {"four", 4},      {"five", 5},     {"six", 6},
        {"seven", 7},    {"eight", 8},      {"nine", 9},      {"ten", 10},      {"eleven", 11},  {"twelve", 12},
        {"thirteen", 13}, {"fourteen", 14}, {"fifteen", 15},  {"sixteen", 16},  {"seventeen", 17}, {"eighteen", 18},
        {"nineteen", 19}, {"twenty", 20}};
    return words;
}

std::optional<double> token_number(const std::string& token) {
    if (auto v = parse_double(token)) return v;
    const auto& words = number_words();
    if (auto it = words.find(token); it != words.end()) return it->second;
    return std::nullopt;
}

bool is_negation(const std::string& token) {
    static const std::set<std::string> words = {"no", "not", "without", "nobody", "none", "zero", "non", "never"};
    return words.count(token) > 0;
}

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

// Lowercased words; numbers keep their decimal point, everything else that is
// not alphanumeric separates words.
std::vector<std::string> tokenize(const std::string& text) {
    std::string clean;
    clean.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        const bool digit_dot = c == '.' && i > 0 && i + 1 < text.size() &&
                               std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
                               std::isdigit(static_cast<unsigned char>(text[i + 1]));
        clean += (std::isalnum(c) || digit_dot) ? static_cast<char>(std::tolower(c)) : ' ';
    }
    return split_words(clean);
}

// Start positions of `phrase` (already tokenized) in `tokens`.
std::vector<std::size_t> find_phrase(const std::vector<std::string>& tokens, const std::vector<std::string>& phrase) {
    std::vector<std::size_t> hits;
    if (phrase.empty() || phrase.size() > tokens.size()) return hits;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) hits.push_back(i);
    }
    return hits;
}

// Highway vocabulary, applied only to keys the schema declares.
const std::map<std::string, std::vector<std::string>>& synonym_table() {
    static const std::map<std::string, std::vector<std::string>> table = {
        {"event_type=collision", {"crash", "crashed", "accident", "collided", "rear end", "pile up", "pileup"}},
        {"event_type=breakdown", {"broken down", "broke down", "stalled", "disabled vehicle", "breakdowns"}},
        {"event_type=debris", {"obstacle", "object on the road", "lost load", "spilled load", "object on the carriageway"}},
        {"event_type=congestion", {"traffic jam", "jam", "queue", "queues", "tailback", "slow traffic", "heavy traffic"}},
        {"status=responding", {"en route", "units responding", "on the way"}},
        {"status=securing", {"secured", "securing the scene"}},
        {"status=clearing", {"being cleared", "clean up", "cleanup"}},
        {"status=resolved", {"cleared", "reopened", "over"}},
        {"injured", {"injury", "injuries", "hurt", "wounded", "casualty", "casualties"}},
        {"lane_blocked", {"lanes blocked", "blocked lane", "blocked lanes", "lane closed", "lane obstructed",
                          "blocking the lane", "blocking a lane", "lane is blocked"}},
        {"vehicles", {"vehicle", "car", "cars", "truck", "trucks", "lorry", "lorries"}},
        {"km", {"kilometre", "kilometer", "kilometres", "kilometers", "km marker"}},
        {"hour", {"time", "hours", "h"}},
    };
    return table;
}

// Fills features the text left open; records required features that stay empty.
void complete_state(std::map<std::string, FeatureValue>& values, const FeatureSchema& schema,
                    const FallbackRules& rules, ParseResult& result) {
    for (const auto& f : schema.features()) {
        if (values.count(f.name)) continue;
        if (rules.required.count(f.name)) {
            result.missing.push_back(f.name);
            continue;
        }
        if (auto it = rules.defaults.find(f.name); it != rules.defaults.end()) {
            values[f.name] = it->second;
            result.defaulted.push_back(f.name);
        } else {
            result.missing.push_back(f.name);
        }
    }
}

std::optional<FeatureValue> canonical_value(const FeatureDef& def, const std::string& text) {
    switch (def.kind) {
        case FeatureKind::categorical:
            if (std::find(def.categories.begin(), def.categories.end(), text) != def.categories.end()) return text;
            return std::nullopt;
        case FeatureKind::boolean: {
            const auto t = lower(text);
            if (t == "yes" || t == "true") return true;
            if (t == "no" || t == "false") return false;
            return std::nullopt;
        }
        case FeatureKind::numeric:
            if (auto v = parse_double(text); v && *v >= def.min && *v <= def.max) return *v;
            return std::nullopt;
    }
    return std::nullopt;
}

// "name: value; ..." exactly as render_event writes it.
std::optional<EventState> parse_canonical(const std::string& text, const FeatureSchema& schema) {
    EventState state;
    std::istringstream in(text);
    for (std::string part; std::getline(in, part, ';');) {
        part = trim(part);
        if (part.empty()) continue;
        const auto colon = part.find(':');
        if (colon == std::string::npos) return std::nullopt;
        const auto name = trim(part.substr(0, colon));
        const auto* def = schema.find(name);
        if (def == nullptr || state.values.count(name)) return std::nullopt;
        auto value = canonical_value(*def, trim(part.substr(colon + 1)));
        if (!value) return std::nullopt;
        state.values[name] = *value;
    }
    if (state.values.size() != schema.features().size()) return std::nullopt;
    return state;
}

std::string features_description(const FeatureSchema& schema) {
    std::string out;
    for (const auto& f : schema.features()) {
        out += "- " + f.name + " (" + std::string(to_string(f.kind));
        if (f.kind == FeatureKind::categorical) {
            out += ": ";
            for (std::size_t i = 0; i < f.categories.size(); ++i) out += (i ? ", " : "") + f.categories[i];
        } else if (f.kind == FeatureKind::numeric) {
            out += ", " + format_number(f.min) + " to " + format_number(f.max);
        }
        out += ")\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

}  // namespace

// ---------------------------------------------------------------- providers

HttpProvider::HttpProvider(std::string url, std::string key) : key_(std::move(key)) {
    static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) throw std::invalid_argument("invalid provider URL '" + url + "'");
    base_ = m[1];
    path_ = m[2].matched ? std::string(m[2]) : "/";
}

std::shared_ptr<HttpProvider> HttpProvider::from_env() {
    const char* url = std::getenv("PROVIDER_URL");
    if (url == nullptr || *url == '\0') return nullptr;
    const char* key = std::getenv("PROVIDER_KEY");
    return std::make_shared<HttpProvider>(url, key ? key : "");
}

std::string HttpProvider::complete(const std::string& prompt, const ProviderLimits& limits) {
    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(limits.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(limits.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers{{"X-Max-Tokens", std::to_string(limits.max_tokens)}};
    if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
    auto res = client.Post(path_, headers, prompt, "text/plain");
    if (!res) {
        const auto err = res.error();
        const bool timeout = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                             err == httplib::Error::Write;
        throw ProviderError("provider request failed: " + httplib::to_string(err), timeout);
    }
    if (res->status != 200) throw ProviderError("provider returned HTTP " + std::to_string(res->status), false);
    return res->body;
}

// ----------------------------------------------------------------- prompts

PromptTemplate PromptTemplate::builtin(const std::string& name) {
    auto text = embedded_prompt(name);
    if (!text) throw std::invalid_argument("unknown prompt template '" + name + "'");
    return from_text(name, std::move(*text));
}

PromptTemplate PromptTemplate::from_text(std::string name, std::string text) {
    PromptTemplate t;
    t.name_ = std::move(name);
    t.text_ = std::move(text);
    if (t.example_count() != 1)
        throw std::invalid_argument("prompt template '" + t.name_ + "' must contain exactly one example");
    return t;
}

std::size_t PromptTemplate::example_count() const {
    std::size_t count = 0;
    for (auto pos = text_.find("### Example"); pos != std::string::npos; pos = text_.find("### Example", pos + 1))
        ++count;
    return count;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = text_.find("{{", pos);
        if (open == std::string::npos) break;
        const auto close = text_.find("}}", open);
        if (close == std::string::npos) throw std::invalid_argument("unterminated placeholder in " + name_);
        const auto key = text_.substr(open + 2, close - open - 2);
        auto it = values.find(key);
        if (it == values.end()) throw std::invalid_argument("no value for placeholder '" + key + "' in " + name_);
        out += text_.substr(pos, open - pos);
        out += it->second;
        pos = close + 2;
    }
    out += text_.substr(pos);
    return out;
}

// ------------------------------------------------------------------- rules

FallbackRules FallbackRules::for_schema(const FeatureSchema& schema) {
    FallbackRules rules;
    const auto& synonyms = synonym_table();
    auto add = [&](const std::string& key, const std::string& base) {
        auto& list = rules.phrases[key];
        list.push_back(spaced(base));
        if (auto it = synonyms.find(key); it != synonyms.end()) {
            for (const auto& s : it->second) list.push_back(spaced(s));
        }
    };
    for (const auto& f : schema.features()) {
        switch (f.kind) {
            case FeatureKind::categorical:
                for (const auto& c : f.categories) add(f.name + "=" + c, c);
                if (f.name == schema.event_feature()) {
                    rules.required.insert(f.name);
                } else {
                    rules.defaults[f.name] = f.categories.front();
                }
                break;
            case FeatureKind::boolean:
                add(f.name, f.name);
                rules.defaults[f.name] = false;
                break;
            case FeatureKind::numeric:
                add(f.name, f.name);
                rules.defaults[f.name] = (f.min + f.max) / 2.0;
                break;
        }
    }
    return rules;
}

// ------------------------------------------------------------ parse/render

std::string render_event(const EventState& state, const FeatureSchema& schema) {
    validate(state, schema);
    std::string out;
    for (const auto& f : schema.features()) {
        if (!out.empty()) out += "; ";
        const auto& v = state.values.at(f.name);
        out += f.name + ": ";
        if (f.kind == FeatureKind::boolean) {
            out += std::get<bool>(v) ? "yes" : "no";
        } else {
            out += format_value(v);
        }
    }
    return out;
}

ParseResult fallback_parse(const std::string& text, const FeatureSchema& schema, const FallbackRules& rules) {
    ParseResult result;
    result.provider_used = "fallback";
    if (auto canonical = parse_canonical(text, schema)) {
        result.state = std::move(canonical);
        return result;
    }

    std::map<std::string, FeatureValue> values;

    // Clock times ("14:30") feed a numeric feature called hour or time.
    static const std::regex clock(R"((\d{1,2}):(\d{2}))");
    std::smatch m;
    if (std::regex_search(text, m, clock)) {
        const double h = std::stod(m[1]) + std::stod(m[2]) / 60.0;
        for (const char* name : {"hour", "time"}) {
            const auto* def = schema.find(name);
            if (def && def->kind == FeatureKind::numeric && h >= def->min && h <= def->max) {
                values[name] = h;
                break;
            }
        }
    }
    const auto tokens = tokenize(std::regex_replace(text, clock, " "));

    for (const auto& f : schema.features()) {
        if (values.count(f.name)) continue;
        if (f.kind == FeatureKind::categorical) {
            // Earliest mention wins; longer phrases win at equal positions.
            std::optional<std::pair<std::size_t, std::size_t>> best;  // (position, -length)
            std::string chosen;
            for (const auto& c : f.categories) {
                auto it = rules.phrases.find(f.name + "=" + c);
                if (it == rules.phrases.end()) continue;
                for (const auto& phrase : it->second) {
                    const auto words = split_words(phrase);
                    for (auto pos : find_phrase(tokens, words)) {
                        const std::pair<std::size_t, std::size_t> key{pos, tokens.size() - words.size()};
                        if (!best || key < *best) {
                            best = key;
                            chosen = c;
                        }
                    }
                }
            }
            if (best) values[f.name] = chosen;
            continue;
        }
        auto it = rules.phrases.find(f.name);
        if (it == rules.phrases.end()) continue;
        if (f.kind == FeatureKind::boolean) {
            std::optional<bool> seen;
            for (const auto& phrase : it->second) {
                const auto words = split_words(phrase);
                for (auto pos : find_phrase(tokens, words)) {
                    bool negated = false;
                    for (std::size_t back = 1; back <= 2 && back <= pos; ++back)
                        negated = negated || is_negation(tokens[pos - back]);
                    const auto after = pos + words.size();
                    if (after < tokens.size() && (tokens[after] == "no" || tokens[after] == "false")) negated = true;
                    if (!seen || !negated) seen = !negated;
                }
            }
            if (seen) values[f.name] = *seen;
            continue;
        }
        // Numeric: a number right after the phrase, else right before it.
        std::optional<std::pair<std::size_t, double>> found;
        for (const auto& phrase : it->second) {
            const auto words = split_words(phrase);
            for (auto pos : find_phrase(tokens, words)) {
                std::optional<double> v;
                const auto after = pos + words.size();
                if (after < tokens.size()) v = parse_double(tokens[after]);
                if (!v && pos > 0) v = token_number(tokens[pos - 1]);
                if (v && *v >= f.min && *v <= f.max && (!found || pos < found->first)) found = {{pos, *v}};
            }
        }
        if (found) values[f.name] = found->second;
    }

    complete_state(values, schema, rules, result);
    if (result.missing.empty()) {
        EventState state{std::move(values)};
        validate(state, schema);
        result.state = std::move(state);
    }
    return result;
}

std::string render_plan_fallback(const Plan& plan) {
    if (plan.steps.empty()) return "Event already resolved; no action required.";
    std::ostringstream out;
    out << "Recommended actions (matched node " << plan.match.node << ", distance " << format_number(plan.match.distance)
        << (plan.match.low_confidence ? ", LOW CONFIDENCE match" : "") << "):\n";
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const auto& s = plan.steps[i];
        out << i + 1 << ". " << s.action.name << " (expected " << format_number(std::round(s.expected_duration_min * 10) / 10)
            << " min)\n";
    }
    out << "Total expected time along this path: " << format_number(std::round(plan.total_expected_min * 10) / 10)
        << " min.\n";
    out << "Predicted resolution time: " << format_number(std::round(plan.forecast.expected_resolution_min * 10) / 10)
        << " min.\n";
    out << "Probability of a subsequent event:";
    bool first = true;
    for (const auto& [type, p] : plan.forecast.next_event_probs) {
        out << (first ? " " : ", ") << type << ' ' << format_number(std::round(p * 1000) / 1000);
        first = false;
    }
    out << '.';
    return out.str();
}

std::vector<ActionId> extract_actions(const std::string& text) {
    static const std::regex line(R"(^\s*\d+\.\s+([A-Za-z0-9_-]+)\s+\(expected)");
    std::vector<ActionId> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) {
        std::smatch m;
        if (std::regex_search(l, m, line)) out.push_back(ActionId{m[1]});
    }
    return out;
}

std::map<std::string, FeatureValue> provider_values(const std::string& completion, const FeatureSchema& schema) {
    const auto open = completion.find('{');
    const auto close = completion.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw std::invalid_argument("provider output holds no JSON object");
    return partial_state_from_json(nlohmann::json::parse(completion.substr(open, close - open + 1)), schema).values;
}

// -------------------------------------------------------------- translator

Translator::Translator(FeatureSchema schema, std::shared_ptr<TranslationProvider> provider, ProviderLimits limits)
    : schema_(std::move(schema)),
      provider_(std::move(provider)),
      limits_(limits),
      rules_(FallbackRules::for_schema(schema_)),
      parse_prompt_(PromptTemplate::builtin("parse_event.v1.txt")),
      render_prompt_(PromptTemplate::builtin("render_plan.v1.txt")),
      telemetry_(std::make_shared<TranslatorTelemetry>()) {}

std::optional<std::string> Translator::call_provider(const std::string& prompt, bool& timed_out,
                                                     std::string& error) const {
    timed_out = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
        ++telemetry_->provider_calls;
        try {
            return provider_->complete(prompt, limits_);
        } catch (const ProviderError& e) {
            ++telemetry_->provider_failures;
            error = e.what();
            if (!e.timed_out()) return std::nullopt;
            ++telemetry_->provider_timeouts;
            timed_out = true;
        } catch (const std::exception& e) {
            ++telemetry_->provider_failures;
            error = e.what();
            return std::nullopt;
        }
    }
    return std::nullopt;
}

ParseResult Translator::parse_event(const std::string& text) const {
    if (trim(text).empty()) throw std::invalid_argument("event text is empty");
    std::string reason;
    bool timed_out = false;
    if (provider_) {
        const auto prompt = parse_prompt_.render({{"features", features_description(schema_)}, {"input", text}});
        std::string error;
        if (auto completion = call_provider(prompt, timed_out, error)) {
            try {
                ParseResult result;
                result.provider_used = provider_->name();
                // Features the provider left out follow the fallback defaults.
                auto values = provider_values(*completion, schema_);
                complete_state(values, schema_, rules_, result);
                if (!result.missing.empty()) throw std::invalid_argument("provider output misses required features");
                EventState state{std::move(values)};
                validate(state, schema_);
                result.state = std::move(state);
                return result;
            } catch (const std::exception& e) {
                ++telemetry_->malformed_outputs;
                reason = std::string("malformed provider output: ") + e.what();
            }
        } else {
            reason = timed_out ? "provider timed out: " + error : "provider failed: " + error;
        }
    } else {
        reason = "no provider configured";
    }
    ++telemetry_->fallbacks;
    auto result = fallback_parse(text, schema_, rules_);
    result.fallback_reason = reason;
    result.provider_timed_out = timed_out;
    return result;
}

RenderResult Translator::render_plan(const Plan& plan) const {
    const auto canonical = render_plan_fallback(plan);
    std::string reason = "no provider configured";
    if (provider_ && !plan.steps.empty()) {
        bool timed_out = false;
        std::string error;
        if (auto completion = call_provider(render_prompt_.render({{"plan", canonical}}), timed_out, error)) {
            // Accept the briefing only if it keeps the action sequence intact.
            if (extract_actions(*completion) == plan.actions()) return {trim(*completion), provider_->name(), {}};
            ++telemetry_->malformed_outputs;
            reason = "provider briefing altered the action sequence";
        } else {
            reason = timed_out ? "provider timed out: " + error : "provider failed: " + error;
        }
    } else if (provider_) {
        reason = "empty plan";
    }
    ++telemetry_->fallbacks;
    return {canonical, "fallback", reason};
}

}  // namespace iplan
