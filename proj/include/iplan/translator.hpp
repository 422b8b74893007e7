#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "iplan/recommender.hpp"

namespace iplan {

struct ProviderLimits {
    std::size_t max_tokens = 512;
    std::chrono::milliseconds timeout{10'000};
};

class ProviderError : public std::runtime_error {
public:
    ProviderError(const std::string& message, bool timed_out) : std::runtime_error(message), timed_out_(timed_out) {}
    bool timed_out() const noexcept { return timed_out_; }

private:
    bool timed_out_;
};

/// External text generation: prompt in, raw completion out.
class TranslationProvider {
public:
    virtual ~TranslationProvider() = default;
    virtual std::string name() const = 0;
    /// Throws ProviderError on failure (timed_out() for timeouts).
    virtual std::string complete(const std::string& prompt, const ProviderLimits& limits) = 0;
};

/// POSTs the prompt as text/plain to an HTTP(S) endpoint; the response body
/// is the completion. The key, when set, goes in "Authorization: Bearer".
class HttpProvider : public TranslationProvider {
public:
    HttpProvider(std::string url, std::string key = {});
    /// PROVIDER_URL / PROVIDER_KEY; nullptr when PROVIDER_URL is unset.
    static std::shared_ptr<HttpProvider> from_env();

    std::string name() const override { return "http"; }
    std::string complete(const std::string& prompt, const ProviderLimits& limits) override;

private:
    std::string base_;  // scheme://host[:port]
    std::string path_;
    std::string key_;
};

/// Instruction text, one worked example and the output grammar, with
/// {{placeholders}} filled at render time.
class PromptTemplate {
public:
    /// Templates compiled into the library, e.g. "parse_event.v1.txt".
    static PromptTemplate builtin(const std::string& name);
    static PromptTemplate from_text(std::string name, std::string text);

    const std::string& name() const noexcept { return name_; }
    const std::string& text() const noexcept { return text_; }
    std::size_t example_count() const;
    /// Throws std::invalid_argument on an unknown or unfilled placeholder.
    std::string render(const std::map<std::string, std::string>& values) const;

private:
    std::string name_;
    std::string text_;
};

/// Keyword tables for the deterministic parser.
struct FallbackRules {
    /// "feature" (boolean / numeric) or "feature=value" (categorical) -> phrases.
    std::map<std::string, std::vector<std::string>> phrases;
    std::set<std::string> required;
    std::map<std::string, FeatureValue> defaults;  // used when a feature is not mentioned

    /// Names and category values of the schema, plus highway synonyms for
    /// the features and values the schema actually declares.
    static FallbackRules for_schema(const FeatureSchema& schema);
};

struct ParseResult {
    std::optional<EventState> state;
    std::string provider_used;                  // provider name or "fallback"
    std::optional<std::string> fallback_reason;
    bool provider_timed_out = false;
    std::vector<std::string> missing;    // required features the text did not fill
    std::vector<std::string> defaulted;  // features filled from defaults
};

struct RenderResult {
    std::string text;
    std::string provider_used;
    std::optional<std::string> fallback_reason;
};

struct TranslatorTelemetry {
    std::atomic<std::uint64_t> provider_calls{0};
    std::atomic<std::uint64_t> provider_failures{0};
    std::atomic<std::uint64_t> provider_timeouts{0};
    std::atomic<std::uint64_t> malformed_outputs{0};
    std::atomic<std::uint64_t> fallbacks{0};
};

/// Canonical "name: value; ..." text in schema order.
std::string render_event(const EventState& state, const FeatureSchema& schema);

/// Rule-based parser: accepts the canonical render_event form exactly and
/// free text through the keyword tables.
ParseResult fallback_parse(const std::string& text, const FeatureSchema& schema, const FallbackRules& rules);

/// Numbered action lines "N. action (expected X min)" followed by both forecasts.
std::string render_plan_fallback(const Plan& plan);

/// Action sequence recovered from numbered plan lines.
std::vector<ActionId> extract_actions(const std::string& text);

/// Feature values of the first JSON object in provider output; each value is
/// checked, absent features are allowed.
std::map<std::string, FeatureValue> provider_values(const std::string& completion, const FeatureSchema& schema);

class Translator {
public:
    explicit Translator(FeatureSchema schema, std::shared_ptr<TranslationProvider> provider = nullptr,
                        ProviderLimits limits = {});

    /// Throws std::invalid_argument on empty text.
    ParseResult parse_event(const std::string& text) const;
    RenderResult render_plan(const Plan& plan) const;

    const FeatureSchema& schema() const noexcept { return schema_; }
    const FallbackRules& rules() const noexcept { return rules_; }
    const TranslatorTelemetry& telemetry() const noexcept { return *telemetry_; }

private:
    std::optional<std::string> call_provider(const std::string& prompt, bool& timed_out,
                                             std::string& error) const;

    FeatureSchema schema_;
    std::shared_ptr<TranslationProvider> provider_;
    ProviderLimits limits_;
    FallbackRules rules_;
    PromptTemplate parse_prompt_;
    PromptTemplate render_prompt_;
    std::shared_ptr<TranslatorTelemetry> telemetry_;
};

std::optional<std::string> embedded_prompt(const std::string& name);

}  // namespace iplan
