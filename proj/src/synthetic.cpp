#include "iplan/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>

namespace iplan {

void SyntheticSpec::validate() const {
    if (n_reports < 1) throw std::invalid_argument("synthetic spec: n_reports must be >= 1");
    if (n_policies < 1) throw std::invalid_argument("synthetic spec: n_policies must be >= 1");
    if (n_classes < 1) throw std::invalid_argument("synthetic spec: n_classes must be >= 1");
    if (!(noise >= 0.0 && noise <= 1.0)) throw std::invalid_argument("synthetic spec: noise must lie in [0, 1]");
    if (!(subsequent_event_probability >= 0.0 && subsequent_event_probability <= 1.0))
        throw std::invalid_argument("synthetic spec: subsequent_event_probability must lie in [0, 1]");
}

FeatureSchema reference_schema() {
    std::vector<FeatureDef> features{
        {"event_type", FeatureKind::categorical, {"breakdown", "collision", "debris", "congestion"}, 0, 1},
        {"vehicles", FeatureKind::numeric, {}, 0, 10},
        {"injured", FeatureKind::boolean, {}, 0, 1},
        {"lane_blocked", FeatureKind::boolean, {}, 0, 1},
        {"km", FeatureKind::numeric, {}, 0, 200},
        {"hour", FeatureKind::numeric, {}, 0, 24},
        {"status", FeatureKind::categorical, {"reported", "responding", "securing", "clearing", "resolved"}, 0, 1},
    };
    std::vector<ActionId> actions{{"call-police"},    {"call-ambulance"}, {"call-fire-brigade"},
                                  {"call-tow-truck"}, {"close-lane"},     {"reopen-lane"},
                                  {"dispatch-patrol"}, {"send-road-crew"}, {"issue-traffic-alert"}};
    return FeatureSchema(std::move(features), std::move(actions), "event_type",
                         {"event_type", "vehicles", "injured", "lane_blocked", "status"});
}

namespace {

struct DurationModel {
    double log_mean;
    double log_sd;
};

std::vector<double> vehicle_counts(const std::string& event_class) {
    if (event_class == "breakdown") return {1};
    if (event_class == "collision") return {2, 2, 3, 4};
    return {0};
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, const FeatureSchema& schema) {
    spec.validate();
    const auto& event_def = schema.event_def();
    const auto* status_def = schema.find("status");
    if (status_def == nullptr || status_def->kind != FeatureKind::categorical || status_def->categories.size() < 2)
        throw std::invalid_argument("synthetic generation needs a categorical 'status' feature with >= 2 stages");
    if (schema.actions().size() < 2) throw std::invalid_argument("synthetic generation needs >= 2 actions");

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t n_classes = std::min({spec.n_classes, spec.n_policies, event_def.categories.size()});
    std::vector<std::string> classes(event_def.categories.begin(), event_def.categories.begin() + n_classes);
    std::optional<std::string> subsequent;
    if (event_def.categories.size() > n_classes) subsequent = event_def.categories[n_classes];

    const auto& stages = status_def->categories;
    const std::size_t max_len = std::min<std::size_t>(4, stages.size() - 1);
    const std::size_t min_len = std::min<std::size_t>(2, max_len);

    SyntheticCorpus out;
    out.corpus.schema = schema;

    // Ground-truth policies: distinct sequences of distinct actions.
    std::set<std::vector<ActionId>> seen;
    std::size_t attempts = 0;
    while (out.policies.size() < spec.n_policies) {
        if (++attempts > 10000) throw std::invalid_argument("action vocabulary too small for the requested policies");
        std::vector<ActionId> pool = schema.actions();
        std::shuffle(pool.begin(), pool.end(), rng);
        std::uniform_int_distribution<std::size_t> len_dist(min_len, std::min(max_len, pool.size()));
        pool.resize(len_dist(rng));
        if (!seen.insert(pool).second) continue;
        out.policy_class.push_back(classes[out.policies.size() % n_classes]);
        out.policies.push_back(std::move(pool));
    }
    std::map<std::string, std::vector<std::size_t>> class_policies;
    for (std::size_t p = 0; p < out.policies.size(); ++p) class_policies[out.policy_class[p]].push_back(p);
    for (const auto& [cls, ids] : class_policies) out.class_reference[cls] = out.policies[ids.front()];

    std::map<ActionId, DurationModel> durations;
    for (const auto& a : schema.actions()) {
        const double median = 4.0 + 21.0 * unit(rng);
        durations[a] = {std::log(median), 0.25 + 0.35 * unit(rng)};
    }

    // Non-critical numeric features take values from a few recurring spots
    // (interchanges, reporting hours) so that descriptions repeat.
    std::map<std::string, std::vector<double>> spots;
    for (const auto& def : schema.features()) {
        if (def.kind != FeatureKind::numeric || schema.is_critical(def.name)) continue;
        std::uniform_real_distribution<double> in_range(def.min, def.max);
        auto& values = spots[def.name];
        for (int i = 0; i < 4; ++i) values.push_back(std::clamp(std::round(in_range(rng)), def.min, def.max));
    }

    auto draw_duration = [&](const ActionId& a) {
        const auto& model = durations.at(a);
        std::lognormal_distribution<double> dist(model.log_mean, model.log_sd);
        return std::max(0.1, std::round(dist(rng) * 10.0) / 10.0);
    };

    for (std::size_t r = 0; r < spec.n_reports; ++r) {
        std::uniform_int_distribution<std::size_t> class_dist(0, n_classes - 1);
        const std::string& cls = classes[class_dist(rng)];

        EventState state;
        unsigned selector = 0;
        unsigned bit = 0;
        for (const auto& def : schema.features()) {
            if (def.name == event_def.name) {
                state.values[def.name] = cls;
            } else if (def.name == status_def->name) {
                state.values[def.name] = stages.front();
            } else if (def.kind == FeatureKind::boolean) {
                const bool critical = schema.is_critical(def.name);
                const bool value = unit(rng) < (critical ? 0.4 : 0.5);
                state.values[def.name] = value;
                if (critical) selector |= (value ? 1u : 0u) << bit++;
            } else if (def.kind == FeatureKind::categorical) {
                std::uniform_int_distribution<std::size_t> pick(0, def.categories.size() - 1);
                state.values[def.name] = def.categories[pick(rng)];
            } else if (def.name == "vehicles") {
                auto counts = vehicle_counts(cls);
                std::uniform_int_distribution<std::size_t> pick(0, counts.size() - 1);
                state.values[def.name] = std::clamp(counts[pick(rng)], def.min, def.max);
            } else if (auto it = spots.find(def.name); it != spots.end()) {
                std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
                state.values[def.name] = it->second[pick(rng)];
            } else {
                state.values[def.name] = def.min;
            }
        }

        const auto& candidates = class_policies.at(cls);
        const std::size_t policy = candidates[selector % candidates.size()];
        const auto& pattern = out.policies[policy];

        Report report;
        char id[32];
        std::snprintf(id, sizeof(id), "R%05zu", r + 1);
        report.id = id;
        report.initial_state = state;

        GroundTruth truth{cls, policy, pattern, {}};
        EventState current = state;
        for (std::size_t j = 0; j < pattern.size(); ++j) {
            const bool last = j + 1 == pattern.size();
            EventState next = current;
            next.values[status_def->name] = last ? stages.back() : stages[j + 1];
            if (!last && subsequent && std::get<std::string>(current.values.at(event_def.name)) != *subsequent &&
                unit(rng) < spec.subsequent_event_probability) {
                next.values[event_def.name] = *subsequent;
            }

            Deviation deviation = Deviation::none;
            if (spec.noise > 0.0 && unit(rng) < spec.noise) {
                std::vector<ActionId> others;
                for (const auto& a : schema.actions()) {
                    if (a != pattern[j]) others.push_back(a);
                }
                std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
                const ActionId off = others[pick(rng)];
                if (unit(rng) < 0.5) {
                    deviation = Deviation::ineffective;
                    report.steps.push_back({off, draw_duration(off), current, false});
                } else {
                    deviation = Deviation::substituted;
                    report.steps.push_back({off, draw_duration(off), next, last});
                }
            }
            truth.deviations.push_back(deviation);
            if (deviation != Deviation::substituted) {
                report.steps.push_back({pattern[j], draw_duration(pattern[j]), next, last});
            }
            current = next;
        }

        out.corpus.reports.push_back(std::move(report));
        out.corpus.splits.push_back(Split::unassigned);
        out.truth.push_back(std::move(truth));
    }
    return out;
}

}  // namespace iplan
