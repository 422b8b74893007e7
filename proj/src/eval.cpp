#include "iplan/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace iplan {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;
constexpr std::size_t kUnmatched = static_cast<std::size_t>(-1);

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : text) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

// Sums a matching in row order so the total does not depend on column order.
double matching_sum(const std::vector<std::vector<double>>& gain, const std::vector<std::size_t>& col_of_row) {
    double total = 0.0;
    for (std::size_t i = 0; i < gain.size(); ++i) {
        if (col_of_row[i] != kUnmatched) total += gain[i][col_of_row[i]];
    }
    return total;
}

void exhaustive(const std::vector<std::vector<double>>& gain, bool by_rows, std::size_t depth,
                std::vector<bool>& used, std::vector<std::size_t>& col_of_row, double& best) {
    const std::size_t rows = gain.size();
    const std::size_t cols = gain[0].size();
    const std::size_t outer = by_rows ? rows : cols;
    const std::size_t inner = by_rows ? cols : rows;
    if (depth == outer) {
        best = std::max(best, matching_sum(gain, col_of_row));
        return;
    }
    for (std::size_t k = 0; k < inner; ++k) {
        if (used[k]) continue;
        used[k] = true;
        if (by_rows) {
            col_of_row[depth] = k;
        } else {
            col_of_row[k] = depth;
        }
        exhaustive(gain, by_rows, depth + 1, used, col_of_row, best);
        if (by_rows) {
            col_of_row[depth] = kUnmatched;
        } else {
            col_of_row[k] = kUnmatched;
        }
        used[k] = false;
    }
}

double quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test: return "test";
        case Split::unassigned: return "all";
    }
    return "all";
}

nlohmann::json to_json(const Distribution& d) {
    return {{"min", d.min}, {"q1", d.q1}, {"median", d.median}, {"q3", d.q3}, {"max", d.max}, {"mean", d.mean}};
}

Distribution distribution_from_json(const nlohmann::json& j) {
    return {j.at("min").get<double>(), j.at("q1").get<double>(),  j.at("median").get<double>(),
            j.at("q3").get<double>(),  j.at("max").get<double>(), j.at("mean").get<double>()};
}

}  // namespace

// --------------------------------------------------------------- embedding

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::size_t n) : dimension_(dimension), n_(n) {
    if (dimension_ == 0 || n_ == 0) throw std::invalid_argument("embedder needs a positive dimension and n");
}

std::string HashingEmbedder::name() const {
    return "hashing-" + std::to_string(n_) + "gram-" + std::to_string(dimension_);
}

std::vector<double> HashingEmbedder::embed(const std::string& text) const {
    std::string t;
    t.reserve(text.size());
    for (unsigned char c : text) t += static_cast<char>(std::tolower(c));
    std::vector<double> v(dimension_, 0.0);
    if (t.empty()) return v;
    if (t.size() < n_) t.append(n_ - t.size(), ' ');
    for (std::size_t i = 0; i + n_ <= t.size(); ++i) {
        const auto h = fnv1a(std::string_view(t).substr(i, n_));
        v[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (auto& x : v) x /= norm;
    }
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine of vectors with different lengths");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string random_letters(std::size_t length, std::mt19937_64& rng) {
    static constexpr std::string_view letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";
    std::uniform_int_distribution<std::size_t> pick(0, letters.size() - 1);
    std::string out(length, ' ');
    for (auto& c : out) c = letters[pick(rng)];
    return out;
}

double random_baseline(const std::string& m_text, std::uint64_t seed, const EmbeddingProvider& embedder,
                       std::size_t draws) {
    if (m_text.empty()) throw std::invalid_argument("baseline of an empty text");
    if (draws == 0) throw std::invalid_argument("baseline needs at least one draw");
    std::seed_seq seq{seed, fnv1a(m_text)};
    std::mt19937_64 rng(seq);
    const auto m = embedder.embed(m_text);
    double total = 0.0;
    for (std::size_t d = 0; d < draws; ++d) total += cosine(m, embedder.embed(random_letters(m_text.size(), rng)));
    return total / static_cast<double>(draws);
}

// -------------------------------------------------------------- assignment

double best_assignment_exhaustive(const std::vector<std::vector<double>>& gain) {
    if (gain.empty() || gain[0].empty()) return 0.0;
    const bool by_rows = gain.size() <= gain[0].size();
    std::vector<bool> used(by_rows ? gain[0].size() : gain.size(), false);
    std::vector<std::size_t> col_of_row(gain.size(), kUnmatched);
    double best = -std::numeric_limits<double>::infinity();
    exhaustive(gain, by_rows, 0, used, col_of_row, best);
    return best;
}

double best_assignment_hungarian(const std::vector<std::vector<double>>& gain) {
    if (gain.empty() || gain[0].empty()) return 0.0;
    const std::size_t rows = gain.size();
    const std::size_t cols = gain[0].size();
    const std::size_t n = std::max(rows, cols);
    // Square minimisation problem; padding entries cost 0.
    auto cost = [&](std::size_t i, std::size_t j) { return (i < rows && j < cols) ? -gain[i][j] : 0.0; };
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<bool> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> col_of_row(rows, kUnmatched);
    for (std::size_t j = 1; j <= n; ++j) {
        const std::size_t i = p[j] - 1;
        if (i < rows && j - 1 < cols) col_of_row[i] = j - 1;
    }
    return matching_sum(gain, col_of_row);
}

double best_assignment(const std::vector<std::vector<double>>& gain) {
    if (gain.empty() || gain[0].empty()) return 0.0;
    if (std::max(gain.size(), gain[0].size()) <= 8) return best_assignment_exhaustive(gain);
    return best_assignment_hungarian(gain);
}

// ------------------------------------------------------------------ score

std::vector<std::vector<double>> score_terms(const std::vector<std::string>& predicted,
                                             const std::vector<std::string>& manual,
                                             const EmbeddingProvider& embedder, std::uint64_t seed) {
    if (manual.empty()) throw std::invalid_argument("score needs at least one manual action");
    std::vector<std::vector<double>> a;
    a.reserve(predicted.size());
    for (const auto& t : predicted) a.push_back(embedder.embed(t));
    std::vector<std::vector<double>> terms(manual.size(), std::vector<double>(predicted.size(), 0.0));
    for (std::size_t i = 0; i < manual.size(); ++i) {
        const auto m = embedder.embed(manual[i]);
        const double baseline = random_baseline(manual[i], seed, embedder);
        for (std::size_t j = 0; j < predicted.size(); ++j)
            terms[i][j] = (cosine(m, a[j]) - baseline) / (1.0 - baseline);
    }
    return terms;
}

double score(const std::vector<std::string>& predicted, const std::vector<std::string>& manual,
             const EmbeddingProvider& embedder, std::uint64_t seed) {
    const auto terms = score_terms(predicted, manual, embedder, seed);
    if (predicted.empty()) return 0.0;
    return best_assignment(terms) / static_cast<double>(manual.size());
}

// ------------------------------------------------------------ perturbation

PerturbationSpec PerturbationSpec::identity(std::size_t count) {
    PerturbationSpec spec;
    spec.count = count;
    return spec;
}

void PerturbationSpec::validate(const FeatureSchema& schema) const {
    if (count == 0) throw std::invalid_argument("perturbation spec must produce at least one variant");
    for (const auto& e : edits) {
        if (e.kind == FeatureEdit::Kind::identity) continue;
        const auto* def = schema.find(e.feature);
        if (def == nullptr) throw std::invalid_argument("edit of unknown feature '" + e.feature + "'");
        if (schema.is_critical(e.feature))
            throw std::invalid_argument("edit touches decision-critical feature '" + e.feature + "'");
        if (e.kind == FeatureEdit::Kind::shift) {
            if (def->kind != FeatureKind::numeric)
                throw std::invalid_argument("shift edit on non-numeric feature '" + e.feature + "'");
            if (!(e.delta >= 0.0)) throw std::invalid_argument("shift edit needs delta >= 0");
        } else {
            validate_value(*def, e.value);
        }
    }
}

std::vector<EventState> PerturbationSpec::variants(const EventState& event, const FeatureSchema& schema,
                                                   std::uint64_t event_index) const {
    validate(schema);
    std::seed_seq seq{seed, event_index};
    std::mt19937_64 rng(seq);
    std::vector<EventState> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        EventState v = event;
        for (const auto& e : edits) {
            if (e.kind == FeatureEdit::Kind::identity) continue;
            if (e.kind == FeatureEdit::Kind::set) {
                v.values[e.feature] = e.value;
                continue;
            }
            const auto* def = schema.find(e.feature);
            std::uniform_real_distribution<double> shift(-e.delta, e.delta);
            const double x = std::get<double>(v.values.at(e.feature)) + shift(rng);
            v.values[e.feature] = std::clamp(x, def->min, def->max);
        }
        out.push_back(std::move(v));
    }
    return out;
}

double consistency(const RecommendFn& recommend_fn, const EventState& event, const PerturbationSpec& spec,
                   const FeatureSchema& schema, std::uint64_t event_index) {
    const auto variants = spec.variants(event, schema, event_index);
    std::optional<std::vector<ActionId>> base;
    try {
        base = recommend_fn(event);
    } catch (const std::exception&) {
        return 0.0;
    }
    std::size_t same = 0;
    for (const auto& v : variants) {
        try {
            if (recommend_fn(v) == *base) ++same;
        } catch (const std::exception&) {
        }
    }
    return 100.0 * static_cast<double>(same) / static_cast<double>(variants.size());
}

// -------------------------------------------------------------- references

std::string ReferenceSet::text_of(const ActionId& action) const {
    if (auto it = action_texts.find(action.name); it != action_texts.end()) return it->second;
    std::string t = action.name;
    std::replace(t.begin(), t.end(), '-', ' ');
    std::replace(t.begin(), t.end(), '_', ' ');
    return t;
}

std::vector<std::string> ReferenceSet::texts_of(const std::vector<ActionId>& actions) const {
    std::vector<std::string> out;
    out.reserve(actions.size());
    for (const auto& a : actions) out.push_back(text_of(a));
    return out;
}

void ReferenceSet::validate() const {
    if (categories.empty()) throw std::invalid_argument("reference set declares no categories");
    for (const auto& [category, texts] : categories) {
        if (texts.empty()) throw std::invalid_argument("reference set category '" + category + "' is empty");
        for (const auto& t : texts) {
            if (t.empty()) throw std::invalid_argument("reference set category '" + category + "' has an empty text");
        }
    }
}

nlohmann::json to_json(const ReferenceSet& refs) {
    return {{"format", "iplan-references"},
            {"version", 1},
            {"categories", refs.categories},
            {"action_texts", refs.action_texts}};
}

ReferenceSet reference_set_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "iplan-references") throw std::invalid_argument("not a reference set document");
    if (doc.value("version", 0) != 1) throw std::invalid_argument("unsupported reference set version");
    ReferenceSet refs;
    refs.categories = doc.at("categories").get<std::map<std::string, std::vector<std::string>>>();
    if (doc.contains("action_texts")) refs.action_texts = doc["action_texts"].get<std::map<std::string, std::string>>();
    refs.validate();
    return refs;
}

ReferenceSet load_reference_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reference set " + path);
    return reference_set_from_json(nlohmann::json::parse(in));
}

void save_reference_set(const ReferenceSet& refs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write reference set " + path);
    out << to_json(refs).dump(2) << '\n';
}

ReferenceSet reference_from_synthetic(const SyntheticCorpus& synthetic) {
    ReferenceSet refs;
    for (const auto& [category, actions] : synthetic.class_reference) refs.categories[category] = refs.texts_of(actions);
    return refs;
}

// ------------------------------------------------------------------- suite

Distribution summarize(std::vector<double> values) {
    if (values.empty()) return {};
    std::sort(values.begin(), values.end());
    Distribution d;
    d.min = values.front();
    d.max = values.back();
    d.q1 = quantile(values, 0.25);
    d.median = quantile(values, 0.5);
    d.q3 = quantile(values, 0.75);
    d.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return d;
}

SuiteReport evaluate_suite(const Model& model, const Corpus& corpus, const ReferenceSet& references,
                           const PerturbationSpec& spec, const EmbeddingProvider& embedder, SuiteOptions options) {
    references.validate();
    spec.validate(model.schema());
    SuiteReport report;
    report.embedder = embedder.name();

    const auto& event_name = corpus.schema.event_feature();
    std::vector<Split> splits;
    if (!corpus.reports_in(Split::train).empty() || !corpus.reports_in(Split::test).empty()) {
        splits = {Split::train, Split::test};
    } else {
        splits = {Split::unassigned};
    }

    auto recommend_fn = [&](const EventState& s) { return recommend(model, s).actions(); };
    std::uint64_t event_index = 0;
    for (const auto split : splits) {
        const auto reports = corpus.reports_in(split);
        for (const auto& category : corpus.schema.event_def().categories) {
            CategorySummary summary;
            summary.split = split_name(split);
            summary.category = category;
            auto ref = references.categories.find(category);
            std::vector<const Report*> members;
            for (const auto* r : reports) {
                if (std::get<std::string>(r->initial_state.values.at(event_name)) == category) members.push_back(r);
            }
            if (ref == references.categories.end()) {
                summary.skipped = true;
                summary.reason = "no reference actions";
            } else if (members.empty()) {
                summary.skipped = true;
                summary.reason = "no events";
            }
            if (summary.skipped) {
                report.summaries.push_back(std::move(summary));
                continue;
            }
            std::seed_seq seq{options.seed, static_cast<std::uint64_t>(split), fnv1a(category)};
            std::mt19937_64 rng(seq);
            std::shuffle(members.begin(), members.end(), rng);
            if (members.size() > options.events_per_category) members.resize(options.events_per_category);
            std::sort(members.begin(), members.end(), [](const Report* a, const Report* b) { return a->id < b->id; });

            std::vector<double> scores, consistencies;
            for (const auto* r : members) {
                EventRow row;
                row.report_id = r->id;
                row.split = summary.split;
                row.category = category;
                try {
                    const auto actions = recommend(model, r->initial_state).actions();
                    for (const auto& a : actions) row.actions.push_back(a.name);
                    row.score = score(references.texts_of(actions), ref->second, embedder, options.seed);
                } catch (const std::exception& e) {
                    row.error = e.what();
                    row.score = 0.0;
                }
                row.consistency = consistency(recommend_fn, r->initial_state, spec, model.schema(), event_index++);
                scores.push_back(row.score);
                consistencies.push_back(row.consistency);
                report.rows.push_back(std::move(row));
            }
            summary.n_events = members.size();
            summary.score = summarize(scores);
            summary.consistency = summarize(consistencies);
            report.summaries.push_back(std::move(summary));
        }
    }
    return report;
}

nlohmann::json to_json(const SuiteReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"report_id", r.report_id},
                        {"split", r.split},
                        {"category", r.category},
                        {"actions", r.actions},
                        {"score", r.score},
                        {"consistency", r.consistency},
                        {"error", r.error}});
    }
    nlohmann::json summaries = nlohmann::json::array();
    for (const auto& s : report.summaries) {
        nlohmann::json j{{"split", s.split}, {"category", s.category}, {"n_events", s.n_events}, {"skipped", s.skipped}};
        if (s.skipped) {
            j["reason"] = s.reason;
        } else {
            j["score"] = to_json(s.score);
            j["consistency"] = to_json(s.consistency);
        }
        summaries.push_back(std::move(j));
    }
    return {{"format", "iplan-results"},
            {"version", 1},
            {"embedder", report.embedder},
            {"summaries", summaries},
            {"rows", rows}};
}

SuiteReport suite_report_from_json(const nlohmann::json& doc) {
    if (doc.value("format", "") != "iplan-results") throw std::invalid_argument("not a results document");
    if (doc.value("version", 0) != 1) throw std::invalid_argument("unsupported results version");
    SuiteReport report;
    report.embedder = doc.at("embedder").get<std::string>();
    for (const auto& j : doc.at("rows")) {
        EventRow r;
        r.report_id = j.at("report_id").get<std::string>();
        r.split = j.at("split").get<std::string>();
        r.category = j.at("category").get<std::string>();
        r.actions = j.at("actions").get<std::vector<std::string>>();
        r.score = j.at("score").get<double>();
        r.consistency = j.at("consistency").get<double>();
        r.error = j.at("error").get<std::string>();
        report.rows.push_back(std::move(r));
    }
    for (const auto& j : doc.at("summaries")) {
        CategorySummary s;
        s.split = j.at("split").get<std::string>();
        s.category = j.at("category").get<std::string>();
        s.n_events = j.at("n_events").get<std::size_t>();
        s.skipped = j.at("skipped").get<bool>();
        if (s.skipped) {
            s.reason = j.at("reason").get<std::string>();
        } else {
            s.score = distribution_from_json(j.at("score"));
            s.consistency = distribution_from_json(j.at("consistency"));
        }
        report.summaries.push_back(std::move(s));
    }
    return report;
}

void save_results(const SuiteReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write results file " + path);
    out << to_json(report).dump(2) << '\n';
}

SuiteReport load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open results file " + path);
    return suite_report_from_json(nlohmann::json::parse(in));
}

}  // namespace iplan
