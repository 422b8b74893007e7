#include "iplan/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace iplan {

namespace {

constexpr const char* kFormatName = "iplan-corpus";

std::string_view split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::test: return "test";
        case Split::unassigned: break;
    }
    return "";
}

Split split_from(const nlohmann::json& doc, std::size_t record) {
    if (!doc.contains("split") || doc["split"].is_null()) return Split::unassigned;
    const auto text = doc["split"].get<std::string>();
    if (text == "train") return Split::train;
    if (text == "test") return Split::test;
    throw CorpusError(record, "unknown split tag '" + text + "'");
}

}  // namespace

CorpusError::CorpusError(std::size_t record, const std::string& message)
    : std::runtime_error(record > 0 ? "record " + std::to_string(record) + ": " + message : message),
      record_(record) {}

std::vector<const Report*> Corpus::reports_in(Split which) const {
    std::vector<const Report*> out;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (i < splits.size() && splits[i] == which) out.push_back(&reports[i]);
    }
    return out;
}

void validate_report(const Report& report, const FeatureSchema& schema, std::size_t record) {
    const auto where = [&](const std::string& msg) { return CorpusError(record, "report '" + report.id + "': " + msg); };
    if (report.id.empty()) throw CorpusError(record, "report without id");
    try {
        validate(report.initial_state, schema);
    } catch (const SchemaError& e) {
        throw where(std::string("initial state: ") + e.what());
    }
    if (report.steps.empty()) throw where("report has no steps");
    for (std::size_t i = 0; i < report.steps.size(); ++i) {
        const auto& step = report.steps[i];
        if (!schema.has_action(step.action)) throw where("unknown action '" + step.action.name + "'");
        if (!(step.duration_min >= 0.0) || !std::isfinite(step.duration_min))
            throw where("step " + std::to_string(i + 1) + " has a negative or non-finite duration");
        try {
            validate(step.state_after, schema);
        } catch (const SchemaError& e) {
            throw where("step " + std::to_string(i + 1) + ": " + e.what());
        }
        const bool last = i + 1 == report.steps.size();
        if (step.resolved && !last) throw where("only the final step may be resolved");
        if (last && !step.resolved) throw where("final step is not resolved");
    }
}

void validate_corpus(const Corpus& corpus) {
    if (corpus.reports.empty()) throw CorpusError(0, "empty corpus");
    if (!corpus.splits.empty() && corpus.splits.size() != corpus.reports.size())
        throw CorpusError(0, "split tags do not match report count");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < corpus.reports.size(); ++i) {
        const auto& report = corpus.reports[i];
        validate_report(report, corpus.schema, i + 2);
        if (!ids.insert(report.id).second) throw CorpusError(i + 2, "duplicate report id '" + report.id + "'");
    }
}

nlohmann::json to_json(const Report& report) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : report.steps) {
        steps.push_back({{"action", s.action.name},
                         {"duration_min", s.duration_min},
                         {"state", to_json(s.state_after)},
                         {"resolved", s.resolved}});
    }
    return {{"id", report.id}, {"initial", to_json(report.initial_state)}, {"steps", steps}};
}

Report report_from_json(const nlohmann::json& doc, const FeatureSchema& schema) {
    Report r;
    r.id = doc.at("id").get<std::string>();
    r.initial_state = state_from_json(doc.at("initial"), schema);
    for (const auto& s : doc.at("steps")) {
        Step step;
        step.action = ActionId{s.at("action").get<std::string>()};
        step.duration_min = s.at("duration_min").get<double>();
        step.state_after = state_from_json(s.at("state"), schema);
        step.resolved = s.value("resolved", false);
        r.steps.push_back(std::move(step));
    }
    return r;
}

Corpus read_corpus(std::istream& in) {
    Corpus corpus;
    std::string line;
    std::size_t record = 0;
    bool have_header = false;
    bool any_split = false;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++record;
        if (line.empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw CorpusError(record, std::string("parse error: ") + e.what());
        }
        if (!have_header) {
            if (doc.value("format", std::string{}) != kFormatName)
                throw CorpusError(record, "missing corpus header");
            const int version = doc.value("version", 0);
            if (version != kCorpusFormatVersion)
                throw CorpusError(record, "unsupported corpus format version " + std::to_string(version));
            try {
                corpus.schema = schema_from_json(doc.at("schema"));
            } catch (const std::exception& e) {
                throw CorpusError(record, std::string("invalid schema: ") + e.what());
            }
            have_header = true;
            continue;
        }
        Report report;
        try {
            report = report_from_json(doc, corpus.schema);
        } catch (const SchemaError& e) {
            throw CorpusError(record, e.what());
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(record, std::string("malformed report: ") + e.what());
        }
        validate_report(report, corpus.schema, record);
        if (!ids.insert(report.id).second) throw CorpusError(record, "duplicate report id '" + report.id + "'");
        const Split s = split_from(doc, record);
        any_split = any_split || s != Split::unassigned;
        corpus.reports.push_back(std::move(report));
        corpus.splits.push_back(s);
    }
    if (!have_header) throw CorpusError(0, "missing corpus header");
    if (corpus.reports.empty()) throw CorpusError(0, "empty corpus");
    if (!any_split) corpus.splits.assign(corpus.reports.size(), Split::unassigned);
    return corpus;
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError(0, "cannot open corpus file " + path);
    return read_corpus(in);
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
    nlohmann::json header{{"format", kFormatName}, {"version", kCorpusFormatVersion}, {"schema", to_json(corpus.schema)}};
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < corpus.reports.size(); ++i) {
        auto doc = to_json(corpus.reports[i]);
        const Split s = i < corpus.splits.size() ? corpus.splits[i] : Split::unassigned;
        if (s != Split::unassigned) doc["split"] = std::string(split_name(s));
        out << doc.dump() << '\n';
    }
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CorpusError(0, "cannot write corpus file " + path);
    write_corpus(corpus, out);
}

Corpus split(Corpus corpus, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train fraction must lie strictly between 0 and 1");
    const std::size_t n = corpus.reports.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    corpus.splits.assign(n, Split::test);
    for (std::size_t i = 0; i < n_train; ++i) corpus.splits[order[i]] = Split::train;
    return corpus;
}

}  // namespace iplan
