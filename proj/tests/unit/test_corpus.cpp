#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "iplan/synthetic.hpp"
#include "support.hpp"

using namespace iplan;
using namespace iplan::testing;

namespace {

std::string serialize(const Corpus& c) {
    std::ostringstream out;
    write_corpus(c, out);
    return out.str();
}

Corpus three_reports() {
    Corpus c;
    c.schema = fixture_schema();
    c.reports = {fixture_report("r1", "a", "s0", {{"fix", 3, "a", "done"}}),
                 fixture_report("r2", "b", "s0", {{"go", 2, "b", "s1"}, {"fix", 4, "b", "done"}}),
                 fixture_report("r3", "a", "s0", {{"wait", 1.5, "a", "done"}})};
    c.splits.assign(3, Split::unassigned);
    return c;
}

std::size_t record_of(const std::string& text) {
    std::istringstream in(text);
    try {
        read_corpus(in);
    } catch (const CorpusError& e) {
        return e.record();
    }
    return 0;
}

std::string message_of(const std::string& text) {
    std::istringstream in(text);
    try {
        read_corpus(in);
    } catch (const CorpusError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("well-formed three-report file loads") {
    std::istringstream in(serialize(three_reports()));
    const auto c = read_corpus(in);
    CHECK(c.reports.size() == 3);
    CHECK(c.reports == three_reports().reports);
    CHECK(c.schema == fixture_schema());
}

TEST_CASE("load errors carry record numbers and name the report") {
    const auto text = serialize(three_reports());
    std::istringstream lines(text);
    std::vector<std::string> rows;
    for (std::string l; std::getline(lines, l);) rows.push_back(l);
    REQUIRE(rows.size() == 4);

    SUBCASE("unresolved final step") {
        auto doc = nlohmann::json::parse(rows[2]);
        doc["steps"].back()["resolved"] = false;
        const auto bad = rows[0] + "\n" + rows[1] + "\n" + doc.dump() + "\n";
        CHECK(record_of(bad) == 3);
        CHECK(message_of(bad).find("r2") != std::string::npos);
        CHECK(message_of(bad).find("not resolved") != std::string::npos);
    }
    SUBCASE("parse error") {
        const auto bad = rows[0] + "\n" + rows[1] + "\n{not json\n";
        CHECK(record_of(bad) == 3);
    }
    SUBCASE("duplicate id") {
        const auto bad = rows[0] + "\n" + rows[1] + "\n" + rows[1] + "\n";
        CHECK(record_of(bad) == 3);
        CHECK(message_of(bad).find("duplicate") != std::string::npos);
    }
    SUBCASE("empty corpus") {
        CHECK(message_of(rows[0] + "\n").find("empty corpus") != std::string::npos);
    }
    SUBCASE("schema violation in a state") {
        auto doc = nlohmann::json::parse(rows[1]);
        doc["initial"]["kind"] = "zebra";
        CHECK(record_of(rows[0] + "\n" + doc.dump() + "\n") == 2);
    }
    SUBCASE("unknown action") {
        auto doc = nlohmann::json::parse(rows[1]);
        doc["steps"][0]["action"] = "teleport";
        CHECK(message_of(rows[0] + "\n" + doc.dump() + "\n").find("teleport") != std::string::npos);
    }
    SUBCASE("newer format version") {
        auto header = nlohmann::json::parse(rows[0]);
        header["version"] = 99;
        CHECK(message_of(header.dump() + "\n" + rows[1] + "\n").find("version") != std::string::npos);
    }
}

TEST_CASE("negative durations are rejected") {
    auto c = three_reports();
    c.reports[0].steps[0].duration_min = -1;
    CHECK_THROWS_AS(validate_corpus(c), CorpusError);
}

TEST_CASE("split sizes, determinism and partition") {
    SyntheticSpec spec;
    spec.n_reports = 100;
    const auto base = generate_synthetic(spec).corpus;
    const auto s = split(base, 0.8, 7);
    CHECK(s.reports_in(Split::train).size() == 80);
    CHECK(s.reports_in(Split::test).size() == 20);
    CHECK(split(base, 0.8, 7).splits == s.splits);
    CHECK(split(base, 0.8, 8).splits != s.splits);

    std::set<std::string> ids;
    for (const auto* r : s.reports_in(Split::train)) ids.insert(r->id);
    for (const auto* r : s.reports_in(Split::test)) CHECK(ids.insert(r->id).second);
    CHECK(ids.size() == 100);

    spec.n_reports = 10;
    const auto small = split(generate_synthetic(spec).corpus, 0.8, 1);
    CHECK(small.reports_in(Split::train).size() == 8);
    CHECK(small.reports_in(Split::test).size() == 2);

    CHECK_THROWS_AS(split(base, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(split(base, 1.0, 1), std::invalid_argument);
}

TEST_CASE("property: write/read round trip of generated corpora") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticSpec spec;
        spec.seed = seed;
        spec.n_reports = 60;
        spec.noise = 0.2;
        const auto c = split(generate_synthetic(spec).corpus, 0.75, seed);
        std::istringstream in(serialize(c));
        const auto back = read_corpus(in);
        CHECK(back.reports == c.reports);
        CHECK(back.splits == c.splits);
        CHECK(back.schema == c.schema);
    }
}

TEST_CASE("synthetic: zero noise gives one sequence per class") {
    SyntheticSpec spec;
    spec.n_policies = 2;
    spec.noise = 0.0;
    const auto syn = generate_synthetic(spec);
    std::map<std::string, std::set<std::vector<ActionId>>> per_class;
    for (std::size_t i = 0; i < syn.corpus.reports.size(); ++i) {
        std::vector<ActionId> seq;
        for (const auto& s : syn.corpus.reports[i].steps) seq.push_back(s.action);
        per_class[syn.truth[i].event_class].insert(seq);
        CHECK(seq == syn.truth[i].intended);
    }
    CHECK(per_class.size() == 2);
    for (const auto& [cls, seqs] : per_class) CHECK(seqs.size() == 1);
}

TEST_CASE("synthetic: seeded determinism") {
    SyntheticSpec spec;
    spec.noise = 0.1;
    CHECK(serialize(generate_synthetic(spec).corpus) == serialize(generate_synthetic(spec).corpus));
    auto other = spec;
    other.seed = 8;
    CHECK(serialize(generate_synthetic(spec).corpus) != serialize(generate_synthetic(other).corpus));
}

TEST_CASE("synthetic: deviation rate matches noise within three sigma") {
    SyntheticSpec spec;
    spec.n_reports = 1000;
    spec.noise = 0.1;
    const auto syn = generate_synthetic(spec);
    std::size_t positions = 0, deviations = 0;
    for (const auto& t : syn.truth) {
        for (auto d : t.deviations) {
            ++positions;
            if (d != Deviation::none) ++deviations;
        }
    }
    const double n = static_cast<double>(positions);
    const double sigma = std::sqrt(n * 0.1 * 0.9);
    MESSAGE("deviations " << deviations << " of " << positions);
    CHECK(std::fabs(static_cast<double>(deviations) - 0.1 * n) <= 3.0 * sigma);
}

TEST_CASE("synthetic spec validation") {
    SyntheticSpec spec;
    spec.noise = 1.5;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.noise = 0;
    spec.n_reports = 0;
    CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
    spec.n_reports = 5;
    spec.n_policies = 0;
    CHECK_THROWS_AS(generate_synthetic(spec), std::invalid_argument);
}

TEST_CASE("every generated report validates against the schema") {
    SyntheticSpec spec;
    spec.noise = 0.3;
    const auto syn = generate_synthetic(spec);
    CHECK_NOTHROW(validate_corpus(syn.corpus));
}
