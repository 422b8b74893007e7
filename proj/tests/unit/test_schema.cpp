#include <doctest.h>

#include <random>

#include "iplan/synthetic.hpp"

using namespace iplan;

namespace {

FeatureSchema crash_schema() {
    return FeatureSchema({{"type", FeatureKind::categorical, {"crash", "breakdown"}, 0, 1},
                          {"injured", FeatureKind::boolean, {}, 0, 1}},
                         {{"call-police"}});
}

EventState random_state(const FeatureSchema& schema, std::mt19937_64& rng) {
    EventState s;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& f : schema.features()) {
        switch (f.kind) {
            case FeatureKind::categorical:
                s.values[f.name] = f.categories[rng() % f.categories.size()];
                break;
            case FeatureKind::boolean:
                s.values[f.name] = rng() % 2 == 0;
                break;
            case FeatureKind::numeric:
                s.values[f.name] = std::round(f.min + (f.max - f.min) * unit(rng));
                break;
        }
    }
    return s;
}

}  // namespace

TEST_CASE("encode: one-hot, boolean and min-max components") {
    const auto schema = crash_schema();
    CHECK(schema.dimension() == 3);
    CHECK(encode(EventState{{{"type", std::string("crash")}, {"injured", false}}}, schema) ==
          FeatureVector{1, 0, 0});
    CHECK(encode(EventState{{{"type", std::string("breakdown")}, {"injured", true}}}, schema) ==
          FeatureVector{0, 1, 1});

    const FeatureSchema km({{"km", FeatureKind::numeric, {}, 0, 100}}, {});
    CHECK(encode(EventState{{{"km", 25.0}}}, km) == FeatureVector{0.25});
}

TEST_CASE("encode rejects states that do not conform, naming the feature") {
    const auto schema = crash_schema();
    auto feature_of = [&](const EventState& s) {
        try {
            encode(s, schema);
        } catch (const SchemaError& e) {
            return e.feature();
        }
        return std::string("<none>");
    };
    CHECK(feature_of(EventState{{{"type", std::string("crash")}, {"injured", false}, {"speed", 3.0}}}) == "speed");
    CHECK(feature_of(EventState{{{"type", std::string("fire")}, {"injured", false}}}) == "type");
    CHECK(feature_of(EventState{{{"type", std::string("crash")}}}) == "injured");
    CHECK(feature_of(EventState{{{"type", std::string("crash")}, {"injured", 1.0}}}) == "injured");

    const FeatureSchema km({{"km", FeatureKind::numeric, {}, 0, 100}}, {});
    CHECK_THROWS_AS(encode(EventState{{{"km", 100.5}}}, km), SchemaError);
    CHECK_THROWS_AS(encode(EventState{{{"km", -1.0}}}, km), SchemaError);
}

TEST_CASE("state_key is canonical and injective") {
    const auto schema = reference_schema();
    std::mt19937_64 rng(3);
    const auto s = random_state(schema, rng);
    CHECK(state_key(s, schema) == state_key(s, schema));

    // Insertion order of the map does not matter.
    EventState reversed;
    for (auto it = schema.features().rbegin(); it != schema.features().rend(); ++it)
        reversed.values.emplace(it->name, s.values.at(it->name));
    CHECK(state_key(reversed, schema) == state_key(s, schema));

    auto t = s;
    t.values["injured"] = !std::get<bool>(s.values.at("injured"));
    CHECK(state_key(t, schema) != state_key(s, schema));
    CHECK(state_key(s, schema).rfind("event_type=", 0) == 0);
}

TEST_CASE("property: encoding invariants over random reference states") {
    const auto schema = reference_schema();
    std::mt19937_64 rng(11);
    std::vector<EventState> states;
    for (int i = 0; i < 500; ++i) states.push_back(random_state(schema, rng));
    for (const auto& s : states) {
        const auto v = encode(s, schema);
        REQUIRE(v.size() == schema.dimension());
        CHECK(v == encode(s, schema));
        for (double x : v) CHECK((x >= 0.0 && x <= 1.0));
        for (std::size_t f = 0; f < schema.features().size(); ++f) {
            if (schema.features()[f].kind != FeatureKind::categorical) continue;
            double sum = 0.0;
            for (std::size_t d = 0; d < schema.width(f); ++d) sum += v[schema.offset(f) + d];
            CHECK(sum == 1.0);
        }
    }
    for (std::size_t i = 0; i + 1 < states.size(); ++i) {
        const bool same_state = states[i] == states[i + 1];
        const bool same_vector = encode(states[i], schema) == encode(states[i + 1], schema);
        CHECK(same_state == same_vector);
        CHECK(same_state == (state_key(states[i], schema) == state_key(states[i + 1], schema)));
    }
}

TEST_CASE("schema validation") {
    CHECK_THROWS_AS(FeatureSchema({{"a", FeatureKind::boolean, {}, 0, 1}, {"a", FeatureKind::boolean, {}, 0, 1}}, {}),
                    SchemaError);
    CHECK_THROWS_AS(FeatureSchema({{"a", FeatureKind::categorical, {}, 0, 1}}, {}), SchemaError);
    CHECK_THROWS_AS(FeatureSchema({{"x", FeatureKind::numeric, {}, 5, 5}}, {}), SchemaError);
    CHECK_THROWS_AS(FeatureSchema({{"x", FeatureKind::numeric, {}, 0, 1}}, {{"a"}, {"a"}}), SchemaError);
    CHECK_THROWS_AS(FeatureSchema({{"x", FeatureKind::numeric, {}, 0, 1}}, {}, "x"), SchemaError);
    CHECK_THROWS_AS(FeatureSchema({{"x", FeatureKind::numeric, {}, 0, 1}}, {}, "", {"y"}), SchemaError);
}

TEST_CASE("schema and state JSON round trip") {
    const auto schema = reference_schema();
    CHECK(schema_from_json(to_json(schema)) == schema);
    CHECK(schema_from_json(to_json(schema)).event_feature() == "event_type");
    CHECK(schema_from_json(to_json(schema)).is_critical("injured"));
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto s = random_state(schema, rng);
        CHECK(state_from_json(to_json(s), schema) == s);
    }
    CHECK_THROWS_AS(state_from_json(nlohmann::json{{"event_type", 3}}, schema), SchemaError);
    const auto partial = partial_state_from_json(nlohmann::json{{"km", 4}}, schema);
    CHECK(partial.values.size() == 1);
}

TEST_CASE("format_number round-trips doubles") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double x = d(rng);
        CHECK(std::stod(format_number(x)) == x);
    }
    CHECK(format_number(25.0) == "25");
    CHECK(format_number(0.1) == "0.1");
}
