#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "stochmatch/errors.hpp"
#include "stochmatch/instance.hpp"

using namespace stochmatch;

namespace {

Instance small() {
    // deliberately out of canonical order
    return Instance({{0, 1.0, 1}, {1, 2.0, 2}}, 3, {{1, 2, 0.5}, {0, 0, 0.25}, {1, 0, 0.75}, {0, 2, 1.0}});
}

}  // namespace

TEST_CASE("edges are stored in canonical (arrival, resource) order") {
    Instance inst = small();
    REQUIRE(inst.edge_count() == 4);
    for (int e = 1; e < inst.edge_count(); ++e) {
        const Edge& a = inst.edge(e - 1);
        const Edge& b = inst.edge(e);
        CHECK((a.arrival < b.arrival || (a.arrival == b.arrival && a.resource < b.resource)));
    }
    CHECK(inst.first_edge_of_arrival(0) == 0);
    CHECK(inst.first_edge_of_arrival(1) == 2);
    CHECK(inst.first_edge_of_arrival(2) == 2);
    CHECK(inst.first_edge_of_arrival(3) == 4);
    CHECK(inst.arrival_edges(1).empty());
    CHECK(inst.arrival_edges(2).size() == 2);
    CHECK(inst.find_edge(1, 0) == 1);
    CHECK(inst.find_edge(1, 1) == -1);
    auto r1 = inst.resource_edges(1);
    REQUIRE(r1.size() == 2);
    CHECK(inst.edge(r1[0]).arrival == 0);
    CHECK(inst.edge(r1[1]).arrival == 2);
    CHECK_FALSE(inst.unit_capacities());
    CHECK(inst.max_p() == 1.0);
}

TEST_CASE("validation reports every violated invariant") {
    CHECK(validate(small()).empty());
    Instance dup({{0, 1.0, 1}}, 1, {{0, 0, 0.5}, {0, 0, 0.5}});
    auto v = validate(dup);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("duplicate") != std::string::npos);

    Instance bad({{0, -1.0, 0}}, 1, {{0, 0, 1.5}, {3, 0, 0.5}, {0, 4, 0.5}});
    auto msgs = validate(bad);
    CHECK(msgs.size() >= 5);
    CHECK_THROWS_AS(require_valid(bad), InvalidInstance);

    Instance no_arrivals({{0, 1.0, 1}}, 0, {});
    CHECK_FALSE(validate(no_arrivals).empty());
}

TEST_CASE("capacity expansion makes contiguous unit copies") {
    Instance inst = small();
    Instance ex = expand_capacities(inst);
    CHECK(ex.resource_count() == 3);
    CHECK(ex.unit_capacities());
    CHECK(ex.origin(0) == 0);
    CHECK(ex.origin(1) == 1);
    CHECK(ex.origin(2) == 1);
    CHECK(ex.resource(2).reward == 2.0);
    CHECK(ex.edge_count() == 6);
    CHECK(ex.find_edge(2, 2) >= 0);
    Instance big({{0, 1.0, 100}}, 1, {{0, 0, 0.5}});
    CHECK_THROWS_AS(expand_capacities(big, 64), CapacityExplosion);
    Instance unit = upper_triangular(3, 0.5);
    CHECK(expand_capacities(unit) == unit);
}

TEST_CASE("structure detection") {
    auto id = detect_structure(upper_triangular(3, 0.4));
    CHECK(id.tag == ProbabilityStructure::Tag::Identical);
    CHECK(id.p == doctest::Approx(0.4));

    Instance dec = random_decomposable(3, 4, 7);
    auto ds = detect_structure(dec);
    REQUIRE(ds.decomposable());
    for (const Edge& e : dec.edges()) {
        CHECK(ds.resource_factors[e.resource] * ds.arrival_factors[e.arrival] == doctest::Approx(e.p).epsilon(1e-9));
    }

    // p_00 p_11 != p_01 p_10 on a 2x2 cycle
    Instance gen({{0, 1.0, 1}, {1, 1.0, 1}}, 2, {{0, 0, 0.5}, {1, 0, 0.5}, {0, 1, 0.5}, {1, 1, 0.1}});
    CHECK(detect_structure(gen).tag == ProbabilityStructure::Tag::General);
    CHECK(std::string(to_string(ProbabilityStructure::Tag::Decomposable)) == "decomposable");
}

TEST_CASE("deterministic generators") {
    Instance h = single_resource_hard(4);
    CHECK(h.resource_count() == 1);
    CHECK(h.arrival_count() == 4);
    for (const Edge& e : h.edges()) {
        CHECK(e.p == 0.25);
    }
    Instance u = upper_triangular(4, 1.0);
    CHECK(u.edge_count() == 10);
    CHECK(u.find_edge(0, 1) == -1);
    CHECK(u.find_edge(3, 0) >= 0);

    Instance c = counterexample_3x3(0.5, 0.1, 0.5);
    CHECK(c.edge_count() == 6);
    CHECK(c.find_edge(2, 0) >= 0);  // k - t1
    CHECK(c.find_edge(2, 1) == -1);
    CHECK(c.edge(c.find_edge(0, 2)).p == 0.1);
    CHECK(c.edge(c.find_edge(1, 2)).p == 0.5);
    CHECK_THROWS_AS(counterexample_3x3(0.5, 0.5, 0.1), InvalidParams);
}

TEST_CASE("random generators are reproducible and respect their ranges") {
    CHECK(random_general(3, 4, 11) == random_general(3, 4, 11));
    CHECK_FALSE(random_general(3, 4, 11) == random_general(3, 4, 12));
    Instance sp = random_small_prob(4, 6, 0.05, 3);
    CHECK(sp.max_p() <= 0.05);
    for (const Edge& e : sp.edges()) {
        CHECK(e.p > 0.0);
    }
    // scaling p_max rescales the same graph
    Instance sp2 = random_small_prob(4, 6, 0.01, 3);
    REQUIRE(sp2.edge_count() == sp.edge_count());
    for (int e = 0; e < sp.edge_count(); ++e) {
        CHECK(sp2.edge(e).p == doctest::Approx(sp.edge(e).p / 5.0));
    }
    Instance dec = random_decomposable(4, 4, 5);
    for (const Resource& r : dec.resources()) {
        CHECK(r.reward >= 0.5);
        CHECK(r.reward < 1.5);
    }
    GeneratorParams gp;
    gp.n = 2;
    gp.m = 3;
    CHECK(generate(GeneratorKind::RandomGeneral, gp, 9) == random_general(2, 3, 9));
    CHECK(parse_generator_kind("random_small_prob") == GeneratorKind::RandomSmallProb);
    CHECK_THROWS_AS(parse_generator_kind("bogus"), UsageError);
}

TEST_CASE("JSON round trip") {
    for (const Instance& inst : {small(), random_general(3, 5, 2), counterexample_3x3(0.3, 0.1, 0.7)}) {
        std::string text = render_instance(inst);
        CHECK(parse_instance(text) == inst);
        CHECK(render_instance(parse_instance(text)) == text);
    }
    auto path = std::filesystem::temp_directory_path() / "stochmatch_instance_test.json";
    save_instance(small(), path.string());
    CHECK(load_instance(path.string()) == small());
    std::filesystem::remove(path);
}

TEST_CASE("JSON errors") {
    CHECK_THROWS_AS(parse_instance("{"), ParseError);
    CHECK_THROWS_AS(parse_instance(R"({"resources": [], "arrivals": 1})"), ParseError);
    CHECK_THROWS_AS(parse_instance(R"({"resources": [], "arrivals": 1, "edges": [], "extra": 1})"), ParseError);
    CHECK_THROWS_AS(
        parse_instance(R"({"resources": [{"id": 0, "reward": 1, "capacity": 1.5}], "arrivals": 1, "edges": []})"),
        ParseError);
    CHECK_THROWS_AS(parse_instance(R"({"resources": [{"id": 0, "reward": 1, "capacity": 1}], "arrivals": 1,
        "edges": [{"resource": 0, "arrival": 0, "p": 0.5}, {"resource": 0, "arrival": 0, "p": 0.5}]})"),
                    InputError);
    CHECK_THROWS_AS(parse_instance(R"({"resources": [{"id": 0, "reward": 1, "capacity": 1}], "arrivals": 1,
        "edges": [{"resource": 0, "arrival": 0, "p": 1.5}]})"),
                    InputError);
    try {
        parse_instance("{\n  \"resources\": [\n  ,\n]}");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
    CHECK_THROWS_AS(load_instance("/nonexistent/file.json"), ParseError);
}
