#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "tlbo/search_space.hpp"
#include "test_util.hpp"

using namespace tlbo;
using tlbo::test::conf;

TEST_CASE("variable and space invariants are enforced") {
    REQUIRE_THROWS_AS(SearchSpace({VariableSpec::make_continuous("x", 1.0, 1.0)}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(SearchSpace({VariableSpec::make_categorical("h", {})}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(SearchSpace({VariableSpec::make_categorical("h", {"a", "a"})}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(SearchSpace(std::vector<VariableSpec>{}), std::invalid_argument);
    REQUIRE_THROWS_AS(SearchSpace({VariableSpec::make_continuous("x", 0, 1),
                                   VariableSpec::make_continuous("x", 0, 2)}),
                      std::invalid_argument);
}

TEST_CASE("latin hypercube stratification in 1d") {
    const auto space = tlbo::test::unit_interval_1d();
    const auto pts = sample_latin_hypercube(space, 4, 7);
    REQUIRE(pts.size() == 4);
    std::vector<double> xs;
    for (const auto& p : pts) xs.push_back(p[0]);
    std::sort(xs.begin(), xs.end());
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(xs[i] >= 0.25 * double(i));
        REQUIRE(xs[i] < 0.25 * double(i + 1));
    }
}

TEST_CASE("latin hypercube categorical membership") {
    const SearchSpace space({VariableSpec::make_categorical("k", {"a", "b"})});
    const auto pts = sample_latin_hypercube(space, 2, 0);
    REQUIRE(pts.size() == 2);
    for (const auto& p : pts) {
        REQUIRE((p[0] == 0.0 || p[0] == 1.0));
    }
}

TEST_CASE("latin hypercube is deterministic per seed") {
    const auto space = tlbo::test::mixed_space();
    const auto a = sample_latin_hypercube(space, 16, 3);
    const auto b = sample_latin_hypercube(space, 16, 3);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
    const auto c = sample_latin_hypercube(space, 16, 4);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) any_diff = any_diff || !(a[i] == c[i]);
    REQUIRE(any_diff);
}

TEST_CASE("latin hypercube marginals hit each stratum once") {
    const SearchSpace space({VariableSpec::make_continuous("c", -2.0, 3.0),
                             VariableSpec::make_integer("z", 0, 1000)});
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 99ULL}) {
        const std::size_t n = 8;
        const auto pts = sample_latin_hypercube(space, n, seed);
        for (std::size_t d = 0; d < space.dim(); ++d) {
            const auto& v = space.variable(d);
            std::vector<int> hits(n, 0);
            for (const auto& p : pts) {
                const double width = v.range() / double(n);
                auto s = static_cast<std::size_t>((p[d] - v.lower) / width);
                s = std::min(s, n - 1);
                hits[s] += 1;
            }
            for (int h : hits) REQUIRE(h == 1);
        }
    }
}

TEST_CASE("encode scales numerics and indexes categoricals") {
    const auto space = tlbo::test::mixed_space();
    const auto e = encode(space, conf({5.0, 1.0, 1.0}));
    REQUIRE(e[0] == Catch::Approx(0.5));
    REQUIRE(e[1] == Catch::Approx(0.0));
    REQUIRE(e[2] == 1.0);  // 'entropy'

    REQUIRE_THROWS_AS(encode(space, conf({11.0, 1.0, 0.0})), std::domain_error);
    REQUIRE_THROWS_AS(encode(space, conf({5.0, 1.5, 0.0})), std::domain_error);
    REQUIRE_THROWS_AS(encode(space, conf({5.0, 1.0, 3.0})), std::domain_error);
}

TEST_CASE("encode is injective on random configuration pairs") {
    const auto space = tlbo::test::mixed_space();
    Rng rng(42);
    for (int i = 0; i < 50; ++i) {
        const auto a = sample_uniform(space, rng);
        const auto b = sample_uniform(space, rng);
        if (a == b) continue;
        REQUIRE(encode(space, a) != encode(space, b));
    }
}

TEST_CASE("gower distance examples") {
    const auto space = tlbo::test::mixed_space();
    const auto a = conf({2.5, 100.0, 0.0});
    REQUIRE(gower_distance(space, a, a) == 0.0);

    // Equal on 3 of 4 dimensions, different on one categorical.
    const SearchSpace s4({
        VariableSpec::make_continuous("a", 0, 1),
        VariableSpec::make_continuous("b", 0, 1),
        VariableSpec::make_integer("z", 0, 9),
        VariableSpec::make_categorical("h", {"x", "y"}),
    });
    const double d = gower_distance(s4, conf({0.3, 0.7, 4, 0}), conf({0.3, 0.7, 4, 1}));
    REQUIRE(d == Catch::Approx(0.5).margin(1e-15));

    const SearchSpace s1({VariableSpec::make_continuous("x", 0.0, 10.0)});
    REQUIRE(gower_distance(s1, conf({0.0}), conf({10.0})) == Catch::Approx(1.0));
}

TEST_CASE("gower distance is symmetric, bounded and zero only at equality") {
    const auto space = tlbo::test::mixed_space();
    Rng rng(7);
    for (int i = 0; i < 100; ++i) {
        const auto a = sample_uniform(space, rng);
        const auto b = sample_uniform(space, rng);
        const double dab = gower_distance(space, a, b);
        const double dba = gower_distance(space, b, a);
        REQUIRE(dab == dba);
        REQUIRE(dab >= 0.0);
        REQUIRE(dab <= 1.0);
        if (a == b) REQUIRE(dab == 0.0);
        if (dab == 0.0) REQUIRE(a == b);
    }
}
