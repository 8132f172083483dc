#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "fogd2d/content.hpp"

using namespace fogd2d;

TEST_SUITE("content") {

TEST_CASE("zipf with gamma 0 is uniform") {
    const Popularity p = zipf_popularity(5, 0.0);
    for (double v : p.p) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("zipf sums to one and follows the power law") {
    for (double gamma : {0.3, 1.0, 2.5}) {
        const Popularity p = zipf_popularity(50, gamma);
        double total = 0.0;
        for (double v : p.p) total += v;
        CHECK(std::abs(total - 1.0) < 1e-14);
        for (int n = 2; n <= 50; ++n)
            CHECK(p[n - 1] / p[0] == doctest::Approx(std::pow(n, -gamma)).epsilon(1e-12));
    }
}

TEST_CASE("zipf N=5 gamma=1 matches harmonic normalisation") {
    const Popularity p = zipf_popularity(5, 1.0);
    const double H = 1.0 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5;
    for (int n = 1; n <= 5; ++n) CHECK(p[n - 1] == doctest::Approx(1.0 / (n * H)).epsilon(1e-14));
    CHECK(p[0] == doctest::Approx(0.437956204).epsilon(1e-9));
}

TEST_CASE("zipf with a single file") {
    const Popularity p = zipf_popularity(1, 3.0);
    REQUIRE(p.size() == 1);
    CHECK(p[0] == 1.0);
}

TEST_CASE("zipf rejects bad input") {
    CHECK_THROWS_AS(zipf_popularity(0, 1.0), ConfigError);
    CHECK_THROWS_AS(zipf_popularity(5, -0.1), ConfigError);
    CHECK_THROWS_AS(zipf_popularity(5, NAN), ConfigError);
}

TEST_CASE("content params validation") {
    ContentParams c;
    CHECK_NOTHROW(c.validate());
    c.K = 6;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.K = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ContentParams{};
    c.gamma = -1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("scheme names round-trip") {
    CHECK(parse_scheme(to_string(Scheme::RFS)) == Scheme::RFS);
    CHECK(parse_scheme(to_string(Scheme::MRFS)) == Scheme::MRFS);
    CHECK_THROWS_AS(parse_scheme("LRU"), ConfigError);
}

TEST_CASE("binomial coefficients") {
    CHECK(binomial(5, 3) == 10);
    CHECK(binomial(5, 0) == 1);
    CHECK(binomial(5, 5) == 1);
    CHECK(binomial(3, 4) == 0);
    CHECK(binomial(30, 15) == 155117520ULL);
    CHECK(binomial(60, 30) == 118264581564861424ULL);
    CHECK(binomial(200, 100) == std::numeric_limits<std::size_t>::max());
}

TEST_CASE("combinations are lexicographic") {
    const CombinationSet cs = enumerate_combinations(5, 3);
    REQUIRE(cs.size() == 10);
    CHECK(cs[0] == std::vector<int>{0, 1, 2});
    CHECK(cs[1] == std::vector<int>{0, 1, 3});
    CHECK(cs[2] == std::vector<int>{0, 1, 4});
    CHECK(cs[3] == std::vector<int>{0, 2, 3});
    CHECK(cs[9] == std::vector<int>{2, 3, 4});
    for (std::size_t i = 1; i < cs.size(); ++i) CHECK(cs[i - 1] < cs[i]);
}

TEST_CASE("membership index agrees with the combinations") {
    const CombinationSet cs = enumerate_combinations(6, 2);
    for (int n = 0; n < 6; ++n) {
        CHECK(cs.containing(n).size() == binomial(5, 1));
        for (std::size_t i = 0; i < cs.size(); ++i) {
            const bool in = std::find(cs[i].begin(), cs[i].end(), n) != cs[i].end();
            CHECK(cs.contains(i, n) == in);
        }
    }
    CHECK_FALSE(cs.contains(0, 7));
}

TEST_CASE("K = N yields one combination") {
    const CombinationSet cs = enumerate_combinations(4, 4);
    REQUIRE(cs.size() == 1);
    CHECK(cs[0] == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("enumeration cap is enforced with the size in the message") {
    CHECK_THROWS_AS(enumerate_combinations(40, 20), ConfigError);
    try {
        enumerate_combinations(30, 15, 1000);
        FAIL("expected a throw");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("155117520") != std::string::npos);
    }
    CHECK_THROWS_AS(enumerate_combinations(3, 4), ConfigError);
}

TEST_CASE("uniform policy") {
    const CachingPolicy p = uniform_policy(10);
    CHECK_NOTHROW(p.validate());
    for (double v : p.c) CHECK(v == doctest::Approx(0.1));
    CHECK_THROWS_AS(uniform_policy(0), ConfigError);
}

TEST_CASE("policy validation") {
    const CachingPolicy over{{0.5, 0.6}}, outside{{1.2, -0.2}}, empty{}, fine{{0.25, 0.75}};
    CHECK_THROWS_AS(over.validate(), ConfigError);
    CHECK_THROWS_AS(outside.validate(), ConfigError);
    CHECK_THROWS_AS(empty.validate(), ConfigError);
    CHECK_NOTHROW(fine.validate());
}

TEST_CASE("MPC caches the most popular files") {
    const CombinationSet cs = enumerate_combinations(5, 3);
    const CachingPolicy p = mpc_policy(cs, zipf_popularity(5, 1.0));
    CHECK(p[0] == 1.0);
    CHECK(std::accumulate(p.c.begin(), p.c.end(), 0.0) == 1.0);
}

TEST_CASE("MPC ties resolve to the lexicographically first combination") {
    const CombinationSet cs = enumerate_combinations(5, 2);
    const CachingPolicy p = mpc_policy(cs, zipf_popularity(5, 0.0));
    CHECK(p[0] == 1.0);
    // Popularity with a tie between files 2 and 3 behind file 1.
    const CachingPolicy q = mpc_policy(cs, Popularity{{0.4, 0.2, 0.2, 0.1, 0.1}});
    CHECK(cs[0] == std::vector<int>{0, 1});
    CHECK(q[0] == 1.0);
}

TEST_CASE("sample_cache inverts the cumulative distribution") {
    const CachingPolicy p{{0.2, 0.0, 0.5, 0.3}};
    CHECK(sample_cache(p, 0.0) == 0);
    CHECK(sample_cache(p, 0.19) == 0);
    CHECK(sample_cache(p, 0.21) == 2);
    CHECK(sample_cache(p, 0.69) == 2);
    CHECK(sample_cache(p, 0.71) == 3);
    CHECK(sample_cache(p, 0.999999) == 3);
}

TEST_CASE("sample_cache frequencies follow the policy") {
    const CachingPolicy p{{0.1, 0.6, 0.3}};
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> counts(3, 0.0);
    const int draws = 200000;
    for (int k = 0; k < draws; ++k) counts[sample_cache(p, u(gen))] += 1.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double sd = std::sqrt(p[i] * (1 - p[i]) / draws);
        CHECK(std::abs(counts[i] / draws - p[i]) < 4.0 * sd);
    }
}

}
