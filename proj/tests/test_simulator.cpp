#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "fogd2d/analytics.hpp"
#include "fogd2d/simulator.hpp"

using namespace fogd2d;

namespace {

constexpr double kPi = std::numbers::pi;

NetworkParams small_network() {
    NetworkParams net;
    net.R_s = 100.0;
    return net;
}

/// Hand-built slot: F-UEs with given caches, C-UEs with given requests; the
/// typical requester is appended at the origin.
NetworkRealization make_slot(const NetworkParams& net, std::vector<Point> fues, std::vector<std::uint32_t> caches,
                             std::vector<Point> cues, std::vector<int> requests, int typical_request,
                             std::uint64_t key = 7) {
    NetworkRealization real;
    real.slot_key = key;
    real.fue_points = std::move(fues);
    real.fue_cache = std::move(caches);
    real.cue_points = std::move(cues);
    real.cue_request = std::move(requests);
    real.cue_points.push_back(Point{0.0, 0.0});
    real.cue_request.push_back(typical_request);
    real.cue_grid = PointGrid(real.cue_points, net.R_s, net.R_d);
    return real;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("point counts are Poisson with the configured means") {
    const NetworkParams net = small_network();
    ContentParams c;
    const Popularity pop = zipf_popularity(c.N, c.gamma);
    const NetworkSimulator sim(net, c, pop, uniform_policy(10));
    const int slots = 400;
    double fue = 0.0, cue = 0.0;
    for (int s = 0; s < slots; ++s) {
        Rng rng(1000 + s);
        const NetworkRealization real = sim.sample_network(rng, s);
        fue += static_cast<double>(real.fue_points.size());
        cue += static_cast<double>(real.cue_points.size() - 1);
        CHECK(real.cue_points.back().x == 0.0);
        CHECK(real.cue_points.back().y == 0.0);
        for (const Point& p : real.fue_points) CHECK(std::hypot(p.x, p.y) <= net.R_s);
    }
    const double mean_f = net.lambda_g * kPi * net.R_s * net.R_s;
    const double mean_c = net.lambda_u * kPi * net.R_s * net.R_s;
    CHECK(std::abs(fue / slots - mean_f) < 4.0 * std::sqrt(mean_f / slots));
    CHECK(std::abs(cue / slots - mean_c) < 4.0 * std::sqrt(mean_c / slots));
}

TEST_CASE("requests and caches follow popularity and policy") {
    const NetworkParams net = small_network();
    ContentParams c;
    const Popularity pop = zipf_popularity(c.N, 1.2);
    CachingPolicy policy{std::vector<double>(10, 0.0)};
    policy.c[0] = 0.7;
    policy.c[9] = 0.3;
    const NetworkSimulator sim(net, c, pop, policy);
    std::vector<double> req(c.N, 0.0), cache(10, 0.0);
    double nreq = 0.0, ncache = 0.0;
    for (int s = 0; s < 100; ++s) {
        Rng rng(s);
        const NetworkRealization real = sim.sample_network(rng, s);
        for (int r : real.cue_request) req[static_cast<std::size_t>(r)] += 1.0, nreq += 1.0;
        for (auto i : real.fue_cache) cache[i] += 1.0, ncache += 1.0;
    }
    for (int n = 0; n < c.N; ++n) {
        const double sd = std::sqrt(pop[n] * (1 - pop[n]) / nreq);
        CHECK(std::abs(req[n] / nreq - pop[n]) < 4.0 * sd);
    }
    for (std::size_t i = 0; i < 10; ++i) {
        const double sd = std::sqrt(policy[i] * (1 - policy[i]) / ncache) + 1e-12;
        CHECK(std::abs(cache[i] / ncache - policy[i]) < 4.0 * sd);
    }
}

TEST_CASE("sampling is reproducible from the seed") {
    const NetworkParams net = small_network();
    ContentParams c;
    const Popularity pop = zipf_popularity(c.N, c.gamma);
    const NetworkRealization a = sample_network(net, c, pop, uniform_policy(10), 99);
    const NetworkRealization b = sample_network(net, c, pop, uniform_policy(10), 99);
    REQUIRE(a.fue_points.size() == b.fue_points.size());
    for (std::size_t k = 0; k < a.fue_points.size(); ++k) CHECK(a.fue_points[k].x == b.fue_points[k].x);
    CHECK(a.cue_request == b.cue_request);
    CHECK(a.link_fading(0, 1) == b.link_fading(0, 1));
}

TEST_CASE("link fading is a fixed unit-mean exponential per pair and slot") {
    NetworkRealization real;
    real.slot_key = 12345;
    CHECK(real.link_fading(3, 4) == real.link_fading(3, 4));
    CHECK(real.link_fading(3, 4) != real.link_fading(4, 3));
    double sum = 0.0, sq = 0.0;
    const int pairs = 200000;
    for (int k = 0; k < pairs; ++k) {
        const double h = real.link_fading(static_cast<std::size_t>(k % 500), static_cast<std::size_t>(k / 500));
        CHECK(h > 0.0);
        sum += h;
        sq += h * h;
    }
    CHECK(std::abs(sum / pairs - 1.0) < 4.0 / std::sqrt(pairs));
    CHECK(std::abs(sq / pairs - 2.0) < 4.0 * std::sqrt(20.0 / pairs));
    NetworkRealization other = real;
    other.slot_key = 12346;
    CHECK(other.link_fading(3, 4) != real.link_fading(3, 4));
}

TEST_CASE("candidate selection trivial cases") {
    const NetworkParams net = small_network();
    ContentParams c{5, 2, 1.0, Scheme::RFS};
    const Popularity pop = zipf_popularity(5, 1.0);
    const NetworkSimulator sim(net, c, pop, uniform_policy(10));
    // combination 0 is {file 1, file 2}
    SUBCASE("no requester nearby") {
        const auto real = make_slot(net, {{3, 0}}, {0}, {{50, 0}}, {0}, 3);
        CHECK(sim.select_candidate(0, real, true) == -1);
    }
    SUBCASE("one cached request inside the D2D radius") {
        const auto real = make_slot(net, {{3, 0}}, {0}, {{3, 5}, {40, 0}}, {1, 0}, 3);
        CHECK(sim.select_candidate(0, real, true) == 1);
    }
    SUBCASE("requests for uncached files are ignored") {
        const auto real = make_slot(net, {{3, 0}}, {0}, {{3, 5}}, {4}, 2);
        CHECK(sim.select_candidate(0, real, true) == -1);
    }
    SUBCASE("the typical request is counted only when asked to") {
        const auto real = make_slot(net, {{3, 0}}, {0}, {}, {}, 0);
        CHECK(sim.select_candidate(0, real, true) == 0);
        CHECK(sim.select_candidate(0, real, false) == -1);
    }
}

TEST_CASE("MRFS picks the most requested file and splits ties evenly") {
    const NetworkParams net = small_network();
    ContentParams c{5, 2, 1.0, Scheme::MRFS};
    const Popularity pop = zipf_popularity(5, 1.0);
    const NetworkSimulator sim(net, c, pop, uniform_policy(10));
    const auto majority = make_slot(net, {{0, 20}}, {0}, {{1, 20}, {2, 20}, {0, 22}}, {1, 1, 0}, 4);
    CHECK(sim.select_candidate(0, majority, true) == 1);

    int first = 0;
    const int slots = 20000;
    for (int s = 0; s < slots; ++s) {
        const auto tie = make_slot(net, {{0, 20}}, {0}, {{1, 20}, {0, 22}}, {1, 0}, 4, static_cast<std::uint64_t>(s));
        const int cand = sim.select_candidate(0, tie, true);
        REQUIRE((cand == 0 || cand == 1));
        first += cand == 0;
    }
    CHECK(std::abs(first / double(slots) - 0.5) < 4.0 * std::sqrt(0.25 / slots));
}

TEST_CASE("RFS picks uniformly among requested cached files") {
    const NetworkParams net = small_network();
    ContentParams c{5, 2, 1.0, Scheme::RFS};
    const Popularity pop = zipf_popularity(5, 1.0);
    const NetworkSimulator sim(net, c, pop, uniform_policy(10));
    int first = 0;
    const int slots = 20000;
    for (int s = 0; s < slots; ++s) {
        // three requests for file 2, one for file 1: RFS ignores the counts
        const auto real = make_slot(net, {{0, 20}}, {0}, {{1, 20}, {2, 20}, {3, 20}, {0, 22}}, {1, 1, 1, 0}, 4,
                                    static_cast<std::uint64_t>(s));
        first += sim.select_candidate(0, real, true) == 0;
    }
    CHECK(std::abs(first / double(slots) - 0.5) < 4.0 * std::sqrt(0.25 / slots));
}

TEST_CASE("sensing trivial cases") {
    const NetworkParams net = small_network();
    ContentParams c;
    const Popularity pop = zipf_popularity(5, 1.0);
    const NetworkSimulator sim(net, c, pop, uniform_policy(10));
    CHECK(sim.sensing_radius() == doctest::Approx(std::pow(40.0 / 0.05, 0.25)));
    SUBCASE("no other-file requester") {
        const auto real = make_slot(net, {{3, 0}}, {0}, {{3, 1}}, {0}, 0);
        CHECK(sim.sense_osa(0, 0, real, true));
    }
    SUBCASE("a very close other-file requester blocks") {
        int blocked = 0;
        for (std::uint64_t s = 0; s < 200; ++s) {
            const auto real = make_slot(net, {{3, 0}}, {0}, {{3, 0.05}}, {2}, 0, s);
            blocked += !sim.sense_osa(0, 0, real, true);
        }
        CHECK(blocked == 200);
    }
    SUBCASE("requesters beyond the sensing radius are never heard") {
        const auto real = make_slot(net, {{3, 0}}, {0}, {{3 + 2 * sim.sensing_radius(), 0}}, {2}, 0);
        CHECK(sim.sense_osa(0, 0, real, true));
    }
    SUBCASE("block probability at a fixed distance follows the exponential tail") {
        const double d = 2.0;
        const double expect = std::exp(-net.I_th * std::pow(d, net.alpha) / net.P_u);
        int blocked = 0;
        const int slots = 20000;
        for (int s = 0; s < slots; ++s) {
            const auto real = make_slot(net, {{30, 0}}, {0}, {{30, d}}, {3}, 0, static_cast<std::uint64_t>(s));
            blocked += !sim.sense_osa(0, 0, real, true);
        }
        CHECK(std::abs(blocked / double(slots) - expect) < 4.0 * std::sqrt(expect * (1 - expect) / slots));
    }
}

TEST_CASE("slot protocol trivial cases") {
    const NetworkParams net = small_network();
    ContentParams c{5, 2, 1.0, Scheme::RFS};
    const Popularity pop = zipf_popularity(5, 1.0);
    const NetworkSimulator sim(net, c, pop, uniform_policy(10));
    SUBCASE("no F-UE means no server") {
        const auto real = make_slot(net, {}, {}, {}, {}, 0);
        const SlotOutcome out = run_slot(sim, real);
        CHECK_FALSE(out.typical_server.has_value());
        CHECK_FALSE(out.typical_success);
    }
    SUBCASE("a lone server is interference free") {
        const auto real = make_slot(net, {{5, 0}}, {0}, {}, {}, 0);
        const SlotOutcome out = run_slot(sim, real);
        REQUIRE(out.typical_server.has_value());
        CHECK(*out.typical_distance == doctest::Approx(5.0));
        CHECK(std::isinf(*out.typical_sir));
        CHECK(out.typical_success);
    }
    SUBCASE("servers beyond the D2D radius are not used") {
        const auto real = make_slot(net, {{10.5, 0}}, {0}, {}, {}, 0);
        CHECK_FALSE(run_slot(sim, real).typical_server.has_value());
    }
    SUBCASE("the nearest active server is chosen") {
        const auto real = make_slot(net, {{8, 0}, {0, 4}}, {0, 0}, {}, {}, 1);
        const SlotOutcome out = run_slot(sim, real);
        REQUIRE(out.typical_server.has_value());
        CHECK(*out.typical_server == 1);
        CHECK(*out.typical_sir > 0.0);
    }
}

TEST_CASE("ratio and mean estimators") {
    const SimulationEstimate m = estimate_mean({1.0, 2.0, 3.0, 4.0});
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.half_width_95 == doctest::Approx(1.959963984540054 * std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK(estimate_mean({}).missing);
    const SimulationEstimate r = estimate_ratio({1.0, 2.0, 3.0}, {2.0, 4.0, 6.0});
    CHECK(r.mean == doctest::Approx(0.5));
    CHECK(r.half_width_95 == doctest::Approx(0.0));
    CHECK(r.conditioning_count == 12);
    const SimulationEstimate none = estimate_ratio({0.0, 0.0}, {0.0, 0.0});
    CHECK(none.missing);
    CHECK_FALSE(none.covers(0.0));
}

TEST_CASE("monte carlo is independent of the thread count") {
    const NetworkParams net = small_network();
    ContentParams c;
    const Popularity pop = zipf_popularity(c.N, c.gamma);
    MonteCarloConfig one;
    one.replications = 60;
    one.master_seed = 5;
    one.threads = 1;
    MonteCarloConfig three = one;
    three.threads = 3;
    const MonteCarloReport a = monte_carlo(net, c, pop, uniform_policy(10), one);
    const MonteCarloReport b = monte_carlo(net, c, pop, uniform_policy(10), three);
    CHECK(a.tau.mean == b.tau.mean);
    CHECK(a.tau.half_width_95 == b.tau.half_width_95);
    CHECK(a.xi.mean == b.xi.mean);
    for (std::size_t n = 0; n < 5; ++n) {
        CHECK(a.sigma_n[n].mean == b.sigma_n[n].mean);
        CHECK(a.association_distances[n] == b.association_distances[n]);
    }
    MonteCarloConfig reseeded = one;
    reseeded.master_seed = 6;
    CHECK(monte_carlo(net, c, pop, uniform_policy(10), reseeded).xi.mean != a.xi.mean);
}

TEST_CASE("monte carlo rejects zero replications") {
    MonteCarloConfig mc;
    mc.replications = 0;
    ContentParams c;
    CHECK_THROWS_AS(monte_carlo(NetworkParams{}, c, zipf_popularity(5, 1.0), uniform_policy(10), mc), ConfigError);
}

TEST_CASE("without sensing or SIR constraints delivery reduces to a cache hit") {
    NetworkParams net = small_network();
    net.I_th = 1e12;
    net.theta_u = 1e-12;
    ContentParams c;
    const Popularity pop = zipf_popularity(c.N, c.gamma);
    MonteCarloConfig mc;
    mc.replications = 200;
    const MonteCarloReport rep = monte_carlo(net, c, pop, uniform_policy(10), mc);
    for (std::size_t n = 0; n < 5; ++n) {
        CHECK(rep.osa_n[n].mean == 1.0);
        CHECK(rep.C_n[n].mean == 1.0);
    }
    double sigma = 0.0;
    for (std::size_t n = 0; n < 5; ++n) sigma += pop[n] * rep.sigma_n[n].mean;
    CHECK(rep.tau.mean == doctest::Approx(sigma).epsilon(1e-12));
}

TEST_CASE("selection frequencies agree with the analytical coefficients") {
    // Sensing disabled and the typical requester left out of selection, so each
    // F-UE sees exactly the requester process the coefficients assume. F-UEs
    // near the disk edge see fewer requesters; the disk is large enough for that
    // to stay inside the interval.
    NetworkParams net;
    net.I_th = 1e12;
    ContentParams c;
    const Popularity pop = zipf_popularity(c.N, c.gamma);
    for (Scheme s : {Scheme::RFS, Scheme::MRFS}) {
        c.scheme = s;
        MonteCarloConfig mc;
        mc.replications = 40;
        mc.stratified = false;
        mc.options.typical_feeds_selection = false;
        const MonteCarloReport rep = monte_carlo(net, c, pop, uniform_policy(10), mc);
        const ActivationTable act = activation_table(net, c, pop, uniform_policy(10), QuadratureConfig{});
        for (std::size_t n = 0; n < 5; ++n) {
            const double width = rep.xi_n[n].half_width_95 * 1.5 + 0.01 * act.xi_n[n];
            CHECK(std::abs(rep.xi_n[n].mean - act.xi_n[n]) < width);
        }
    }
}

TEST_CASE("radial profile rejects malformed bins") {
    NetworkParams net;
    ContentParams c;
    const Popularity pop = zipf_popularity(5, 1.0);
    const CachingPolicy u = uniform_policy(10);
    CHECK_THROWS_AS(radial_density_profile(net, c, pop, u, 0, 1, {1.0}, 10, 1), ConfigError);
    CHECK_THROWS_AS(radial_density_profile(net, c, pop, u, 0, 1, {1.0, 0.5}, 10, 1), ConfigError);
    CHECK_THROWS_AS(radial_density_profile(net, c, pop, u, 0, 1, {0.0, 300.0}, 10, 1), ConfigError);
    CHECK_THROWS_AS(radial_density_profile(net, c, pop, u, 0, 7, {0.0, 1.0}, 10, 1), ConfigError);
    CHECK_THROWS_AS(radial_density_profile(net, c, pop, u, 0, 1, {0.0, 1.0}, 0, 1), ConfigError);
}

TEST_CASE("radial profile far from the requester matches the unconditioned density") {
    NetworkParams net = small_network();
    ContentParams c;
    const Popularity pop = zipf_popularity(c.N, c.gamma);
    const auto profile = radial_density_profile(net, c, pop, uniform_policy(10), 0, 1, {20.0, 40.0}, 300, 3);
    const ActivationTable act = activation_table(net, c, pop, uniform_policy(10), QuadratureConfig{});
    const double expect = net.lambda_g * act.xi_n[1];
    CHECK(std::abs(profile[0].mean - expect) < 1.5 * profile[0].half_width_95 + 0.03 * expect);
}

}
