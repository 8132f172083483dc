#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fogd2d/optimizer.hpp"

using namespace fogd2d;

TEST_SUITE("optimizer") {

TEST_CASE("projection removes the all-ones component") {
    for (double v : projection_matrix_apply({1.0, 1.0, 1.0, 1.0})) CHECK(v == 0.0);
    CHECK(projection_matrix_apply({1.0, -1.0}) == std::vector<double>{1.0, -1.0});
    CHECK(projection_matrix_apply({}).empty());
    std::mt19937_64 gen(3);
    std::normal_distribution<double> g(0.0, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(1 + trial % 17);
        for (double& x : v) x = g(gen);
        const auto p = projection_matrix_apply(v);
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0)) < 1e-12);
    }
}

TEST_CASE("face projection holds zero coordinates that would go negative") {
    const auto d = face_projected_direction({0.0, 0.5, 0.5}, {-3.0, 1.0, 0.0});
    CHECK(d[0] == 0.0);
    CHECK(d[1] == doctest::Approx(0.5));
    CHECK(d[2] == doctest::Approx(-0.5));
    // An interior point sees the plain projection.
    const auto interior = face_projected_direction({0.2, 0.3, 0.5}, {-3.0, 1.0, 0.0});
    CHECK(interior == projection_matrix_apply({-3.0, 1.0, 0.0}));
    // A zero coordinate with an inward component stays free.
    const auto inward = face_projected_direction({0.0, 1.0}, {2.0, 0.0});
    CHECK(inward[0] == doctest::Approx(1.0));
    CHECK(inward[1] == doctest::Approx(-1.0));
}

TEST_CASE("stepsize bounds") {
    CHECK(stepsize_bounds({0.5, 0.5}, {0.5, -0.5}) == doctest::Approx(1.0));
    CHECK(stepsize_bounds({1.0, 0.0}, {0.5, -0.5}) == 0.0);
    CHECK(stepsize_bounds({0.3, 0.7}, {0.0, 0.0}) == 0.0);
    CHECK(stepsize_bounds({0.2, 0.3, 0.5}, {0.1, 0.1, -0.2}) == doctest::Approx(2.5));
}

TEST_CASE("stepsize bounds keep random steps feasible") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t J = 2 + static_cast<std::size_t>(trial % 9);
        std::vector<double> c(J);
        for (double& x : c) x = u(gen) < 0.2 ? 0.0 : -std::log(u(gen));
        double total = std::accumulate(c.begin(), c.end(), 0.0);
        if (total == 0.0) {
            c[0] = 1.0;
            total = 1.0;
        }
        for (double& x : c) x /= total;
        std::vector<double> grad(J);
        for (double& x : grad) x = g(gen);
        const auto d = face_projected_direction(c, grad);
        const double s = stepsize_bounds(c, d);
        REQUIRE(s >= 0.0);
        double sum = 0.0;
        for (std::size_t i = 0; i < J; ++i) {
            const double v = c[i] + s * d[i];
            CHECK(v >= -1e-12);
            CHECK(v <= 1.0 + 1e-12);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("line search") {
    CHECK(line_search([](double s) { return s; }, 0.0, 1e-8) == 0.0);
    const double s_star = 0.37;
    const double q = line_search([&](double s) { return -(s - s_star) * (s - s_star); }, 2.0, 1e-8);
    CHECK(std::abs(q - s_star) < 1e-8);
    CHECK(line_search([](double s) { return std::exp(s); }, 3.0, 1e-8) == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(line_search([](double s) { return -s; }, 1.0, 1e-8) == 0.0);
}

TEST_CASE("single combination returns immediately") {
    NetworkParams net;
    ContentParams c{4, 4, 1.0, Scheme::RFS};
    const auto r = optimize_caching(net, c, zipf_popularity(4, 1.0), OptimizerConfig{});
    CHECK(r.policy.c == std::vector<double>{1.0});
    CHECK(r.trace.converged);
    CHECK(r.trace.steps.size() == 1);
}

TEST_CASE("config validation") {
    OptimizerConfig cfg;
    cfg.sigma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = OptimizerConfig{};
    cfg.max_iterations = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("symmetric library keeps the uniform policy") {
    NetworkParams net;
    ContentParams c{5, 2, 0.0, Scheme::RFS};
    const Popularity pop = zipf_popularity(5, 0.0);
    const ScdpModel model(net, c, pop);
    const auto r = optimize_caching(model, OptimizerConfig{});
    CHECK(std::abs(r.trace.final_tau - model.tau(uniform_policy(10))) < 1e-8);
}

TEST_CASE("ascent is monotone, feasible and beats the baselines") {
    NetworkParams net;
    for (Scheme s : {Scheme::RFS, Scheme::MRFS}) {
        ContentParams c{5, 2, 1.0, s};
        const Popularity pop = zipf_popularity(5, 1.0);
        const ScdpModel model(net, c, pop);
        const auto r = optimize_caching(model, OptimizerConfig{});
        double prev = r.trace.initial_tau;
        for (const auto& step : r.trace.steps) {
            CHECK(step.tau >= prev - 1e-12);
            prev = std::max(prev, step.tau);
        }
        CHECK(std::abs(std::accumulate(r.policy.c.begin(), r.policy.c.end(), 0.0) - 1.0) < 1e-9);
        for (double v : r.policy.c) CHECK((v >= 0.0 && v <= 1.0));
        CHECK(r.trace.final_tau == doctest::Approx(model.tau(r.policy)).epsilon(1e-14));
        CHECK(r.trace.final_tau >= model.tau(uniform_policy(10)));
        CHECK(r.trace.final_tau >= model.tau(mpc_policy(model.combinations(), pop)) - 1e-9);
    }
}

TEST_CASE("stationarity shrinks with sigma") {
    NetworkParams net;
    ContentParams c{5, 2, 0.8, Scheme::RFS};
    const ScdpModel model(net, c, zipf_popularity(5, 0.8));
    OptimizerConfig loose;
    loose.sigma = 1e-3;
    loose.max_iterations = 2000;
    OptimizerConfig tight = loose;
    tight.sigma = 1e-9;
    const auto a = optimize_caching(model, loose);
    const auto b = optimize_caching(model, tight);
    CHECK(b.trace.stationarity <= a.trace.stationarity);
    CHECK(b.trace.final_tau >= a.trace.final_tau - 1e-12);
}

TEST_CASE("finite-difference mode reaches the same optimum") {
    NetworkParams net;
    ContentParams c{4, 2, 1.0, Scheme::MRFS};
    const ScdpModel model(net, c, zipf_popularity(4, 1.0));
    const auto a = optimize_caching(model, OptimizerConfig{}, GradientMode::Analytic);
    const auto f = optimize_caching(model, OptimizerConfig{}, GradientMode::FiniteDifference);
    CHECK(f.trace.final_tau == doctest::Approx(a.trace.final_tau).epsilon(1e-5));
}

TEST_CASE("explicit starting policy is honoured") {
    NetworkParams net;
    ContentParams c{3, 2, 1.0, Scheme::RFS};
    const ScdpModel model(net, c, zipf_popularity(3, 1.0));
    const CachingPolicy start{{0.0, 0.0, 1.0}};
    const auto r = optimize_caching(model, OptimizerConfig{}, GradientMode::Analytic, &start);
    CHECK(r.trace.initial_tau == doctest::Approx(model.tau(start)));
    CHECK(r.trace.final_tau >= r.trace.initial_tau);
}

}
