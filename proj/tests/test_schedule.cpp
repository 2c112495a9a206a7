#include <doctest.h>

#include <cmath>

#include "scoreuq/errors.hpp"
#include "scoreuq/rng.hpp"
#include "scoreuq/schedule.hpp"

using namespace scoreuq;

TEST_SUITE("schedule") {

TEST_CASE("linear schedule with two steps") {
    NoiseSchedule s = build_linear_schedule(2, 0.1, 0.2);
    CHECK(s.beta(1) == doctest::Approx(0.1));
    CHECK(s.beta(2) == doctest::Approx(0.2));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.72));
    CHECK(s.sigma(2) == doctest::Approx(0.5291502622129181));
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.sigma(0) == 0.0);
}

TEST_CASE("single-step schedule") {
    NoiseSchedule s = build_linear_schedule(1, 0.5, 0.5);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.5));
    CHECK(s.sigma(1) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("beta range is validated") {
    CHECK_THROWS_AS(build_linear_schedule(3, 0.0, 0.1), Error);
    CHECK_THROWS_AS(build_linear_schedule(3, 0.2, 0.1), Error);
    CHECK_THROWS_AS(build_linear_schedule(3, 0.1, 1.0), Error);
    CHECK_THROWS_AS(build_linear_schedule(0, 0.1, 0.2), Error);
}

TEST_CASE("from_betas reproduces the linear tables bit-for-bit") {
    NoiseSchedule a = build_linear_schedule(50, 1e-4, 0.02);
    NoiseSchedule b = schedule_from_betas(a.betas);
    CHECK(a.betas == b.betas);
    CHECK(a.alphas == b.alphas);
    CHECK(a.alpha_bars == b.alpha_bars);
    CHECK(a.sigmas == b.sigmas);
}

TEST_CASE("from_betas edge cases") {
    CHECK_THROWS_AS(schedule_from_betas({}), Error);
    CHECK_THROWS_AS(schedule_from_betas({0.5, 1.0}), Error);
    NoiseSchedule s = schedule_from_betas({0.99});
    CHECK(s.alpha_bar(1) == doctest::Approx(0.01));
    CHECK(s.sigma(1) == doctest::Approx(std::sqrt(0.99)));
}

TEST_CASE("timestep accessors reject out-of-range t") {
    NoiseSchedule s = build_linear_schedule(10, 0.1, 0.2);
    CHECK_THROWS_AS(s.beta(0), Error);
    CHECK_THROWS_AS(s.beta(11), Error);
    CHECK_THROWS_AS(s.alpha_bar(-1), Error);
}

TEST_CASE("plan examples") {
    CHECK(plan_timesteps(10, 5).steps == std::vector<int>{10, 8, 6, 4, 2});
    CHECK(plan_timesteps(5, 5).steps == std::vector<int>{5, 4, 3, 2, 1});
    CHECK_THROWS_AS(plan_timesteps(4, 5), Error);
}

TEST_CASE("schedule invariants hold for random parameters") {
    RngStream rng(2024, 0);
    for (int trial = 0; trial < 50; ++trial) {
        int T = 1 + static_cast<int>(rng.uniform_index(300));
        double lo = 1e-4 + 0.3 * rng.next_double();
        double hi = lo + (0.98 - lo) * rng.next_double();
        NoiseSchedule s = build_linear_schedule(T, lo, hi);

        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            CHECK(s.alpha_bar(t) < prev);
            CHECK(s.alpha_bar(t) == doctest::Approx(prev * s.alpha(t)).epsilon(1e-14));
            CHECK(s.sigma(t) ==
                  doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t))).epsilon(1e-14));
            prev = s.alpha_bar(t);
        }
    }
}

TEST_CASE("plans are strictly decreasing within range for random T, S") {
    RngStream rng(2025, 0);
    for (int trial = 0; trial < 100; ++trial) {
        int T = 1 + static_cast<int>(rng.uniform_index(500));
        int S = 1 + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(T)));
        TimestepPlan plan = plan_timesteps(T, S);
        REQUIRE(plan.count() == S);
        CHECK(plan.steps.front() == T);
        for (int i = 0; i < plan.count(); ++i) {
            CHECK(plan.steps[static_cast<size_t>(i)] >= 1);
            CHECK(plan.steps[static_cast<size_t>(i)] <= T);
            if (i > 0)
                CHECK(plan.steps[static_cast<size_t>(i)] <
                      plan.steps[static_cast<size_t>(i - 1)]);
        }
    }
}

}  // TEST_SUITE
