#include "epor/hullwhite.hpp"

#include "epor/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace epor;

namespace {

DiscountCurve flat3() {
    return flat_par_curve({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.03, 1);
}

} // namespace

TEST_SUITE("hullwhite") {

TEST_CASE("B factor and variance limits") {
    const HullWhiteModel m({0.05, 0.01}, flat3());
    CHECK(m.b_factor(1.0, 1.0) == doctest::Approx(0.0));
    CHECK(m.b_factor(2.0, 7.0) == doctest::Approx(4.4239843385719026).epsilon(1e-12));
    CHECK(m.state_variance(0.0) == doctest::Approx(0.0));
    CHECK(m.state_variance(2.0) ==
          doctest::Approx(0.00018126924692201814).epsilon(1e-12));
    CHECK(m.convexity_shift(2.0) ==
          doctest::Approx(0.00018111834012125425).epsilon(1e-12));

    // small mean reversion degenerates to B = s - t
    const HullWhiteModel tiny({1e-14, 0.01}, flat3());
    CHECK(tiny.b_factor(1.0, 4.0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("time-0 bond prices reproduce the curve") {
    const HullWhiteModel m({0.05, 0.01}, flat3());
    for (double s = 0.5; s <= 10.0; s += 0.5)
        CHECK(m.zcb_price(0.0, s, 0.0) ==
              doctest::Approx(m.curve().discount(s)).epsilon(1e-14));
}

TEST_CASE("zero-coupon option prices match the closed form and parity") {
    const HullWhiteModel m({0.05, 0.01}, flat3());
    const double call = m.zcb_call(2.0, 7.0, 0.9);
    const double put = m.zcb_put(2.0, 7.0, 0.9);
    CHECK(call == doctest::Approx(0.0069188773679192785).epsilon(1e-12));
    CHECK(put == doctest::Approx(0.042163684244944459).epsilon(1e-12));
    // call - put = P0(S) - X P0(T)
    const double fwd =
        m.curve().discount(7.0) - 0.9 * m.curve().discount(2.0);
    CHECK(call - put == doctest::Approx(fwd).epsilon(1e-12));
}

TEST_CASE("vanishing volatility collapses options to intrinsic value") {
    const HullWhiteModel m({0.05, 0.0}, flat3());
    const double fwd = m.curve().discount(7.0) - 0.9 * m.curve().discount(2.0);
    CHECK(m.zcb_call(2.0, 7.0, 0.9) == doctest::Approx(std::max(fwd, 0.0)));
    CHECK(m.zcb_put(2.0, 7.0, 0.9) ==
          doctest::Approx(std::max(-fwd, 0.0)).epsilon(1e-12));
    // a strike below the forward price leaves the put worthless
    CHECK(m.zcb_put(2.0, 7.0, 0.8) == doctest::Approx(0.0));
}

TEST_CASE("exact transitions: discounted bonds are martingales") {
    // This is the test that catches a missing convexity correction in the
    // reconstitution formula: E[D(0,t)] must equal P(0,t) and
    // E[D(0,t) P(t,s|x_t)] must equal P(0,s).
    const HullWhiteModel m({0.05, 0.01}, flat3());
    const double t = 5.0, s = 10.0;
    const int steps = 250;
    std::vector<double> grid(steps + 1);
    for (int k = 0; k <= steps; ++k) grid[k] = t * k / steps;

    const std::size_t n_paths = 200000;
    const ShortRatePaths paths = simulate_short_rate(m, grid, n_paths, 99);

    std::vector<double> disc(n_paths), disc_bond(n_paths);
    for (std::size_t p = 0; p < n_paths; ++p) {
        const double d = std::exp(-paths.integral(p, steps));
        disc[p] = d;
        disc_bond[p] = d * m.zcb_price(t, s, paths.state(p, steps));
    }
    const MeanStdErr m1 = mean_and_std_err(disc);
    const MeanStdErr m2 = mean_and_std_err(disc_bond);
    // trapezoid bias on the rate integral is ~sigma^2 t dt^2 terms, far
    // below the Monte Carlo noise at these settings
    CHECK(std::fabs(m1.mean - m.curve().discount(t)) < 3.0 * m1.std_err);
    CHECK(std::fabs(m2.mean - m.curve().discount(s)) < 3.0 * m2.std_err);
}

TEST_CASE("state transition variance matches the stationary formula") {
    const double a = 0.4, sig = 0.02;
    const HullWhiteModel m({a, sig}, flat3());
    const double t = 6.0;
    // one-shot transition from 0: Var = sig^2 (1 - e^{-2at}) / (2a)
    std::vector<double> grid{0.0, t};
    const ShortRatePaths paths = simulate_short_rate(m, grid, 100000, 7);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        const double x = paths.state(p, 1);
        s1 += x;
        s2 += x * x;
    }
    const double var = s2 / double(paths.n_paths);
    const double expected = m.state_variance(t);
    CHECK(std::fabs(s1 / double(paths.n_paths)) < 4.0 * sig / std::sqrt(2e5 * a));
    CHECK(var == doctest::Approx(expected).epsilon(0.05));
    // near stationarity at 2at = 4.8
    CHECK(expected == doctest::Approx(sig * sig / (2 * a)).epsilon(0.01));
}

TEST_CASE("path generation is independent of materialization order") {
    const HullWhiteModel m({0.05, 0.01}, flat3());
    std::vector<double> grid{0.0, 0.5, 1.0, 2.0};
    const ShortRatePaths a = simulate_short_rate(m, grid, 32, 5);
    HwPathSampler sampler(m, grid, 5);
    std::vector<double> states(grid.size()), integral(grid.size());
    sampler.fill_path(17, states, integral);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(states[k] == a.state(17, k));
        CHECK(integral[k] == a.integral(17, k));
    }
}

TEST_CASE("invalid parameters and grids are rejected") {
    CHECK_THROWS_AS(HullWhiteModel({-0.1, 0.01}, flat3()), std::invalid_argument);
    CHECK_THROWS_AS(HullWhiteModel({0.05, -0.01}, flat3()), std::invalid_argument);
    const HullWhiteModel m({0.05, 0.01}, flat3());
    std::vector<double> bad{0.5, 1.0}; // does not start at 0
    CHECK_THROWS_AS(simulate_short_rate(m, bad, 4, 1), std::invalid_argument);
}

} // TEST_SUITE
