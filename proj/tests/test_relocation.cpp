#include "epor/relocation.hpp"

#include "epor/housing.hpp"
#include "epor/numerics.hpp"
#include "epor/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <limits>
#include <vector>

using namespace epor;

namespace {

// coefficients that make the intensity independent of h, lambda = 0.05/yr
IntensityParams constant_params() {
    IntensityParams p;
    p.beta = {-5.4764635519315107, 0.0, 0.0};
    return p;
}

HousingScenario constant_scenario(double level, double step = 0.5) {
    HousingScenario s;
    for (double t = 0.0; t <= 10.0 + 1e-12; t += step) s.grid.push_back(t);
    s.values.assign(s.grid.size(), level);
    return s;
}

std::vector<double> uniform_grid(double end, int n_steps) {
    std::vector<double> g(static_cast<std::size_t>(n_steps) + 1);
    for (int k = 0; k <= n_steps; ++k) g[static_cast<std::size_t>(k)] = end * k / n_steps;
    return g;
}

} // namespace

TEST_SUITE("relocation") {

TEST_CASE("intensity at the baseline activity level and its shape") {
    const IntensityParams p; // defaults
    CHECK(intensity(p, 0.0447) ==
          doctest::Approx(0.038790464523430546).epsilon(1e-14));
    CHECK(intensity_d1(p, 0.0447) ==
          doctest::Approx(0.96503057226437056).epsilon(1e-12));
    CHECK(intensity_d2(p, 0.0447) ==
          doctest::Approx(-1.3459247992506431).epsilon(1e-12));

    // quadratic score peaks at -b1/(2 b2); intensity inherits the turning point
    const double vertex = 0.082879520283913602;
    CHECK(std::fabs(intensity_d1(p, vertex)) < 1e-12);
    CHECK(intensity_d1(p, vertex - 0.02) > 0.0);
    CHECK(intensity_d1(p, vertex + 0.02) < 0.0);

    // bounded by 1/dt_ref; positive wherever the logistic has not underflowed
    for (double h = -0.3; h <= 0.55; h += 0.05) CHECK(intensity(p, h) > 0.0);
    for (double h = -1.0; h <= 2.0; h += 0.125) {
        CHECK(intensity(p, h) >= 0.0);
        CHECK(intensity(p, h) < 12.0);
    }
}

TEST_CASE("intensity derivatives agree with finite differences") {
    for (const auto map : {HazardMap::linear, HazardMap::cloglog}) {
        IntensityParams p;
        p.map = map;
        for (const double h : {-0.2, 0.01, 0.0447, 0.0829, 0.3}) {
            const double d = 1e-5;
            const double fd1 =
                (intensity(p, h + d) - intensity(p, h - d)) / (2.0 * d);
            const double fd2 =
                (intensity(p, h + d) - 2.0 * intensity(p, h) + intensity(p, h - d)) /
                (d * d);
            CHECK(intensity_d1(p, h) == doctest::Approx(fd1).epsilon(1e-6));
            CHECK(intensity_d2(p, h) ==
                  doctest::Approx(fd2).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("cloglog map reproduces the per-period probability exactly") {
    IntensityParams p;
    p.map = HazardMap::cloglog;
    for (const double h : {0.0, 0.0447, 0.1, -0.5}) {
        const double z = p.beta[0] + p.beta[1] * h + p.beta[2] * h * h;
        const double prob = 1.0 / (1.0 + std::exp(-z));
        const double lam = intensity(p, h);
        // 1 - exp(-lambda dt) == p by construction
        CHECK(-std::expm1(-lam * p.dt_ref) == doctest::Approx(prob).epsilon(1e-14));
        // cloglog >= linear map, close for small p
        IntensityParams lin;
        CHECK(lam >= intensity(lin, h));
    }
}

TEST_CASE("constant-intensity hazard curve is the exponential law") {
    const IntensityParams p = constant_params();
    const HousingScenario s = constant_scenario(0.03);
    const HazardCurve c = hazard_curve(p, s);
    REQUIRE(c.grid.size() == s.grid.size());
    for (std::size_t k = 0; k < c.grid.size(); ++k) {
        const double t = c.grid[k];
        CHECK(c.intensity[k] == doctest::Approx(0.05).epsilon(1e-12));
        CHECK(c.cumulative[k] == doctest::Approx(0.05 * t).epsilon(1e-12));
        CHECK(c.survival[k] == doctest::Approx(std::exp(-0.05 * t)).epsilon(1e-12));
        CHECK(c.density[k] ==
              doctest::Approx(0.05 * std::exp(-0.05 * t)).epsilon(1e-12));
    }
    CHECK(c.density.back() == doctest::Approx(0.030326532985631671).epsilon(1e-12));
    CHECK(c.mass() == doctest::Approx(-std::expm1(-0.5)).epsilon(1e-12));

    // segment masses add up to the total mass identically
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < c.grid.size(); ++k) sum += c.segment_mass(k);
    CHECK(sum == doctest::Approx(c.mass()).epsilon(1e-14));

    // off-node evaluation
    CHECK(realized_density(p, s, 3.7) ==
          doctest::Approx(0.05 * std::exp(-0.05 * 3.7)).epsilon(1e-12));
    CHECK(realized_density(p, s, 10.0) ==
          doctest::Approx(c.density.back()).epsilon(1e-14));
}

TEST_CASE("plain trapezoid mass converges to the exact segment rule") {
    // realistic wiggly scenario on a fine grid: the quadratic error of the
    // trapezoid against the piecewise-exponential closed form stays tiny
    HousingModel m;
    m.kind = HousingKind::ou;
    m.ou_alpha = 4.0;
    m.ou_eta = 0.2;
    const auto grid = uniform_grid(10.0, 1280); // step 1/128
    const HousingScenario s = sample_scenario(m, grid, 77, 0);
    const HazardCurve c = hazard_curve(IntensityParams{}, s);
    const double trapz = integrate_trapezoid(c.density, grid[1] - grid[0]);
    CHECK(std::fabs(trapz - c.mass()) < 1e-8);
}

TEST_CASE("relocation time sampling inverts the cumulative hazard") {
    const IntensityParams p = constant_params();
    const HazardCurve c = hazard_curve(p, constant_scenario(0.03));
    CHECK(sample_relocation_time(c, 0.2) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(sample_relocation_time(c, 0.499) ==
          doctest::Approx(0.499 / 0.05).epsilon(1e-12));
    CHECK(sample_relocation_time(c, 0.6) ==
          std::numeric_limits<double>::infinity());

    // non-constant intensity: H(tau) == draw on the trapezoidal hazard
    HousingModel m;
    m.kind = HousingKind::ou;
    m.ou_alpha = 4.0;
    m.ou_eta = 0.2;
    const auto grid = uniform_grid(10.0, 120);
    const HazardCurve wiggly =
        hazard_curve(IntensityParams{}, sample_scenario(m, grid, 5, 3));
    // scale the draws by the realized total hazard so they land inside
    for (const double frac : {0.03, 0.2, 0.55, 0.9}) {
        const double e = frac * wiggly.cumulative.back();
        const double tau = sample_relocation_time(wiggly, e);
        REQUIRE(std::isfinite(tau));
        std::size_t k = 0;
        while (k + 2 < wiggly.grid.size() && wiggly.grid[k + 1] < tau) ++k;
        const double slope = 0.5 * (wiggly.intensity[k] + wiggly.intensity[k + 1]);
        const double h_at_tau =
            wiggly.cumulative[k] + (tau - wiggly.grid[k]) * slope;
        CHECK(h_at_tau == doctest::Approx(e).epsilon(1e-10));
    }
}

TEST_CASE("quadrature expectation matches Monte Carlo for flat levels") {
    const auto grid = uniform_grid(10.0, 20);
    const IntensityParams p;
    for (const auto dist : {LevelDistribution::normal, LevelDistribution::lognormal,
                            LevelDistribution::shifted_exponential}) {
        HousingModel m;
        m.distribution = dist;
        const auto quad = expected_density(p, m, grid, 0, 1,
                                           DensityMethod::quadrature);
        const auto mc = expected_density(p, m, grid, 20000, 9,
                                         DensityMethod::monte_carlo);
        CHECK_FALSE(quad.monte_carlo);
        CHECK(mc.monte_carlo);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            CHECK(quad.std_err[k] == 0.0);
            CHECK(std::fabs(quad.expected_density[k] - mc.expected_density[k]) <
                  4.0 * mc.std_err[k] + 1e-12);
        }
        // unit probability splits between the grid span and beyond
        CHECK(quad.mass + quad.survival_at_horizon ==
              doctest::Approx(1.0).epsilon(1e-12));
        CHECK(mc.mass + mc.survival_at_horizon ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("quadrature order is effectively converged at the defaults") {
    const auto grid = uniform_grid(10.0, 20);
    HousingModel m;
    const auto a = expected_density(IntensityParams{}, m, grid, 0, 1,
                                    DensityMethod::quadrature, 32);
    const auto b = expected_density(IntensityParams{}, m, grid, 0, 1,
                                    DensityMethod::quadrature, 64);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(std::fabs(a.expected_density[k] - b.expected_density[k]) < 1e-10);
}

TEST_CASE("level uncertainty shifts the expected density off the mean scenario") {
    const auto grid = uniform_grid(10.0, 40);
    HousingModel m; // flat normal, default variance
    const IntensityParams p;
    const auto expected = expected_density(p, m, grid, 0, 1,
                                           DensityMethod::quadrature);
    const HazardCurve at_mean = hazard_curve(p, mean_path(m, grid));
    // Jensen gap at the far end is material; that gap is exactly what the
    // second-order adjustment captures
    const double gap =
        expected.expected_density.back() - at_mean.density.back();
    CHECK(std::fabs(gap) > 1e-4 * at_mean.density.back());

    // degenerate level law collapses the gap to zero
    HousingModel point = m;
    point.variance = 0.0;
    const auto degen = expected_density(p, point, grid, 0, 1,
                                        DensityMethod::quadrature);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(degen.expected_density[k] ==
              doctest::Approx(at_mean.density[k]).epsilon(1e-13));
}

TEST_CASE("automatic method routes flat levels to quadrature, paths to MC") {
    const auto grid = uniform_grid(10.0, 10);
    HousingModel flat;
    const auto q = expected_density(IntensityParams{}, flat, grid, 256, 3);
    CHECK_FALSE(q.monte_carlo);

    HousingModel ramp;
    ramp.kind = HousingKind::linear_ramp;
    const auto r = expected_density(IntensityParams{}, ramp, grid, 256, 3);
    CHECK(r.monte_carlo);
    CHECK(r.std_err.back() > 0.0);

    HousingModel ou;
    ou.kind = HousingKind::ou;
    ou.ou_alpha = 4.0;
    ou.ou_eta = 0.2;
    const auto o = expected_density(IntensityParams{}, ou, grid, 256, 3);
    CHECK(o.monte_carlo);
    // survival decreasing, densities positive
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(o.expected_density[k] > 0.0);
        if (k > 0) CHECK(o.expected_survival[k] < o.expected_survival[k - 1]);
    }
}

TEST_CASE("invalid inputs are rejected") {
    IntensityParams p;
    p.dt_ref = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);

    const IntensityParams ok;
    HousingScenario s = constant_scenario(0.03);
    s.values.pop_back();
    CHECK_THROWS_AS(hazard_curve(ok, s), std::invalid_argument);

    const HousingScenario good = constant_scenario(0.03);
    CHECK_THROWS_AS(realized_density(ok, good, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(realized_density(ok, good, 10.5), std::invalid_argument);

    HousingModel m; // flat_random
    CHECK_THROWS_AS(expected_density(ok, m, {0.0}, 16, 1), std::invalid_argument);
    HousingModel ou;
    ou.kind = HousingKind::ou;
    CHECK_THROWS_AS(
        expected_density(ok, ou, uniform_grid(10.0, 10), 0, 1,
                         DensityMethod::monte_carlo),
        std::invalid_argument);
}

} // TEST_SUITE
