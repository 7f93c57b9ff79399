#include "epor/housing.hpp"

#include "epor/numerics.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace epor;

namespace {

HousingModel ou_model(TrendKind trend, double alpha, double eta) {
    HousingModel m;
    m.kind = HousingKind::ou;
    m.trend = trend;
    m.ou_alpha = alpha;
    m.ou_eta = eta;
    return m;
}

} // namespace

TEST_SUITE("housing") {

TEST_CASE("level quantiles match the moment-matched distributions") {
    HousingModel m; // flat_random normal by default
    const double sigma = std::sqrt(m.variance);
    CHECK(m.level_quantile(0.5) == doctest::Approx(m.mean).epsilon(1e-12));
    CHECK(m.level_quantile(0.975) ==
          doctest::Approx(m.mean + sigma * norm_ppf(0.975)).epsilon(1e-12));

    m.distribution = LevelDistribution::lognormal;
    const double s2 = std::log1p(m.variance / (m.mean * m.mean));
    const double mu_l = std::log(m.mean) - 0.5 * s2;
    CHECK(m.level_quantile(0.5) == doctest::Approx(std::exp(mu_l)).epsilon(1e-12));
    CHECK(m.level_quantile(1e-12) > 0.0);

    m.distribution = LevelDistribution::shifted_exponential;
    // support starts at mean - sd, median at shift + sd log 2
    CHECK(m.level_quantile(1e-15) == doctest::Approx(m.mean - sigma).epsilon(1e-9));
    CHECK(m.level_quantile(0.5) ==
          doctest::Approx(m.mean - sigma + sigma * std::log(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(m.level_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(m.level_quantile(1.0), std::invalid_argument);
}

TEST_CASE("flat level scenarios reproduce the drawn-level moments") {
    const std::vector<double> grid{0.0, 2.5, 5.0, 10.0};
    for (const auto dist : {LevelDistribution::normal, LevelDistribution::lognormal,
                            LevelDistribution::shifted_exponential}) {
        HousingModel m;
        m.distribution = dist;
        const std::size_t n = 200000;
        const auto scen = sample_scenarios(m, grid, n, 7);
        std::vector<double> levels(n);
        for (std::size_t i = 0; i < n; ++i) {
            // constant within a scenario
            CHECK(scen[i].values.front() == scen[i].values.back());
            levels[i] = scen[i].values.front();
        }
        const auto ms = mean_and_std_err(levels);
        CHECK(std::fabs(ms.mean - m.mean) < 4.0 * ms.std_err);
        double var = 0.0;
        for (const double l : levels) var += (l - ms.mean) * (l - ms.mean);
        var /= static_cast<double>(n - 1);
        // variance SE ~ var sqrt(2/n) for the normal; allow extra for the
        // skewed laws
        CHECK(var == doctest::Approx(m.variance).epsilon(0.05));
        if (dist == LevelDistribution::lognormal)
            for (const double l : levels) REQUIRE(l > 0.0);
        if (dist == LevelDistribution::shifted_exponential)
            for (const double l : levels)
                REQUIRE(l >= m.mean - std::sqrt(m.variance) - 1e-15);
    }
}

TEST_CASE("shared uniforms make the level draws comonotone across laws") {
    const std::vector<double> grid{0.0, 1.0};
    HousingModel normal;
    HousingModel lognormal;
    lognormal.distribution = LevelDistribution::lognormal;
    const double s2 = std::log1p(normal.variance / (normal.mean * normal.mean));
    const double mu_l = std::log(normal.mean) - 0.5 * s2;
    for (std::uint64_t i = 0; i < 32; ++i) {
        const double a = sample_scenario(normal, grid, 11, i).values[0] - normal.mean;
        const double b = std::log(sample_scenario(lognormal, grid, 11, i).values[0]) - mu_l;
        CHECK(a * b >= 0.0);
    }
}

TEST_CASE("ramp scenarios interpolate mean to drawn terminal level") {
    HousingModel m;
    m.kind = HousingKind::linear_ramp;
    const std::vector<double> grid{0.0, 2.0, 5.0, 7.5, 10.0};
    const auto s = sample_scenario(m, grid, 3, 0);
    CHECK(s.values[0] == doctest::Approx(m.mean));
    const double terminal = s.values.back();
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(s.values[k] ==
              doctest::Approx(m.mean + (terminal - m.mean) * grid[k] / 10.0)
                  .epsilon(1e-12));

    // covariance: zero at the anchor, full variance at the horizon,
    // bilinear in between
    const Eigen::MatrixXd cov = covariance_matrix(m, grid);
    CHECK(cov(0, 0) == 0.0);
    CHECK(cov(4, 4) == doctest::Approx(m.variance).epsilon(1e-12));
    CHECK(cov(1, 2) == doctest::Approx(m.variance * 0.2 * 0.5).epsilon(1e-12));

    // terminal sample variance matches
    const std::size_t n = 100000;
    const auto scen = sample_scenarios(m, grid, n, 5);
    double mean = 0.0;
    for (const auto& sc : scen) mean += sc.values.back();
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& sc : scen)
        var += (sc.values.back() - mean) * (sc.values.back() - mean);
    var /= static_cast<double>(n - 1);
    CHECK(var == doctest::Approx(m.variance).epsilon(0.05));
}

TEST_CASE("mean-reverting mean path matches the closed-form ODE solution") {
    // m'(t) = alpha (theta(t) - m), theta affine: solution
    //   m(t) = theta(t) - slope/alpha + (h0 - theta(0) + slope/alpha) e^{-alpha t}
    HousingModel m = ou_model(TrendKind::increasing, 1.3, 0.2);
    m.initial_level = 0.06;
    const std::vector<double> grid{0.0, 0.3, 1.1, 2.0, 3.7};
    const auto path = mean_path(m, grid);
    const double slope = m.theta_slope();
    CHECK(slope == doctest::Approx(2.0 * std::sqrt(m.variance) / 10.0).epsilon(1e-14));
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const double expect = m.theta(t) - slope / m.ou_alpha +
                              (0.06 - m.mean + slope / m.ou_alpha) *
                                  std::exp(-m.ou_alpha * t);
        CHECK(path.values[k] == doctest::Approx(expect).epsilon(1e-12));
    }
    // flat trend decays to the mean
    HousingModel flat = ou_model(TrendKind::flat, 0.8, 0.1);
    flat.initial_level = 0.10;
    const auto fp = mean_path(flat, {0.0, 5.0});
    CHECK(fp.values[1] ==
          doctest::Approx(flat.mean + (0.10 - flat.mean) * std::exp(-4.0))
              .epsilon(1e-12));
}

TEST_CASE("mean-reverting covariance kernel and sampler agree with theory") {
    HousingModel m = ou_model(TrendKind::increasing, 2.0, 0.15);
    const std::vector<double> grid{0.0, 0.5, 1.5, 3.0};
    const Eigen::MatrixXd cov = covariance_matrix(m, grid);
    CHECK(cov(0, 0) == doctest::Approx(0.0));
    const double scale = m.ou_eta * m.ou_eta / (2.0 * m.ou_alpha);
    CHECK(cov(3, 3) ==
          doctest::Approx(scale * (1.0 - std::exp(-2.0 * 2.0 * 3.0))).epsilon(1e-12));
    CHECK(cov(1, 3) ==
          doctest::Approx(scale * (std::exp(-2.0 * 2.5) - std::exp(-2.0 * 3.5)))
              .epsilon(1e-12));

    const std::size_t n = 100000;
    const auto scen = sample_scenarios(m, grid, n, 2024);
    const auto mp = mean_path(m, grid);
    // terminal mean within 4 standard errors
    std::vector<double> terminal(n);
    for (std::size_t i = 0; i < n; ++i) terminal[i] = scen[i].values[3];
    const auto ms = mean_and_std_err(terminal);
    CHECK(std::fabs(ms.mean - mp.values[3]) < 4.0 * ms.std_err);
    // terminal variance and a cross-covariance within ~4 sampling errors
    double var = 0.0, cross = 0.0, mean1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean1 += scen[i].values[1];
    mean1 /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        var += (terminal[i] - ms.mean) * (terminal[i] - ms.mean);
        cross += (scen[i].values[1] - mean1) * (terminal[i] - ms.mean);
    }
    var /= static_cast<double>(n - 1);
    cross /= static_cast<double>(n - 1);
    CHECK(var == doctest::Approx(cov(3, 3)).epsilon(0.04));
    const double cross_se =
        std::sqrt((cov(1, 1) * cov(3, 3) + cov(1, 3) * cov(1, 3)) /
                  static_cast<double>(n));
    CHECK(std::fabs(cross - cov(1, 3)) < 4.0 * cross_se);
}

TEST_CASE("degenerate noise collapses scenarios onto the mean path") {
    HousingModel m;
    m.variance = 0.0;
    const std::vector<double> grid{0.0, 1.0, 2.0};
    const auto s = sample_scenario(m, grid, 9, 4);
    for (const double v : s.values) CHECK(v == m.mean);

    HousingModel ou = ou_model(TrendKind::decreasing, 3.0, 0.0);
    const auto so = sample_scenario(ou, grid, 9, 4);
    const auto mo = mean_path(ou, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(so.values[k] == doctest::Approx(mo.values[k]).epsilon(1e-14));
    CHECK(covariance_matrix(ou, grid).norm() == 0.0);
}

TEST_CASE("streaming sampler reproduces the batch sampler") {
    HousingModel m = ou_model(TrendKind::flat, 5.0, 0.2);
    const std::vector<double> grid{0.0, 0.25, 0.5, 1.0, 4.0};
    const auto batch = sample_scenarios(m, grid, 8, 31);
    for (std::uint64_t i = 0; i < 8; ++i) {
        const auto one = sample_scenario(m, grid, 31, i);
        for (std::size_t k = 0; k < grid.size(); ++k)
            CHECK(one.values[k] == batch[i].values[k]);
    }
    // different seed, different draws
    const auto other = sample_scenario(m, grid, 32, 0);
    CHECK(other.values.back() != batch[0].values.back());
}

TEST_CASE("invalid configurations are rejected") {
    HousingModel m;
    CHECK_THROWS_AS(mean_path(m, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(mean_path(m, {0.0, 1.0, 0.5}), std::invalid_argument);
    m.variance = -1.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    HousingModel log_bad;
    log_bad.distribution = LevelDistribution::lognormal;
    log_bad.mean = 0.0;
    CHECK_THROWS_AS(log_bad.validate(), std::invalid_argument);
    HousingModel ou = ou_model(TrendKind::flat, 0.0, 0.1);
    CHECK_THROWS_AS(ou.validate(), std::invalid_argument);
    CHECK_THROWS_AS(sample_scenarios(HousingModel{}, {0.0, 1.0}, 0, 1),
                    std::invalid_argument);
}

} // TEST_SUITE
