#include "epor/calibration.hpp"

#include "epor/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

using namespace epor;

namespace {

std::vector<HmObservation> monthly_series(const std::vector<double>& h_levels,
                                          double p = 0.003) {
    std::vector<HmObservation> obs(h_levels.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i].year = 2000 + static_cast<int>(i) / 12;
        obs[i].month = static_cast<int>(i) % 12 + 1;
        obs[i].h_frac = h_levels[i] * month_dt;
        obs[i].p_frac = p;
    }
    return obs;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

} // namespace

TEST_SUITE_BEGIN("calibration");

// ---- moment estimators --------------------------------------------------------

TEST_CASE("moment fit matches hand-computed sample moments") {
    const double mu = 4.470e-2;
    const double sd = std::sqrt(1.215e-4);
    const auto obs = monthly_series({mu - sd, mu + sd});

    const auto fit = moment_fit(obs, LevelDistribution::normal);
    CHECK(fit.mean == doctest::Approx(mu).epsilon(1e-12));
    CHECK(fit.variance == doctest::Approx(sd * sd).epsilon(1e-12));
    CHECK(fit.param1 == doctest::Approx(mu).epsilon(1e-12));
    CHECK(fit.param2 == doctest::Approx(sd).epsilon(1e-12));
    CHECK(fit.observations == 2);

    // the fitted flat model carries exactly these two moments
    const HousingModel m = fit.model();
    CHECK(m.kind == HousingKind::flat_random);
    CHECK(m.mean == doctest::Approx(HousingModel{}.mean).epsilon(1e-12));
    CHECK(m.variance == doctest::Approx(HousingModel{}.variance).epsilon(1e-12));

    // law-specific parameters solved exactly from the two moments
    const auto logn = moment_fit(obs, LevelDistribution::lognormal);
    const double s2 = std::log1p(sd * sd / (mu * mu));
    CHECK(logn.param1 == doctest::Approx(std::log(mu) - 0.5 * s2).epsilon(1e-12));
    CHECK(logn.param2 == doctest::Approx(std::sqrt(s2)).epsilon(1e-12));

    const auto sexp = moment_fit(obs, LevelDistribution::shifted_exponential);
    CHECK(sexp.param1 == doctest::Approx(mu - sd).epsilon(1e-12));
    CHECK(sexp.param2 == doctest::Approx(sd).epsilon(1e-12));
}

TEST_CASE("constant series degenerates to a point mass") {
    const auto obs = monthly_series(std::vector<double>(24, 0.0447));
    const auto fit = moment_fit(obs, LevelDistribution::normal);
    CHECK(fit.mean == doctest::Approx(0.0447).epsilon(1e-12));
    CHECK(fit.variance == 0.0);

    // a zero-variance sample cannot pin the skewed laws
    CHECK_THROWS_AS(moment_fit(obs, LevelDistribution::lognormal), CalibrationError);
    CHECK_THROWS_AS(moment_fit(obs, LevelDistribution::shifted_exponential),
                    CalibrationError);
}

TEST_CASE("moment fit recovers the moments of a large normal sample") {
    const double mu = 4.470e-2;
    const double sd = std::sqrt(1.215e-4);
    Rng rng(2024, 0);
    std::vector<double> h(100000);
    // clamp the handful of sub-zero draws (~2e-5 probability) so the rows
    // stay valid fractions; the bias is far below the tolerance
    for (auto& v : h) v = std::max(0.0, mu + sd * rng.normal());
    const auto fit = moment_fit(monthly_series(h), LevelDistribution::normal);
    CHECK(fit.mean == doctest::Approx(mu).epsilon(0.01));
    CHECK(fit.variance == doctest::Approx(sd * sd).epsilon(0.05));
}

TEST_CASE("moment fit input validation") {
    CHECK_THROWS_AS(moment_fit(monthly_series({0.05}), LevelDistribution::normal),
                    std::invalid_argument);
    auto bad = monthly_series({0.05, 0.06});
    bad[1].h_frac = -0.1;
    CHECK_THROWS_AS(moment_fit(bad, LevelDistribution::normal), std::invalid_argument);
    bad[1].h_frac = 0.004;
    bad[1].month = 13;
    CHECK_THROWS_AS(moment_fit(bad, LevelDistribution::normal), std::invalid_argument);
}

// ---- OU maximum likelihood ----------------------------------------------------

TEST_CASE("ou mle is exact on a noiseless mean-reverting path") {
    const double alpha = 3.0, theta = 0.05, h0 = 0.09;
    const double rho = std::exp(-alpha * month_dt);
    std::vector<double> h(60);
    for (std::size_t i = 0; i < h.size(); ++i)
        h[i] = theta + (h0 - theta) * std::pow(rho, static_cast<double>(i));
    const auto fit = ou_mle(monthly_series(h));
    CHECK(fit.alpha == doctest::Approx(alpha).epsilon(1e-9));
    CHECK(fit.rho == doctest::Approx(rho).epsilon(1e-10));
    CHECK(fit.theta == doctest::Approx(theta).epsilon(1e-9));
    CHECK(fit.eta < 1e-8);
    CHECK(fit.innovation_sd < 1e-10);
    CHECK(!fit.weakly_identified);
    CHECK(fit.transitions == 59);
}

TEST_CASE("ou mle recovers simulated dynamics at monthly-identifiable speed") {
    HousingModel model;
    model.kind = HousingKind::ou;
    model.ou_alpha = 9.0;
    model.ou_eta = 0.03;
    model.mean = 0.0447;
    const auto obs = synth_generate(IntensityParams{}, model, 600, 100, 14);
    const auto fit = ou_mle(obs);
    CHECK(fit.alpha == doctest::Approx(9.0).epsilon(0.25));
    CHECK(fit.eta == doctest::Approx(0.03).epsilon(0.10));
    CHECK(fit.theta == doctest::Approx(0.0447).epsilon(0.05));
    CHECK(!fit.weakly_identified);
    CHECK(fit.transitions == 599);
}

TEST_CASE("fast mean reversion is flagged as weakly identified") {
    // at the default speed the process decorrelates within one month, so the
    // lag-1 coefficient sits in the sampling noise around zero: depending on
    // the draw the fit either rejects the series as non-mean-reverting or
    // reports a heavily biased alpha with the weak-identification flag set
    const HousingModel model; // flat kind is ignored below
    HousingModel fast;
    fast.kind = HousingKind::ou; // alpha 126, eta 0.115 defaults
    (void)model;

    const auto obs6 = synth_generate(IntensityParams{}, fast, 132, 100, 6);
    const auto fit = ou_mle(obs6);
    CHECK(fit.weakly_identified);
    CHECK(fit.alpha * month_dt >= 1.0);
    // neither alpha nor eta is anywhere near the generating values: the
    // monthly series carries no information about them
    CHECK(std::fabs(fit.alpha / 126.0 - 1.0) > 0.25);
    CHECK(std::fabs(fit.eta / 0.115 - 1.0) > 0.25);

    const auto obs1 = synth_generate(IntensityParams{}, fast, 132, 100, 1);
    CHECK_THROWS_AS(ou_mle(obs1), CalibrationError);
}

TEST_CASE("white noise is flagged, oscillation rejected") {
    Rng rng(22, 0);
    std::vector<double> h(240);
    for (auto& v : h) v = 0.0447 + 0.005 * rng.normal();
    const auto fit = ou_mle(monthly_series(h));
    CHECK(fit.weakly_identified);
    CHECK(fit.alpha * month_dt >= 1.0);

    // perfectly anti-correlated series has a negative lag-1 coefficient
    std::vector<double> osc(24);
    for (std::size_t i = 0; i < osc.size(); ++i)
        osc[i] = 0.0447 + (i % 2 ? 0.005 : -0.005);
    CHECK_THROWS_AS(ou_mle(monthly_series(osc)), CalibrationError);
}

TEST_CASE("ou mle input validation") {
    CHECK_THROWS_AS(ou_mle(monthly_series({0.04, 0.05})), std::invalid_argument);
    auto gap = monthly_series({0.04, 0.05, 0.04, 0.05});
    gap[2].month += 1; // skip a month
    gap[3].month += 1;
    CHECK_THROWS_AS(ou_mle(gap), std::invalid_argument);
    CHECK_THROWS_AS(ou_mle(monthly_series(std::vector<double>(12, 0.05))),
                    CalibrationError); // no variation
}

// ---- logistic intensity regression --------------------------------------------

namespace {

HousingModel wide_activity_model() {
    // wide stationary spread straddling the intensity's vertex, so all three
    // coefficients carry real signal
    HousingModel m;
    m.kind = HousingKind::ou;
    m.mean = 0.08;
    m.ou_alpha = 126.0;
    m.ou_eta = 0.35;
    return m;
}

} // namespace

TEST_CASE("logistic fit recovers its generating coefficients") {
    const IntensityParams truth;
    const auto obs = synth_generate(truth, wide_activity_model(), 132, 10000, 8);
    const auto fit = logistic_intensity_fit(obs);
    REQUIRE(fit.binomial);
    CHECK(fit.iterations <= 200);
    CHECK(fit.gradient_norm <= 1e-10);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(fit.params.beta[i] ==
              doctest::Approx(truth.beta[i]).epsilon(0.05));
    CHECK(fit.params.dt_ref == doctest::Approx(month_dt));

    // with a constant cohort the exposure weights are proportional to unit
    // weights, so the fraction-level fit lands on the same optimum; only the
    // information (hence the standard errors) scales, by sqrt(cohort)
    auto unweighted = obs;
    for (auto& o : unweighted) o.exposures = 0.0;
    const auto quasi = logistic_intensity_fit(unweighted);
    CHECK(!quasi.binomial);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(quasi.params.beta[i] ==
              doctest::Approx(fit.params.beta[i]).epsilon(1e-8));
        CHECK(quasi.std_err[i] / fit.std_err[i] ==
              doctest::Approx(100.0).epsilon(1e-4));
    }
}

TEST_CASE("fitted coefficients reproduce the monthly probability exactly") {
    const auto obs =
        synth_generate(IntensityParams{}, wide_activity_model(), 132, 2000, 8);
    const auto fit = logistic_intensity_fit(obs);
    // annual-coordinate evaluation agrees with the monthly-coordinate fit at
    // matched arguments: the dt^i rescaling is pure algebra
    for (const double h_dt : {0.003, 0.0067, 0.012}) {
        const double h = h_dt / month_dt;
        const double monthly = sigmoid(fit.beta_monthly[0] +
                                       fit.beta_monthly[1] * h_dt +
                                       fit.beta_monthly[2] * h_dt * h_dt);
        CHECK(intensity(fit.params, h) * fit.params.dt_ref ==
              doctest::Approx(monthly).epsilon(1e-12));
    }
}

TEST_CASE("constant relocation probability degenerates to the intercept") {
    std::vector<double> h(24);
    for (std::size_t i = 0; i < h.size(); ++i)
        h[i] = 0.024 + 0.06 * static_cast<double>(i) / 23.0;
    const auto fit = logistic_intensity_fit(monthly_series(h, 0.004));
    // p does not depend on h at all: the slope terms never move off zero
    CHECK(fit.params.beta[1] == 0.0);
    CHECK(fit.params.beta[2] == 0.0);
    CHECK(fit.params.beta[0] ==
          doctest::Approx(std::log(0.004 / 0.996)).epsilon(1e-12));
    CHECK(fit.iterations == 0);
}

TEST_CASE("a vanishing quadratic coefficient is covered by its interval") {
    IntensityParams lin;
    lin.beta = {-7.5, 25.0, 0.0};
    const auto obs = synth_generate(lin, wide_activity_model(), 132, 30000, 31);
    const auto fit = logistic_intensity_fit(obs);
    CHECK(std::fabs(fit.params.beta[2]) <= 1.96 * fit.std_err[2]);
    // the other two stay near truth even with the redundant regressor
    CHECK(fit.params.beta[0] == doctest::Approx(-7.5).epsilon(0.1));
    CHECK(fit.params.beta[1] == doctest::Approx(25.0).epsilon(0.1));
}

TEST_CASE("logistic fit input validation and failure modes") {
    std::vector<double> h(12, 0.0447);
    // constant regressor: slopes unidentifiable
    CHECK_THROWS_AS(logistic_intensity_fit(monthly_series(h)), CalibrationError);

    auto obs = synth_generate(IntensityParams{}, wide_activity_model(), 12, 500, 3);
    auto zero = obs;
    zero[4].p_frac = 0.0; // boundary fractions carry infinite logit
    CHECK_THROWS_AS(logistic_intensity_fit(zero), std::invalid_argument);
    auto one = obs;
    one[4].p_frac = 1.0;
    CHECK_THROWS_AS(logistic_intensity_fit(one), std::invalid_argument);

    obs.resize(9); // below the minimum sample
    CHECK_THROWS_AS(logistic_intensity_fit(obs), std::invalid_argument);
}

// ---- synthetic series ----------------------------------------------------------

TEST_CASE("synthetic series is deterministic in the seed") {
    const auto a = synth_generate(IntensityParams{}, HousingModel{}, 24, 300, 9);
    const auto b = synth_generate(IntensityParams{}, HousingModel{}, 24, 300, 9);
    const auto c = synth_generate(IntensityParams{}, HousingModel{}, 24, 300, 10);
    REQUIRE(a.size() == 24);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a[i].h_frac == b[i].h_frac && a[i].p_frac == b[i].p_frac;
        differ = differ || a[i].p_frac != c[i].p_frac;
        CHECK(a[i].exposures == 300.0);
    }
    CHECK(same);
    CHECK(differ);
}

TEST_CASE("synthetic month labels advance through calendar years") {
    const auto obs = synth_generate(IntensityParams{}, HousingModel{}, 132, 100, 1);
    REQUIRE(obs.size() == 132);
    CHECK(obs.front().year == 2013);
    CHECK(obs.front().month == 1);
    CHECK(obs.back().year == 2023);
    CHECK(obs.back().month == 12);
    for (std::size_t i = 1; i < obs.size(); ++i)
        CHECK(obs[i].month_index() == obs[i - 1].month_index() + 1);
}

TEST_CASE("relocation fractions concentrate on the model probability") {
    // flat level law: one activity level for the whole series, so every month
    // shares the same binomial probability
    const IntensityParams params;
    const auto obs = synth_generate(params, HousingModel{}, 24, 200000, 5);
    const double h = obs.front().h_frac / month_dt;
    for (const auto& o : obs) CHECK(o.h_frac == obs.front().h_frac);
    const double p = intensity(params, h) * params.dt_ref;
    double avg = 0.0;
    for (const auto& o : obs) avg += o.p_frac;
    avg /= static_cast<double>(obs.size());
    const double se = std::sqrt(p * (1.0 - p) / (200000.0 * 24.0));
    CHECK(std::fabs(avg - p) < 4.0 * se);
}

TEST_CASE("synthetic generator input validation") {
    CHECK_THROWS_AS(synth_generate(IntensityParams{}, HousingModel{}, 11, 100, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(synth_generate(IntensityParams{}, HousingModel{}, 24, 0, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(synth_generate(IntensityParams{}, HousingModel{}, 24, 100, 1,
                                   2013, 0),
                    std::invalid_argument);
}

// ---- CSV round trip -------------------------------------------------------------

TEST_CASE("hm csv round trip preserves every field") {
    namespace fs = std::filesystem;
    const auto obs = synth_generate(IntensityParams{}, HousingModel{}, 12, 50, 77);
    const std::string path =
        (fs::temp_directory_path() / "epor_hm_roundtrip.csv").string();
    save_hm_csv(obs, path);
    const auto back = load_hm_csv(path);
    REQUIRE(back.size() == obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        CHECK(back[i].year == obs[i].year);
        CHECK(back[i].month == obs[i].month);
        CHECK(back[i].h_frac == obs[i].h_frac); // %.17g is lossless
        CHECK(back[i].p_frac == obs[i].p_frac);
        CHECK(back[i].exposures == obs[i].exposures);
    }

    // without exposure counts the column disappears and comes back as zero
    auto bare = obs;
    for (auto& o : bare) o.exposures = 0.0;
    save_hm_csv(bare, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "month,h_frac,p_frac");
    const auto back2 = load_hm_csv(path);
    REQUIRE(back2.size() == bare.size());
    for (std::size_t i = 0; i < bare.size(); ++i) {
        CHECK(back2[i].h_frac == bare[i].h_frac);
        CHECK(back2[i].exposures == 0.0);
    }
    fs::remove(path);
}

TEST_CASE("hm csv rejects malformed input") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "epor_hm_bad.csv").string();
    const auto write = [&](const std::string& text) {
        std::ofstream out(path);
        out << text;
    };
    write("wrong,header\n2013-01,0.004,0.003\n");
    CHECK_THROWS_AS(load_hm_csv(path), std::invalid_argument);
    write("month,h_frac,p_frac\nJan-2013,0.004,0.003\n");
    CHECK_THROWS_AS(load_hm_csv(path), std::invalid_argument);
    write("month,h_frac,p_frac\n2013-01,0.004\n");
    CHECK_THROWS_AS(load_hm_csv(path), std::invalid_argument);
    write("month,h_frac,p_frac\n2013-01,1.5,0.003\n");
    CHECK_THROWS_AS(load_hm_csv(path), std::invalid_argument);
    write("month,h_frac,p_frac\n");
    CHECK_THROWS_AS(load_hm_csv(path), std::invalid_argument);
    CHECK_THROWS_AS(load_hm_csv((fs::temp_directory_path() / "nope.csv").string()),
                    std::invalid_argument);
    fs::remove(path);
}

TEST_SUITE_END();
