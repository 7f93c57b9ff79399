#pragma once

// =============================================================================
// Parameter estimation from housing-market time series.
//
// The observable series is monthly: the fraction of houses transacted during
// the month (h_dt) and the fraction of at-risk borrowers who relocated
// (p_dt). The annualized activity rate is recovered as h = h_dt / dt with
// dt = 1/12.
//
//   moment_fit              level-law parameters by matching the sample mean
//                           and variance of h
//   ou_mle                  exact-discretization AR(1) maximum likelihood for
//                           the OU generator (alpha, eta, theta)
//   logistic_intensity_fit  damped IRLS for the monthly relocation
//                           probability p_dt = sigma(b0 + b1 h_dt + b2 h_dt^2),
//                           rescaled to annual coordinates via b*_i = b_i dt^i
//
// plus a synthetic-series generator for end-to-end recovery tests and the
// CSV round trip used by the command-line front end.
// =============================================================================

#include "epor/housing.hpp"
#include "epor/relocation.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace epor {

// observation step of the monthly series
inline constexpr double month_dt = 1.0 / 12.0;

// data-driven estimation failure (as opposed to a malformed request)
class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct HmObservation {
    int year{0};
    int month{0};          // 1..12
    double h_frac{0.0};    // monthly transaction fraction, in [0, 1]
    double p_frac{0.0};    // monthly relocation fraction, in [0, 1]
    double exposures{0.0}; // at-risk borrowers behind p_frac; 0 = unknown

    // months since year 0, for spacing checks
    int month_index() const { return year * 12 + (month - 1); }
};

void validate_observations(const std::vector<HmObservation>& obs);

// ---- level-law moment matching -----------------------------------------------

struct MomentFit {
    LevelDistribution distribution{LevelDistribution::normal};
    double mean{0.0};     // annualized sample mean of h
    double variance{0.0}; // annualized sample variance (moment estimator, /n)
    // law parameters implied by the two moments:
    //   normal: (mean, sd); lognormal: (log-mean, log-sd);
    //   shifted_exponential: (shift, scale)
    double param1{0.0};
    double param2{0.0};
    std::size_t observations{0};

    // flat-level housing model carrying the fitted law
    HousingModel model() const;
};

MomentFit moment_fit(const std::vector<HmObservation>& obs, LevelDistribution kind);

// ---- OU maximum likelihood ---------------------------------------------------

struct OuFit {
    double alpha{0.0};          // mean-reversion speed, per annum
    double eta{0.0};            // diffusion coefficient, per annum
    double theta{0.0};          // long-run level
    double rho{0.0};            // fitted AR(1) coefficient exp(-alpha dt)
    double innovation_sd{0.0};  // conditional sd of one monthly step
    // alpha dt >= 1: the series decorrelates within one observation step,
    // so alpha (and through it eta) is only loosely pinned by the data
    bool weakly_identified{false};
    std::size_t transitions{0};
};

OuFit ou_mle(const std::vector<HmObservation>& obs);

// ---- logistic intensity regression -------------------------------------------

struct LogisticFit {
    IntensityParams params;                    // annual coordinates
    std::array<double, 3> beta_monthly{};      // coefficients on [1, h_dt, h_dt^2]
    std::array<double, 3> std_err{};           // std errors, annual coordinates
    double log_likelihood{0.0};
    double gradient_norm{0.0};
    int iterations{0};
    bool binomial{false};                      // exposure-weighted fit
};

LogisticFit logistic_intensity_fit(const std::vector<HmObservation>& obs);

// ---- synthetic series --------------------------------------------------------

// Samples one housing path at monthly spacing and draws relocating-borrower
// counts binomially with the logistic monthly probability. `exposures` is
// the (constant) cohort size per month.
std::vector<HmObservation> synth_generate(const IntensityParams& params,
                                          const HousingModel& model, int months,
                                          int borrowers, std::uint64_t seed,
                                          int start_year = 2013, int start_month = 1);

// ---- CSV round trip ----------------------------------------------------------

// format: month,h_frac,p_frac[,exposures] with month as YYYY-MM
std::vector<HmObservation> load_hm_csv(const std::string& path);
void save_hm_csv(const std::vector<HmObservation>& obs, const std::string& path);

} // namespace epor
