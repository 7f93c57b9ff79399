#pragma once

// =============================================================================
// Housing-market activity models.
//
// h(t) is the annualized per-house transaction frequency. Three generators:
//
//   flat_random  h(t) = H, one level per scenario, H ~ distribution(mu, var)
//   linear_ramp  h(t) = mu + (H - mu) u(t), u affine 0 -> 1 over [t0, T*],
//                H the drawn terminal level
//   ou           dh = alpha (theta(t) - h) dt + eta dW, exact Gaussian
//                transitions, affine trend theta(t)
//
// All three expose the conditional mean path and the covariance kernel
// Cov(h(s), h(t)) in closed form; the second-order valuation adjustment
// contracts the intensity Hessian against exactly this kernel.
//
// Levels may go negative under the normal / OU laws. They are deliberately
// not floored: the logistic intensity is defined on all of R, and flooring
// would bias the comparison between the stochastic value and its
// deterministic second-order expansion.
// =============================================================================

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <vector>

namespace epor {

enum class HousingKind { flat_random, linear_ramp, ou };
enum class LevelDistribution { normal, lognormal, shifted_exponential };
enum class TrendKind { flat, increasing, decreasing };

struct HousingScenario {
    std::vector<double> grid;
    std::vector<double> values;
};

struct HousingModel {
    HousingKind kind{HousingKind::flat_random};

    // level law for flat_random / linear_ramp draws
    LevelDistribution distribution{LevelDistribution::normal};
    double mean{4.470e-2};
    double variance{1.215e-4};

    // OU parameters; trend slope is +-2 sigma over [t0, horizon]
    double ou_alpha{126.0};
    double ou_eta{0.115};
    TrendKind trend{TrendKind::flat};

    double horizon{10.0};  // T*: ramp end and trend normalization
    // start level h(t0); defaults to the mean when NaN
    double initial_level{std::numeric_limits<double>::quiet_NaN()};

    void validate() const;
    double start_level() const;
    // OU long-run mean at t (affine in t - t0, t0 taken as 0)
    double theta(double t) const;
    double theta_slope() const;

    // inverse-CDF draw of the scenario level from a uniform; shared uniforms
    // give common random numbers across distribution choices
    double level_quantile(double u) const;
};

// exact conditional mean trajectory E[h(t) | F(t0)]
HousingScenario mean_path(const HousingModel& model, const std::vector<double>& grid);

// covariance kernel Cov(h(s_i), h(t_j)) on the grid
Eigen::MatrixXd covariance_matrix(const HousingModel& model,
                                  const std::vector<double>& grid);

std::vector<HousingScenario> sample_scenarios(const HousingModel& model,
                                              const std::vector<double>& grid,
                                              std::size_t n, std::uint64_t seed);

// single-scenario sampler for streaming loops (scenario `index` of the
// family defined by `seed`; identical to sample_scenarios(...)[index])
HousingScenario sample_scenario(const HousingModel& model,
                                const std::vector<double>& grid,
                                std::uint64_t seed, std::uint64_t index);

void validate_grid(const std::vector<double>& grid);

} // namespace epor
