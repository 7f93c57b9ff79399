#include "epor/housing.hpp"

#include "epor/numerics.hpp"
#include "epor/parallel.hpp"
#include "epor/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace epor {

void validate_grid(const std::vector<double>& grid) {
    if (grid.size() < 2) throw std::invalid_argument("housing: grid needs >= 2 points");
    for (std::size_t k = 0; k + 1 < grid.size(); ++k)
        if (!(grid[k + 1] > grid[k]))
            throw std::invalid_argument("housing: grid must be strictly increasing");
    if (!std::isfinite(grid.front()) || !std::isfinite(grid.back()))
        throw std::invalid_argument("housing: non-finite grid");
}

void HousingModel::validate() const {
    if (!(variance >= 0.0) || !std::isfinite(variance))
        throw std::invalid_argument("housing: variance must be >= 0");
    if (!std::isfinite(mean)) throw std::invalid_argument("housing: non-finite mean");
    if (kind == HousingKind::ou) {
        if (!(ou_alpha > 0.0)) throw std::invalid_argument("housing: OU alpha must be > 0");
        if (!(ou_eta >= 0.0)) throw std::invalid_argument("housing: OU eta must be >= 0");
    } else {
        if (distribution == LevelDistribution::lognormal && !(mean > 0.0))
            throw std::invalid_argument("housing: lognormal level needs mean > 0");
        if (distribution == LevelDistribution::shifted_exponential &&
            !(variance >= 0.0))
            throw std::invalid_argument("housing: bad shifted-exponential parameters");
    }
    if (!(horizon > 0.0)) throw std::invalid_argument("housing: horizon must be > 0");
}

double HousingModel::start_level() const {
    return std::isnan(initial_level) ? mean : initial_level;
}

double HousingModel::theta_slope() const {
    const double sigma = std::sqrt(variance);
    switch (trend) {
        case TrendKind::flat: return 0.0;
        case TrendKind::increasing: return 2.0 * sigma / horizon;
        case TrendKind::decreasing: return -2.0 * sigma / horizon;
    }
    return 0.0;
}

double HousingModel::theta(double t) const { return mean + theta_slope() * t; }

double HousingModel::level_quantile(double u) const {
    if (!(u > 0.0 && u < 1.0))
        throw std::invalid_argument("housing: quantile argument must lie in (0,1)");
    const double sigma = std::sqrt(variance);
    if (sigma == 0.0) return mean;
    switch (distribution) {
        case LevelDistribution::normal:
            return mean + sigma * norm_ppf(u);
        case LevelDistribution::lognormal: {
            // exact moment match: exp(mu_l + sigma_l Z) has mean `mean`,
            // variance `variance`
            const double s2 = std::log1p(variance / (mean * mean));
            const double mu_l = std::log(mean) - 0.5 * s2;
            return std::exp(mu_l + std::sqrt(s2) * norm_ppf(u));
        }
        case LevelDistribution::shifted_exponential:
            // shift mu - sigma, rate 1/sigma: mean mu, sd sigma
            return (mean - sigma) - sigma * std::log1p(-u);
    }
    throw std::logic_error("housing: unknown distribution");
}

namespace {

// OU conditional mean increment over [t, t + dt] for affine theta:
//   E[h(t+dt) | h(t)] = h e^{-a dt} + theta(t)(1 - e^{-a dt})
//                       + slope (dt - (1 - e^{-a dt}) / a)
double ou_mean_step(const HousingModel& m, double h, double t, double dt) {
    const double decay = std::exp(-m.ou_alpha * dt);
    const double omd = -std::expm1(-m.ou_alpha * dt); // 1 - e^{-a dt}
    return h * decay + m.theta(t) * omd + m.theta_slope() * (dt - omd / m.ou_alpha);
}

} // namespace

HousingScenario mean_path(const HousingModel& model, const std::vector<double>& grid) {
    model.validate();
    validate_grid(grid);
    HousingScenario out;
    out.grid = grid;
    out.values.resize(grid.size());
    switch (model.kind) {
        case HousingKind::flat_random:
        case HousingKind::linear_ramp:
            // the drawn level (terminal level) has mean mu, so both laws keep
            // a constant conditional mean
            std::fill(out.values.begin(), out.values.end(), model.mean);
            break;
        case HousingKind::ou: {
            const double t0 = grid.front();
            double h = model.start_level();
            out.values[0] = h;
            for (std::size_t k = 1; k < grid.size(); ++k) {
                h = ou_mean_step(model, h, grid[k - 1] - t0, grid[k] - grid[k - 1]);
                out.values[k] = h;
            }
            break;
        }
    }
    return out;
}

Eigen::MatrixXd covariance_matrix(const HousingModel& model,
                                  const std::vector<double>& grid) {
    model.validate();
    validate_grid(grid);
    const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd cov(n, n);
    const double t0 = grid.front();
    switch (model.kind) {
        case HousingKind::flat_random:
            cov.setConstant(model.variance);
            break;
        case HousingKind::linear_ramp: {
            const double span = model.horizon - t0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double ui = (grid[static_cast<std::size_t>(i)] - t0) / span;
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const double uj = (grid[static_cast<std::size_t>(j)] - t0) / span;
                    cov(i, j) = cov(j, i) = model.variance * ui * uj;
                }
            }
            break;
        }
        case HousingKind::ou: {
            const double a = model.ou_alpha;
            const double scale = model.ou_eta * model.ou_eta / (2.0 * a);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double ti = grid[static_cast<std::size_t>(i)] - t0;
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const double tj = grid[static_cast<std::size_t>(j)] - t0;
                    cov(i, j) = cov(j, i) =
                        scale * (std::exp(-a * (ti - tj)) - std::exp(-a * (ti + tj)));
                }
            }
            break;
        }
    }
    return cov;
}

HousingScenario sample_scenario(const HousingModel& model,
                                const std::vector<double>& grid, std::uint64_t seed,
                                std::uint64_t index) {
    HousingScenario out;
    out.grid = grid;
    out.values.resize(grid.size());
    Rng rng(seed, index);
    switch (model.kind) {
        case HousingKind::flat_random: {
            const double level =
                model.variance == 0.0 ? model.mean : model.level_quantile(rng.uniform());
            std::fill(out.values.begin(), out.values.end(), level);
            break;
        }
        case HousingKind::linear_ramp: {
            const double level =
                model.variance == 0.0 ? model.mean : model.level_quantile(rng.uniform());
            const double t0 = grid.front();
            const double span = model.horizon - t0;
            for (std::size_t k = 0; k < grid.size(); ++k)
                out.values[k] = model.mean + (level - model.mean) * (grid[k] - t0) / span;
            break;
        }
        case HousingKind::ou: {
            const double t0 = grid.front();
            const double a = model.ou_alpha;
            double h = model.start_level();
            out.values[0] = h;
            for (std::size_t k = 1; k < grid.size(); ++k) {
                const double dt = grid[k] - grid[k - 1];
                const double sd =
                    model.ou_eta * std::sqrt(-std::expm1(-2.0 * a * dt) / (2.0 * a));
                h = ou_mean_step(model, h, grid[k - 1] - t0, dt) + sd * rng.normal();
                out.values[k] = h;
            }
            break;
        }
    }
    return out;
}

std::vector<HousingScenario> sample_scenarios(const HousingModel& model,
                                              const std::vector<double>& grid,
                                              std::size_t n, std::uint64_t seed) {
    model.validate();
    validate_grid(grid);
    if (n < 1) throw std::invalid_argument("housing: need at least one scenario");
    std::vector<HousingScenario> out(n);
    parallel_for(n, [&](std::size_t i) {
        out[i] = sample_scenario(model, grid, seed, static_cast<std::uint64_t>(i));
    });
    return out;
}

} // namespace epor
