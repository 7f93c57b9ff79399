#include "epor/relocation.hpp"

#include "epor/numerics.hpp"
#include "epor/parallel.hpp"
#include "epor/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace epor {

void IntensityParams::validate() const {
    for (double b : beta)
        if (!std::isfinite(b))
            throw std::invalid_argument("intensity: non-finite coefficient");
    if (!(dt_ref > 0.0)) throw std::invalid_argument("intensity: dt_ref must be > 0");
}

namespace {

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { // -log(1 - logistic(z)), stable for large z
    return z > 30.0 ? z : std::log1p(std::exp(z));
}

} // namespace

double intensity(const IntensityParams& p, double h) {
    const double z = p.beta[0] + h * (p.beta[1] + h * p.beta[2]);
    switch (p.map) {
        case HazardMap::linear: return logistic(z) / p.dt_ref;
        case HazardMap::cloglog: return softplus(z) / p.dt_ref;
    }
    throw std::logic_error("intensity: unknown hazard map");
}

double intensity_d1(const IntensityParams& p, double h) {
    const double z = p.beta[0] + h * (p.beta[1] + h * p.beta[2]);
    const double dz = p.beta[1] + 2.0 * p.beta[2] * h;
    const double s = logistic(z);
    switch (p.map) {
        case HazardMap::linear: return s * (1.0 - s) * dz / p.dt_ref;
        case HazardMap::cloglog: return s * dz / p.dt_ref;
    }
    throw std::logic_error("intensity: unknown hazard map");
}

double intensity_d2(const IntensityParams& p, double h) {
    const double z = p.beta[0] + h * (p.beta[1] + h * p.beta[2]);
    const double dz = p.beta[1] + 2.0 * p.beta[2] * h;
    const double ddz = 2.0 * p.beta[2];
    const double s = logistic(z);
    switch (p.map) {
        case HazardMap::linear:
            return s * (1.0 - s) * ((1.0 - 2.0 * s) * dz * dz + ddz) / p.dt_ref;
        case HazardMap::cloglog:
            return (s * (1.0 - s) * dz * dz + s * ddz) / p.dt_ref;
    }
    throw std::logic_error("intensity: unknown hazard map");
}

HazardCurve hazard_curve(const IntensityParams& params, const HousingScenario& scenario) {
    params.validate();
    validate_grid(scenario.grid);
    if (scenario.values.size() != scenario.grid.size())
        throw std::invalid_argument("hazard_curve: scenario grid/value size mismatch");

    const std::size_t n = scenario.grid.size();
    HazardCurve c;
    c.grid = scenario.grid;
    c.intensity.resize(n);
    c.cumulative.resize(n);
    c.survival.resize(n);
    c.density.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        c.intensity[k] = intensity(params, scenario.values[k]);
    c.cumulative[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k)
        c.cumulative[k] = c.cumulative[k - 1] + 0.5 *
                              (c.intensity[k - 1] + c.intensity[k]) *
                              (c.grid[k] - c.grid[k - 1]);
    for (std::size_t k = 0; k < n; ++k) {
        c.survival[k] = std::exp(-c.cumulative[k]);
        c.density[k] = c.intensity[k] * c.survival[k];
    }
    return c;
}

double realized_density(const IntensityParams& params, const HousingScenario& scenario,
                        double T) {
    params.validate();
    validate_grid(scenario.grid);
    if (scenario.values.size() != scenario.grid.size())
        throw std::invalid_argument("realized_density: scenario grid/value size mismatch");
    const auto& grid = scenario.grid;
    if (T < grid.front() || T > grid.back())
        throw std::invalid_argument("realized_density: maturity outside the scenario grid");

    double cum = 0.0;
    double prev_lambda = intensity(params, scenario.values[0]);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double lam = intensity(params, scenario.values[k]);
        if (grid[k] <= T) {
            cum += 0.5 * (prev_lambda + lam) * (grid[k] - grid[k - 1]);
            prev_lambda = lam;
            if (grid[k] == T) return lam * std::exp(-cum);
            continue;
        }
        // partial segment up to T with linearly interpolated activity
        const double w = (T - grid[k - 1]) / (grid[k] - grid[k - 1]);
        const double h_at_T =
            scenario.values[k - 1] + w * (scenario.values[k] - scenario.values[k - 1]);
        const double lam_T = intensity(params, h_at_T);
        cum += 0.5 * (prev_lambda + lam_T) * (T - grid[k - 1]);
        return lam_T * std::exp(-cum);
    }
    return prev_lambda * std::exp(-cum); // T == grid.front() on a 2-point grid
}

double sample_relocation_time(const HazardCurve& curve, double exp_draw) {
    if (!(exp_draw >= 0.0))
        throw std::invalid_argument("sample_relocation_time: draw must be >= 0");
    if (exp_draw >= curve.cumulative.back())
        return std::numeric_limits<double>::infinity();
    // H is piecewise linear: invert on the straddling segment
    const auto it = std::upper_bound(curve.cumulative.begin(), curve.cumulative.end(),
                                     exp_draw);
    const std::size_t k = static_cast<std::size_t>(it - curve.cumulative.begin()) - 1;
    const double slope = 0.5 * (curve.intensity[k] + curve.intensity[k + 1]);
    if (!(slope > 0.0)) return curve.grid[k + 1];
    return curve.grid[k] + (exp_draw - curve.cumulative[k]) / slope;
}

namespace {

struct LevelRule {
    std::vector<double> levels;
    std::vector<double> weights; // normalized to sum exactly 1
};

LevelRule level_rule(const HousingModel& model, int n_points) {
    LevelRule rule;
    if (model.variance == 0.0) {
        rule.levels = {model.mean};
        rule.weights = {1.0};
        return rule;
    }
    const double sigma = std::sqrt(model.variance);
    switch (model.distribution) {
        case LevelDistribution::normal: {
            const GaussRule gh = gauss_hermite(n_points);
            for (int i = 0; i < n_points; ++i) {
                rule.levels.push_back(model.mean + std::sqrt(2.0) * sigma * gh.nodes[i]);
                rule.weights.push_back(gh.weights[i]);
            }
            break;
        }
        case LevelDistribution::lognormal: {
            // Gauss-Hermite in log coordinates (exact lognormal moments)
            const double s2 = std::log1p(model.variance / (model.mean * model.mean));
            const double mu_l = std::log(model.mean) - 0.5 * s2;
            const GaussRule gh = gauss_hermite(n_points);
            for (int i = 0; i < n_points; ++i) {
                rule.levels.push_back(
                    std::exp(mu_l + std::sqrt(2.0 * s2) * gh.nodes[i]));
                rule.weights.push_back(gh.weights[i]);
            }
            break;
        }
        case LevelDistribution::shifted_exponential: {
            // u = 1 - e^{-y} maps the exponential tail onto (0,1)
            const GaussRule gl = gauss_legendre(n_points, 0.0, 1.0);
            for (int i = 0; i < n_points; ++i) {
                rule.levels.push_back((model.mean - sigma) -
                                      sigma * std::log1p(-gl.nodes[i]));
                rule.weights.push_back(gl.weights[i]);
            }
            break;
        }
    }
    double total = 0.0;
    for (double w : rule.weights) total += w;
    for (double& w : rule.weights) w /= total;
    return rule;
}

RelocationDensityResult density_by_quadrature(const IntensityParams& params,
                                              const HousingModel& model,
                                              const std::vector<double>& grid,
                                              int n_points) {
    const LevelRule rule = level_rule(model, n_points);
    const std::size_t n = grid.size();
    RelocationDensityResult out;
    out.grid = grid;
    out.expected_density.assign(n, 0.0);
    out.std_err.assign(n, 0.0);
    out.expected_survival.assign(n, 0.0);
    const double t0 = grid.front();
    for (std::size_t q = 0; q < rule.levels.size(); ++q) {
        const double lam = intensity(params, rule.levels[q]);
        const double w = rule.weights[q];
        for (std::size_t k = 0; k < n; ++k) {
            const double surv = std::exp(-lam * (grid[k] - t0));
            out.expected_density[k] += w * lam * surv;
            out.expected_survival[k] += w * surv;
        }
    }
    out.survival_at_horizon = out.expected_survival.back();
    out.mass = 1.0 - out.survival_at_horizon;
    out.monte_carlo = false;
    return out;
}

RelocationDensityResult density_by_simulation(const IntensityParams& params,
                                              const HousingModel& model,
                                              const std::vector<double>& grid,
                                              std::size_t n_scenarios,
                                              std::uint64_t seed) {
    if (n_scenarios < 1)
        throw std::invalid_argument("expected_density: need at least one scenario");
    const std::size_t n = grid.size();
    constexpr std::size_t kBlock = 256;
    const std::size_t n_blocks = (n_scenarios + kBlock - 1) / kBlock;

    // per-block partials, layout [density sum | density sumsq | survival sum]
    std::vector<std::vector<double>> partials(n_blocks);
    parallel_for(n_blocks, [&](std::size_t b) {
        std::vector<double>& acc = partials[b];
        acc.assign(3 * n, 0.0);
        const std::size_t lo = b * kBlock;
        const std::size_t hi = std::min(lo + kBlock, n_scenarios);
        for (std::size_t i = lo; i < hi; ++i) {
            const HousingScenario scen =
                sample_scenario(model, grid, seed, static_cast<std::uint64_t>(i));
            const HazardCurve curve = hazard_curve(params, scen);
            for (std::size_t k = 0; k < n; ++k) {
                acc[k] += curve.density[k];
                acc[n + k] += curve.density[k] * curve.density[k];
                acc[2 * n + k] += curve.survival[k];
            }
        }
    });

    // fold the blocks pairwise so the total is independent of thread count
    std::size_t m = n_blocks;
    while (m > 1) {
        const std::size_t half = (m + 1) / 2;
        for (std::size_t i = 0; i + half < m; ++i) {
            auto& a = partials[i];
            const auto& b = partials[i + half];
            for (std::size_t k = 0; k < a.size(); ++k) a[k] += b[k];
        }
        m = half;
    }
    const std::vector<double>& acc = partials[0];

    RelocationDensityResult out;
    out.grid = grid;
    out.expected_density.resize(n);
    out.std_err.resize(n);
    out.expected_survival.resize(n);
    const double nd = static_cast<double>(n_scenarios);
    for (std::size_t k = 0; k < n; ++k) {
        const double mean = acc[k] / nd;
        out.expected_density[k] = mean;
        out.expected_survival[k] = acc[2 * n + k] / nd;
        if (n_scenarios > 1) {
            const double var =
                std::max(0.0, (acc[n + k] - nd * mean * mean) / (nd - 1.0));
            out.std_err[k] = std::sqrt(var / nd);
        }
    }
    out.survival_at_horizon = out.expected_survival.back();
    out.mass = 1.0 - out.survival_at_horizon;
    out.monte_carlo = true;
    return out;
}

} // namespace

RelocationDensityResult expected_density(const IntensityParams& params,
                                         const HousingModel& model,
                                         const std::vector<double>& grid,
                                         std::size_t n_scenarios, std::uint64_t seed,
                                         DensityMethod method, int quadrature_points) {
    params.validate();
    model.validate();
    validate_grid(grid);
    if (quadrature_points < 1)
        throw std::invalid_argument("expected_density: quadrature needs >= 1 point");

    const bool flat = model.kind == HousingKind::flat_random;
    if (method == DensityMethod::quadrature && !flat)
        throw std::invalid_argument(
            "expected_density: quadrature mode requires the flat scenario model");
    const bool use_quadrature =
        method == DensityMethod::quadrature || (method == DensityMethod::automatic && flat);
    return use_quadrature
               ? density_by_quadrature(params, model, grid, quadrature_points)
               : density_by_simulation(params, model, grid, n_scenarios, seed);
}

} // namespace epor
