#include "epor/valuation.hpp"

#include "epor/numerics.hpp"
#include "epor/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace epor {

// ---- segmented maturity grid -------------------------------------------------

void EporPricer::build_grid() {
    if (cfg_.grid_points < 16)
        throw std::invalid_argument("valuation: maturity grid too coarse (< 16 points)");
    if (!(cfg_.horizon > 0.0))
        throw std::invalid_argument("valuation: horizon must be positive");
    const double t0 = 0.0;
    t_star_ = std::min(cfg_.horizon, swap_.maturity());

    std::vector<double> bounds{t0};
    for (double d : swap_.payment_dates)
        if (d > t0 && d < t_star_) bounds.push_back(d);
    bounds.push_back(t_star_);

    const double total = t_star_ - t0;
    const int target_intervals = cfg_.grid_points - 1;
    segments_.clear();
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        MaturitySegment seg;
        seg.lo = bounds[s];
        seg.hi = bounds[s + 1];
        const double len = seg.hi - seg.lo;
        int n = static_cast<int>(
            2 * std::lround(len / total * target_intervals / 2.0));
        n = std::max(2, n);
        seg.nodes.resize(static_cast<std::size_t>(n) + 1);
        for (int k = 0; k <= n; ++k)
            seg.nodes[static_cast<std::size_t>(k)] = seg.lo + len * k / n;
        seg.nodes.front() = seg.lo;
        seg.nodes.back() = seg.hi;
        const double dx = len / n;
        seg.weights.assign(static_cast<std::size_t>(n) + 1, 0.0);
        for (int k = 0; k <= n; ++k)
            seg.weights[static_cast<std::size_t>(k)] =
                dx / 3.0 * (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0));
        segments_.push_back(std::move(seg));
    }

    // union grid: segment nodes first (kept verbatim), then the uniform
    // hazard grid filled in where no node is already close
    union_grid_.clear();
    for (const auto& seg : segments_)
        union_grid_.insert(union_grid_.end(), seg.nodes.begin(), seg.nodes.end());
    std::sort(union_grid_.begin(), union_grid_.end());
    union_grid_.erase(std::unique(union_grid_.begin(), union_grid_.end()),
                      union_grid_.end());

    const int m_haz =
        std::max(1, static_cast<int>(std::ceil(total / cfg_.hazard_step - 1e-9)));
    for (int m = 0; m <= m_haz; ++m) {
        const double t = t0 + total * m / m_haz;
        auto it = std::lower_bound(union_grid_.begin(), union_grid_.end(), t - 1e-9);
        if (it != union_grid_.end() && std::fabs(*it - t) < 1e-9) continue;
        union_grid_.insert(it, t);
    }

    node_index_.clear();
    for (const auto& seg : segments_) {
        std::vector<std::size_t> idx(seg.nodes.size());
        for (std::size_t k = 0; k < seg.nodes.size(); ++k) {
            auto it = std::lower_bound(union_grid_.begin(), union_grid_.end(),
                                       seg.nodes[k]);
            if (it == union_grid_.end() || *it != seg.nodes[k])
                throw std::logic_error("valuation: segment node missing from union grid");
            idx[k] = static_cast<std::size_t>(it - union_grid_.begin());
        }
        node_index_.push_back(std::move(idx));
    }
}

void EporPricer::cache_swaptions(const HullWhiteModel& model) {
    c_.resize(segments_.size());
    std::vector<std::pair<std::size_t, std::size_t>> tasks;
    for (std::size_t s = 0; s < segments_.size(); ++s) {
        c_[s].resize(segments_[s].nodes.size());
        for (std::size_t k = 0; k < segments_[s].nodes.size(); ++k)
            tasks.emplace_back(s, k);
    }
    parallel_for(tasks.size(), [&](std::size_t i) {
        const auto [s, k] = tasks[i];
        c_[s][k] = swaption_price(model, swap_, segments_[s].nodes[k], swap_.fixed_rate);
    });
}

EporPricer::EporPricer(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                       const ValuationConfig& cfg)
    : swap_(swap), cfg_(cfg) {
    swap_.validate();
    build_grid();
    cache_swaptions(model);
}

double EporPricer::integrate_against(const std::vector<double>& union_grid_values) const {
    if (union_grid_values.size() != union_grid_.size())
        throw std::invalid_argument("valuation: density/maturity grid mismatch");
    double acc = 0.0;
    for (std::size_t s = 0; s < segments_.size(); ++s)
        for (std::size_t k = 0; k < segments_[s].nodes.size(); ++k)
            acc += segments_[s].weights[k] * c_[s][k] *
                   union_grid_values[node_index_[s][k]];
    return acc;
}

double EporPricer::price(const RelocationDensityResult& density) const {
    if (density.grid != union_grid_)
        throw std::invalid_argument("valuation: density grid does not match the pricer");
    return integrate_against(density.expected_density);
}

double EporPricer::price_scenario(const HazardCurve& curve) const {
    if (curve.grid != union_grid_)
        throw std::invalid_argument("valuation: hazard grid does not match the pricer");
    return integrate_against(curve.density);
}

// ---- scenario distribution ----------------------------------------------------

std::vector<double> scenario_values(const EporPricer& pricer, const HousingModel& housing,
                                    const IntensityParams& intensity, std::size_t n,
                                    std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("scenario_values: need at least one scenario");
    housing.validate();
    intensity.validate();
    std::vector<double> out(n);
    const auto& grid = pricer.density_grid();
    parallel_for(n, [&](std::size_t i) {
        const HousingScenario scen =
            sample_scenario(housing, grid, seed, static_cast<std::uint64_t>(i));
        out[i] = pricer.price_scenario(hazard_curve(intensity, scen));
    });
    return out;
}

// ---- Hessian machinery ---------------------------------------------------------

namespace {

std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
    const std::size_t n = grid.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double half = 0.5 * (grid[k + 1] - grid[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    return w;
}

} // namespace

double hessian_quadratic_form(const IntensityParams& intensity,
                              const std::vector<double>& grid,
                              const std::vector<double>& reference,
                              const Eigen::MatrixXd& cov) {
    const std::size_t n = grid.size();
    if (n == 0) throw std::invalid_argument("hessian_quadratic_form: empty grid");
    if (reference.size() != n || cov.rows() != static_cast<Eigen::Index>(n) ||
        cov.cols() != static_cast<Eigen::Index>(n))
        throw std::invalid_argument("hessian_quadratic_form: size mismatch");

    const std::vector<double> tw = trapezoid_weights(grid);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    double cum = 0.0, diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cum += tw[i] * epor::intensity(intensity, reference[i]);
        v(static_cast<Eigen::Index>(i)) = tw[i] * intensity_d1(intensity, reference[i]);
        diag += tw[i] * intensity_d2(intensity, reference[i]) *
                cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    }
    const double lam_end = epor::intensity(intensity, reference.back());
    const double a = intensity_d1(intensity, reference.back()) / lam_end;
    const double b = intensity_d2(intensity, reference.back()) / lam_end;
    const double f = lam_end * std::exp(-cum);
    const Eigen::Index last = static_cast<Eigen::Index>(n) - 1;

    const double quad = v.dot(cov * v);
    const double corner = b * cov(last, last);
    const double edge = 2.0 * a * cov.row(last).dot(v);
    return f * (quad - diag + corner - edge);
}

DiscreteHessian discrete_hessian(const IntensityParams& intensity,
                                 const HousingScenario& reference, double T,
                                 int K_steps) {
    intensity.validate();
    validate_grid(reference.grid);
    if (reference.values.size() != reference.grid.size())
        throw std::invalid_argument("discrete_hessian: reference grid/value mismatch");
    if (K_steps < 8) throw std::invalid_argument("discrete_hessian: need K_steps >= 8");
    const double t0 = reference.grid.front();
    if (!(T > t0) || T > reference.grid.back())
        throw std::invalid_argument("discrete_hessian: T outside the reference grid");

    DiscreteHessian out;
    out.T = T;
    const std::size_t n = static_cast<std::size_t>(K_steps) + 1;
    out.grid.resize(n);
    std::vector<double> href(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.grid[i] = t0 + (T - t0) * static_cast<double>(i) / K_steps;
        href[i] = interp_linear(reference.grid, reference.values, out.grid[i]);
    }

    const std::vector<double> tw = trapezoid_weights(out.grid);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n)), spp(static_cast<Eigen::Index>(n));
    double cum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cum += tw[i] * epor::intensity(intensity, href[i]);
        v(static_cast<Eigen::Index>(i)) = tw[i] * intensity_d1(intensity, href[i]);
        spp(static_cast<Eigen::Index>(i)) = tw[i] * intensity_d2(intensity, href[i]);
    }
    const double lam_end = epor::intensity(intensity, href.back());
    const double a = intensity_d1(intensity, href.back()) / lam_end;
    const double b = intensity_d2(intensity, href.back()) / lam_end;
    const double f = lam_end * std::exp(-cum);
    out.density_at_reference = f;

    const Eigen::Index ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd m = v * v.transpose();
    m.diagonal() -= spp;
    for (Eigen::Index i = 0; i < ni; ++i) {
        m(i, ni - 1) -= a * v(i);
        m(ni - 1, i) -= a * v(i);
    }
    m(ni - 1, ni - 1) += b;
    out.matrix = f * m;
    return out;
}

// ---- baseline and covariance adjustment ---------------------------------------

namespace {

double covariance_at_start(const HousingModel& model) {
    switch (model.kind) {
        case HousingKind::flat_random: return model.variance;
        case HousingKind::linear_ramp: return 0.0; // ramp is pinned at t0
        case HousingKind::ou: return 0.0;          // deterministic start level
    }
    return 0.0;
}

} // namespace

std::pair<double, double> baseline_and_adjustment(const EporPricer& pricer,
                                                  const HousingModel& housing,
                                                  const IntensityParams& intensity,
                                                  int hessian_steps_per_year) {
    housing.validate();
    intensity.validate();
    if (hessian_steps_per_year < 1)
        throw std::invalid_argument("baseline_and_adjustment: bad Hessian resolution");

    const auto& grid = pricer.density_grid();
    const HousingScenario mean_scen = mean_path(housing, grid);
    const double baseline = pricer.price_scenario(hazard_curve(intensity, mean_scen));

    // q(T) = sum_ij Hess_T(i,j) Cov(i,j), one value per unique maturity node
    const double t0 = grid.front();
    std::vector<double> unique_times;
    for (const auto& seg : pricer.segments())
        unique_times.insert(unique_times.end(), seg.nodes.begin(), seg.nodes.end());
    std::sort(unique_times.begin(), unique_times.end());
    unique_times.erase(std::unique(unique_times.begin(), unique_times.end()),
                       unique_times.end());

    std::vector<double> q(unique_times.size());
    parallel_for(unique_times.size(), [&](std::size_t u) {
        const double T = unique_times[u];
        if (T - t0 < 1e-12) {
            const double h0 = mean_scen.values.front();
            q[u] = intensity_d2(intensity, h0) * covariance_at_start(housing);
            return;
        }
        const int K = std::max(
            8, static_cast<int>(std::ceil((T - t0) * hessian_steps_per_year - 1e-9)));
        std::vector<double> sub(static_cast<std::size_t>(K) + 1);
        for (int i = 0; i <= K; ++i)
            sub[static_cast<std::size_t>(i)] = t0 + (T - t0) * static_cast<double>(i) / K;
        const std::vector<double> href = mean_path(housing, sub).values;
        const Eigen::MatrixXd cov = covariance_matrix(housing, sub);
        q[u] = hessian_quadratic_form(intensity, sub, href, cov);
    });

    std::map<double, double> q_at;
    for (std::size_t u = 0; u < unique_times.size(); ++u) q_at[unique_times[u]] = q[u];

    double nu = 0.0;
    const auto& segs = pricer.segments();
    const auto& cs = pricer.swaption_values();
    for (std::size_t s = 0; s < segs.size(); ++s)
        for (std::size_t k = 0; k < segs[s].nodes.size(); ++k)
            nu += segs[s].weights[k] * cs[s][k] * q_at.at(segs[s].nodes[k]);
    return {baseline, 0.5 * nu};
}

// ---- full valuation -------------------------------------------------------------

EporValuation value_epor(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                         const HousingModel& housing, const IntensityParams& intensity,
                         const ValuationConfig& cfg) {
    housing.validate();
    intensity.validate();
    EporPricer pricer(model, swap, cfg);

    EporValuation out;
    out.density = expected_density(intensity, housing, pricer.density_grid(),
                                   cfg.scenarios, cfg.seed, cfg.density_method,
                                   cfg.quadrature_points);
    out.value = pricer.price(out.density);

    const auto ba =
        baseline_and_adjustment(pricer, housing, intensity, cfg.hessian_steps_per_year);
    out.baseline = ba.first;
    out.adjustment = ba.second;

    out.scenario_values =
        scenario_values(pricer, housing, intensity, cfg.scenarios, cfg.seed);
    out.quantile_band = {quantile(out.scenario_values, 0.10),
                         quantile(out.scenario_values, 0.90)};

    const auto& segs = pricer.segments();
    const auto& cs = pricer.swaption_values();
    for (std::size_t s = 0; s < segs.size(); ++s) {
        for (std::size_t k = 0; k < segs[s].nodes.size(); ++k) {
            const double T = segs[s].nodes[k];
            const auto it = std::lower_bound(out.density.grid.begin(),
                                             out.density.grid.end(), T);
            const std::size_t idx =
                static_cast<std::size_t>(it - out.density.grid.begin());
            const double f = out.density.expected_density[idx];
            out.times.push_back(T);
            out.swaption_curve.push_back(cs[s][k]);
            out.density_curve.push_back(f);
            out.integrand.push_back(cs[s][k] * f);
        }
    }
    return out;
}

} // namespace epor
