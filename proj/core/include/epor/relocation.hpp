#pragma once

// =============================================================================
// Cox-process relocation machinery.
//
// The borrower relocates at the first jump of a Cox process whose intensity
// is a logistic-quadratic function of housing-market activity:
//
//   lambda(h) = (1/dt_ref) sigma(b0 + b1 h + b2 h^2),   sigma the logistic
//
// dt_ref is the observation step the coefficients were fitted at (monthly,
// 1/12): the fitted per-period probability p is mapped to a per-annum
// intensity by p/dt. The cloglog map -log(1-p)/dt is available as an exact
// alternative.
//
// Per housing scenario h(.) the relocation time density and survival are
//
//   f^h(t) = lambda(h(t)) exp(-H(t)),   H(t) = int_t0^t lambda(h(s)) ds
//
// with H trapezoidal on the scenario grid. Between nodes H is therefore
// linear, the density piecewise exponential, and segment masses close
// exactly: int_{t_k}^{t_{k+1}} f = surv_k - surv_{k+1}. That segment rule is
// the canonical mass integral here; plain trapezoid on f converges to it at
// second order.
//
// The maturity weight for pricing is the scenario expectation
// E[f^h(T)]: computed by Gauss quadrature over the level distribution for
// flat scenarios (no MC noise) or by scenario averaging otherwise.
// =============================================================================

#include "epor/housing.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace epor {

enum class HazardMap { linear, cloglog };

struct IntensityParams {
    std::array<double, 3> beta{-7.50, 54.18, -326.86};
    double dt_ref{1.0 / 12.0};
    HazardMap map{HazardMap::linear};

    void validate() const;
};

// per-annum intensity and its first two derivatives in h (closed form)
double intensity(const IntensityParams& params, double h);
double intensity_d1(const IntensityParams& params, double h);
double intensity_d2(const IntensityParams& params, double h);

// ---- per-scenario hazard curves ---------------------------------------------

struct HazardCurve {
    std::vector<double> grid;
    std::vector<double> intensity;   // lambda(h(t_k))
    std::vector<double> cumulative;  // H(t_k), trapezoidal
    std::vector<double> survival;    // exp(-H(t_k))
    std::vector<double> density;     // lambda(h(t_k)) exp(-H(t_k))

    // exact mass of the piecewise-exponential density over [t_k, t_{k+1}]
    double segment_mass(std::size_t k) const {
        return survival[k] - survival[k + 1];
    }
    // total mass over the grid; mass + survival.back() == 1 exactly
    double mass() const { return 1.0 - survival.back(); }
};

HazardCurve hazard_curve(const IntensityParams& params, const HousingScenario& scenario);

// f^h(T) for T anywhere inside the scenario grid span (piecewise-linear h,
// trapezoidal H up to T)
double realized_density(const IntensityParams& params, const HousingScenario& scenario,
                        double T);

// first jump time given a unit-exponential draw: the inverse of the
// piecewise-linear H. Returns +infinity when the draw exceeds H(grid end).
double sample_relocation_time(const HazardCurve& curve, double exp_draw);

// ---- expected density over scenarios ----------------------------------------

enum class DensityMethod { automatic, quadrature, monte_carlo };

struct RelocationDensityResult {
    std::vector<double> grid;
    std::vector<double> expected_density;    // E[f^h(T_k)]
    std::vector<double> std_err;             // per point; zero in quadrature mode
    std::vector<double> expected_survival;   // E[exp(-H(T_k))]
    double survival_at_horizon{0.0};         // expected mass beyond the grid end
    double mass{0.0};                        // segment-rule integral of E[f^h]
    bool monte_carlo{false};
};

// flat_random + quadrature: Gauss-Hermite over the level (normal and, in log
// coordinates, lognormal), Gauss-Legendre over the uniform transform
// (shifted exponential). Path models average hazard curves over
// `n_scenarios` draws.
RelocationDensityResult expected_density(const IntensityParams& params,
                                         const HousingModel& model,
                                         const std::vector<double>& grid,
                                         std::size_t n_scenarios, std::uint64_t seed,
                                         DensityMethod method = DensityMethod::automatic,
                                         int quadrature_points = 64);

} // namespace epor
