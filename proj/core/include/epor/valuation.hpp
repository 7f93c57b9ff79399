#pragma once

// =============================================================================
// Prepayment-option valuation.
//
// The option value is the swaption curve integrated against the expected
// relocation density:
//
//   V = int_{t0}^{T*} C(T) fbar(T) dT,        C(T) = receiver swaption, expiry T
//
// C(T) is continuous (the remaining swap stays at par on its calibrating
// curve across payment dates) but only piecewise smooth: vega decay and the
// notional schedule kink it wherever a payment leaves the underlying. The
// maturity grid is therefore segmented at the payment dates; each segment
// gets its own composite-Simpson rule with its payment set pinned, keeping
// fourth-order convergence that a single rule across the kinks would lose.
//
// The density is evaluated on a union grid: the segment nodes plus a
// uniform hazard grid, so scenario hazard curves and the valuation
// quadrature share nodes exactly and V equals the scenario mean of V_h to
// machine precision when both use the same draws.
//
// The deterministic baseline V_hbar prices on the mean activity path; the
// second-order adjustment contracts the discretized density Hessian
// (trapezoidal cumulative-hazard form) against the model covariance kernel:
//
//   nu = 1/2 int C(T) sum_ij d2f/dh_i dh_j Cov(h(s_i), h(s_j)) dT
// =============================================================================

#include "epor/housing.hpp"
#include "epor/hullwhite.hpp"
#include "epor/instruments.hpp"
#include "epor/relocation.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

namespace epor {

struct ValuationConfig {
    int grid_points{201};            // unique maturity nodes across all segments
    double hazard_step{1.0 / 48.0};  // scenario-grid resolution for hazards
    std::size_t scenarios{4096};     // draws for path models / scenario bands
    std::uint64_t seed{12345};
    DensityMethod density_method{DensityMethod::automatic};
    int quadrature_points{64};       // Gauss nodes for flat-level expectation
    int hessian_steps_per_year{48};  // resolution of the adjustment Hessian
    double horizon{10.0};            // T*; capped at the swap maturity
};

struct MaturitySegment {
    double lo{0.0};                 // segment is (lo, hi]; payments after lo
    double hi{0.0};
    std::vector<double> nodes;      // odd count, nodes.front()=lo, back()=hi
    std::vector<double> weights;    // composite-Simpson weights
};

// Builds the segmented maturity grid and caches the swaption curve C once;
// prices any density (or single-scenario hazard curve) given on the union
// grid. Rebuild per bumped curve to get value sensitivities: the density is
// rate-independent and can be reused across rebuilds.
class EporPricer {
public:
    EporPricer(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
               const ValuationConfig& cfg = {});

    const std::vector<double>& density_grid() const { return union_grid_; }
    const std::vector<MaturitySegment>& segments() const { return segments_; }
    // C at the segment nodes, same shape as segments()[s].nodes
    const std::vector<std::vector<double>>& swaption_values() const { return c_; }
    double strike() const { return swap_.fixed_rate; }
    double horizon() const { return t_star_; }
    const AmortizingSwapSpec& swap() const { return swap_; }

    // V = sum over segments of Simpson(C * fbar)
    double price(const RelocationDensityResult& density) const;
    // same functional applied to one scenario's realized density
    double price_scenario(const HazardCurve& curve) const;
    // quadrature of C against arbitrary union-grid samples (hedge targets etc.)
    double integrate_against(const std::vector<double>& union_grid_values) const;

private:
    void build_grid();
    void cache_swaptions(const HullWhiteModel& model);

    AmortizingSwapSpec swap_;
    ValuationConfig cfg_;
    double t_star_{0.0};
    std::vector<MaturitySegment> segments_;
    std::vector<std::vector<double>> c_;
    std::vector<std::vector<std::size_t>> node_index_; // segment node -> union index
    std::vector<double> union_grid_;
};

struct EporValuation {
    double value{0.0};       // V
    double baseline{0.0};    // V_hbar (mean-path price)
    double adjustment{0.0};  // nu (second-order covariance correction)
    std::vector<double> scenario_values;          // V_h per scenario
    std::pair<double, double> quantile_band{0, 0}; // 10% / 90% of V_h

    // plot-ready integrand samples, flattened over segments
    std::vector<double> times;
    std::vector<double> swaption_curve;
    std::vector<double> density_curve;
    std::vector<double> integrand;

    RelocationDensityResult density;
};

// full valuation: expected-density price, scenario distribution with the
// 10-90% band, mean-path baseline and Hessian adjustment
EporValuation value_epor(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                         const HousingModel& housing, const IntensityParams& intensity,
                         const ValuationConfig& cfg = {});

// V_h for n scenarios drawn from (seed, index); identical draws to the
// expected-density estimator when seed and count match
std::vector<double> scenario_values(const EporPricer& pricer, const HousingModel& housing,
                                    const IntensityParams& intensity, std::size_t n,
                                    std::uint64_t seed);

std::pair<double, double> baseline_and_adjustment(const EporPricer& pricer,
                                                  const HousingModel& housing,
                                                  const IntensityParams& intensity,
                                                  int hessian_steps_per_year = 48);

// ---- discretized density Hessian ---------------------------------------------

// d2 f / dh_i dh_j of the discretized realized density
//   f(h) = lambda(h_K) exp(-sum_i w_i lambda(h_i)),   w_i trapezoid weights
// at the reference path, evaluated in closed form.
struct DiscreteHessian {
    std::vector<double> grid;   // t0 .. T, K+1 nodes
    Eigen::MatrixXd matrix;     // (K+1) x (K+1), symmetric
    double T{0.0};
    double density_at_reference{0.0};
};

DiscreteHessian discrete_hessian(const IntensityParams& intensity,
                                 const HousingScenario& reference, double T, int K_steps);

// sum_ij Hess_ij Cov_ij without materializing the matrix (rank-one plus
// diagonal plus last-row structure)
double hessian_quadratic_form(const IntensityParams& intensity,
                              const std::vector<double>& grid,
                              const std::vector<double>& reference,
                              const Eigen::MatrixXd& cov);

// convert a currency amount to basis points of the initial notional
inline double to_bps(double amount, double initial_notional) {
    return 1.0e4 * amount / initial_notional;
}

} // namespace epor
