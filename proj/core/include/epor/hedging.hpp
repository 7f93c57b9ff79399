#pragma once

// =============================================================================
// Hedging the prepayment option with receiver swaptions.
//
// All sensitivities live in quote space: a Greek is a derivative with
// respect to the par rates the discount curve was bootstrapped from,
// computed by bump-and-reprice with the relocation density frozen. The
// density does not depend on rates, so freezing it is exact, not an
// approximation: finite differences measure pure rate sensitivity.
//
// A strategy partitions [t0, T*] into ranges, assigns each range one
// receiver swaption struck at the hedged swap's fixed rate, and sizes the
// notional weight so the swaption's Delta/Gamma profile matches the slice
// of the option value accumulated over that range,
//
//   V_j = int_{R_j} C(T) fbar(T) dT .
//
// Constructions, in increasing order of freedom:
//   global   one joint least-squares solve for all weights
//   fxr      fixed equal ranges, midpoint or per-range optimal maturity
//   opr      range boundaries optimised too (coordinate descent on knots,
//            with a volatility penalty that discourages degenerate splits)
//   eigen    fxr-style weights pushed up by a tail penalty on the smallest
//            eigenvalue of the scenario Gamma mismatch, then a Delta
//            correction with par swaps
//
// The value metric used for range targets is trapezoidal on the same
// segment nodes the headline price uses for Simpson. Trapezoid is chosen
// because range boundaries fall between nodes: clipped trapezoids remain
// exactly additive across a split point, so the range targets always sum
// to the whole-interval target regardless of where the knots land.
// =============================================================================

#include "epor/curve.hpp"
#include "epor/greeks.hpp"
#include "epor/housing.hpp"
#include "epor/hullwhite.hpp"
#include "epor/instruments.hpp"
#include "epor/relocation.hpp"
#include "epor/valuation.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace epor {

// Optimisation failures that invalidate a result outright (bracket edge
// hits, eigen-solver breakdowns). Soft non-convergence is reported through
// HedgeStrategy::converged instead so the best-found answer survives.
class OptimizerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- quote-space Greeks ------------------------------------------------------

struct GreekConfig {
    double delta_bump{1e-4};   // central difference, per quote
    double gamma_bump{5e-4};   // second differences and the 4-point cross
};

// Delta/Gamma of any price functional of the model, by bumping the par
// quotes the curve was bootstrapped from and re-bootstrapping. The price
// callback must be deterministic in the model (freeze any seeds).
GreekProfile quote_greeks(const std::function<double(const HullWhiteModel&)>& price,
                          const HullWhiteModel& model, const GreekConfig& cfg = {});

// ---- strategies --------------------------------------------------------------

enum class HedgeKind { global, fxr_mim, fxr_opm, opr_mim, eigen };
enum class MaturityRule { midpoint, optimal };

const char* hedge_kind_name(HedgeKind kind);

struct RangeDiagnostics {
    double lo{0.0};
    double hi{0.0};
    double mass{0.0};            // relocation probability captured by the range
    double objective{0.0};       // value of the per-range objective at the weight
    double delta_residual{0.0};  // ||w d_instr - d_range||
    double gamma_residual{0.0};  // Frobenius counterpart
};

// par-swap overlay used by the eigen construction to repair the Delta
struct DeltaCorrection {
    std::size_t quote_index{0};
    SwapQuote quote;
    double weight{0.0};
};

struct HedgeStrategy {
    HedgeKind kind{HedgeKind::fxr_mim};
    std::vector<double> boundaries;   // J+1 ascending, spans [t0, T*]
    std::vector<double> maturities;   // one swaption expiry per range
    std::vector<double> weights;      // notional multipliers
    std::vector<DeltaCorrection> corrections;
    double cost{0.0};
    bool converged{true};
    std::vector<RangeDiagnostics> diagnostics;
};

struct HedgeConfig {
    ValuationConfig valuation{};   // pricing grid + expected-density estimator
    GreekConfig bumps{};
    std::size_t scenarios{512};    // activity scenarios for tail penalties / shocks
    std::uint64_t seed{20209};
    double k{1.0};                 // Gamma-vs-Delta tradeoff in every objective
    double k_vol{0.1};             // partition-volatility penalty (opr)
    double k_eig{1.0};             // tail-eigenvalue penalty (eigen)
    double alpha_opt{0.1};         // expected-shortfall level inside the optimiser
    double alpha_report{0.01};     // expected-shortfall level in shock reports
    double min_range{0.1};         // smallest admissible range length (opr)
    int opr_restarts{8};
    int opr_sweeps{12};

    void validate() const;
};

// Shared pricing state for one hedge problem: the swaption curve at the
// segment nodes for the base curve and for every bumped/shocked curve
// (built lazily, keyed by the per-quote shift vector quantised to 0.1bp),
// the expected density, and a frozen set of per-scenario densities. The
// density blocks are computed once; only the swaption curves are rebuilt
// per shift.
class HedgeContext {
public:
    HedgeContext(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                 const HousingModel& housing, const IntensityParams& intensity,
                 const HedgeConfig& cfg = {});

    const HedgeConfig& config() const { return cfg_; }
    const HullWhiteModel& model() const { return model_; }
    const AmortizingSwapSpec& swap() const { return swap_; }
    const std::vector<SwapQuote>& quotes() const;
    std::size_t quote_count() const { return quotes().size(); }
    double t0() const { return t0_; }
    double horizon() const { return t_star_; }
    std::size_t scenario_count() const { return cfg_.scenarios; }

    // expiries and range boundaries are kept on a 1/480-year lattice so
    // optimiser line searches hit memoised instruments instead of pricing
    // a fresh swaption per trial point
    double snap_time(double t) const;

    // Objectives measure Greeks in reporting units: values in basis points
    // of the initial notional, quote shifts in basis points, and Gammas as
    // the Delta change across a 15bp move (a stressed daily move), which
    // makes Delta and Gamma mismatches commensurable. Raw Greeks are
    // multiplied by these before entering any objective, putting it at
    // O(1) so the k_vol and k_eig terms act on comparable footing.
    double delta_scale() const { return 1.0 / swap_.initial_notional(); }
    double gamma_scale() const { return 1.5e-3 / swap_.initial_notional(); }

    // ---- value slices (trapezoid metric, expected density) ----
    double epor_value() const;
    double range_value(double lo, double hi) const;
    double range_mass(double lo, double hi) const;

    // ---- quote-space Greeks (frozen density) ----
    const GreekProfile& epor_greeks() const;
    GreekProfile range_greeks(double lo, double hi) const;
    // Hedge swaptions deliver the same claim the option does at that
    // maturity: the remaining swap starting at the expiry, struck at the
    // contractual fixed rate.
    double swaption_value(double expiry) const;
    const GreekProfile& swaption_greeks(double expiry) const;
    // receiver par swap on quote i (fixed rate = the base par rate); worth
    // ~0 on the base curve, used for Delta corrections
    double par_swap_value_at(std::size_t quote_index) const;
    const GreekProfile& par_swap_greeks(std::size_t quote_index) const;

    // per-scenario Gamma of the range slice, one matrix per activity
    // scenario; targets for the tail-eigenvalue penalty
    std::vector<Eigen::MatrixXd> scenario_range_gammas(double lo, double hi) const;

    // ---- shocked repricing (shift per quote, in basis points) ----
    std::vector<double> scenario_epor_values(const std::vector<double>& shift_bp) const;
    double swaption_value_shifted(double expiry, const std::vector<double>& shift_bp) const;
    double par_swap_value_shifted(std::size_t quote_index,
                                  const std::vector<double>& shift_bp) const;

private:
    struct Variant {
        HullWhiteModel model;
        std::vector<std::vector<double>> c;  // swaption curve at segment nodes
    };
    using ShiftKey = std::vector<int>;  // tenths of a basis point per quote

    ShiftKey key_from_bp(const std::vector<double>& shift_bp) const;
    const Variant& variant(const ShiftKey& key) const;
    GreekProfile profile_from(const std::function<double(const Variant&)>& price) const;
    // clipped trapezoid of the nodewise product a*b over [lo, hi]
    double integrate(const std::vector<std::vector<double>>& a,
                     const std::vector<std::vector<double>>& b,
                     double lo, double hi) const;
    std::vector<std::vector<double>> to_segments(const std::vector<double>& union_values) const;

    HullWhiteModel model_;
    AmortizingSwapSpec swap_;
    HousingModel housing_;
    IntensityParams intensity_;
    HedgeConfig cfg_;
    double t0_{0.0};
    double t_star_{0.0};
    std::vector<MaturitySegment> segments_;
    std::vector<double> union_grid_;
    std::vector<std::vector<std::size_t>> node_index_;
    std::vector<std::vector<double>> fbar_;  // expected density at segment nodes
    std::vector<std::vector<double>> ones_;
    std::vector<std::vector<std::vector<double>>> fh_;  // [scenario][segment][node]

    mutable std::map<ShiftKey, Variant> variants_;
    mutable std::map<long, double> swaption_value_memo_;
    mutable std::map<long, GreekProfile> swaption_greek_memo_;
    mutable std::optional<GreekProfile> epor_greeks_;
    mutable std::vector<std::optional<GreekProfile>> swap_greek_memo_;
};

// Joint least-squares weights minimising
//   ||sum_i w_i d_i - d_target||^2 + k ||sum_i w_i G_i - G_target||_F^2
// via the normal equations; a 1e-12 ridge (scaled by the Gram trace) is
// added when the plain solve is numerically inconsistent.
Eigen::VectorXd solve_global(const GreekProfile& target,
                             const std::vector<GreekProfile>& instruments, double k);

// One swaption per range, weights fitted jointly across the whole horizon.
HedgeStrategy hedge_global(const HedgeContext& ctx, int ranges);

// One swaption per range, weight fitted per range. The int overload uses
// equal ranges; the boundary overload accepts any ascending partition of
// [t0, horizon]. Midpoint rule takes the range midpoint as the expiry;
// the optimal rule searches the expiry inside the range (16-point grid
// scan refined by golden section on the per-range objective).
HedgeStrategy hedge_fxr(const HedgeContext& ctx, int ranges, MaturityRule rule);
HedgeStrategy hedge_fxr(const HedgeContext& ctx, const std::vector<double>& boundaries,
                        MaturityRule rule);

// Midpoint-rule fit with the range boundaries themselves optimised
// (coordinate descent over the interior boundaries from several starting
// partitions, the equal split among them).
HedgeStrategy hedge_opr(const HedgeContext& ctx, int ranges);

// Tail-robust variant: takes the range-optimised partition, then refits
// each weight with a penalty on the expected shortfall of the most
// negative eigenvalue of the hedged Gamma over the activity scenarios,
// and finally restores the exact Delta match with par-swap overlays.
// With k_eig = 0 the weights reduce to the per-range fit on the same
// partition.
HedgeStrategy hedge_eigen(const HedgeContext& ctx, int ranges);

// sum of instrument prices on the base curve (par-swap corrections cost ~0)
double hedge_cost(const HedgeContext& ctx, const HedgeStrategy& strategy);

// net Greek profile of the strategy's instruments (swaptions + corrections)
GreekProfile strategy_greeks(const HedgeContext& ctx, const HedgeStrategy& strategy);

// global mismatch ||zeta_Delta||^2 + k ||zeta_Gamma||_F^2 against the
// option's own profile, using the context's k
double strategy_mismatch(const HedgeContext& ctx, const HedgeStrategy& strategy);

// (1 - prod_j l_j / lbar^J)^J; zero for the equal partition, approaching
// one as any range degenerates
double partition_volatility(const std::vector<double>& boundaries);

// mean of the worst ceil(alpha*n) outcomes (lower tail)
double expected_shortfall(std::vector<double> values, double alpha);

// ---- shock analysis ----------------------------------------------------------

struct ShockRow {
    std::vector<double> shift_bp;  // one entry per quote
    std::vector<double> pnl;       // hedged P&L change per activity scenario
    double mean{0.0};
    double es{0.0};                // expected shortfall of pnl at report alpha
    double prob_loss{0.0};         // P[pnl < 0]
};

struct ShockReport {
    double alpha{0.01};
    std::vector<ShockRow> rows;
};

// every {-step, 0, +step}^n combination except the all-zero one
std::vector<std::vector<double>> combination_shock_grid(std::size_t n_quotes,
                                                        double step_bp = 25.0);
// the combination grid plus single-quote +-50bp shocks
std::vector<std::vector<double>> default_shock_grid(std::size_t n_quotes);

// For each shock: reprice the strategy and the per-scenario option values
// on the shifted curve and difference the hedged portfolio against base,
//   pnl_h = (hedge_shift - V_h_shift) - (hedge_base - V_h_base).
// Scenario draws are frozen, so a zero shift gives identically zero P&L.
ShockReport shock_analysis(const HedgeContext& ctx, const HedgeStrategy& strategy,
                           const std::vector<std::vector<double>>& grid_bp);

} // namespace epor
