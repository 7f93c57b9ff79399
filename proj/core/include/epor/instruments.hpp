#pragma once

// =============================================================================
// Amortizing receiver swaps and swaptions under the one-factor model.
//
// The swap exchanges a fixed coupon K on the outstanding notional against
// float. With payment dates t_1 < ... < t_n (t_0 = 0) and N_{j-1} the
// notional outstanding entering period j:
//
//   annuity  A(T) = sum_{t_j > T} N_{j-1} (t_j - max(t_{j-1}, T)) P(T, t_j)
//   par rate kappa(T) = (1/A) sum_{t_j > T} N_{j-1} (P(T, start_j) - P(T, t_j))
//   value    S(T, K) = A(T) (K - kappa(T))
//
// Both legs of the period straddling T start at T itself: the fixed accrual
// is prorated to (T, t_j] and the floating start bond is P(T,T) = 1, with
// the outstanding notional prepayable at par. The remaining swap is then at
// par on its own calibrating curve for every T, and S is continuous in T.
//
// A receiver swaption decomposes into zero-coupon bond calls along the
// critical-state line: S(T,K) = sum_j c_j P(T,t_j) - N_prepay with
// c_j = K N_{j-1} dt_j + (N_{j-1} - N_j) >= 0, so there is a unique state
// x* with sum_j c_j P(T,t_j;x*) = N_prepay and the option splits into
// sum_j c_j * call(P(T,t_j), strike P(T,t_j;x*)).
// =============================================================================

#include "epor/curve.hpp"
#include "epor/greeks.hpp"
#include "epor/hullwhite.hpp"

#include <optional>
#include <vector>

namespace epor {

struct AmortizingSwapSpec {
    std::vector<double> payment_dates;  // t_1 .. t_n, strictly increasing, > 0
    std::vector<double> notionals;      // N(t_0) .. N(t_n), size n + 1, non-increasing
    double fixed_rate{0.0};             // contractual coupon K

    static AmortizingSwapSpec bullet(double end_years, int frequency, double fixed_rate,
                                     double notional);
    // straight-line amortization to zero: N(t_j) = N0 (n - j) / n
    static AmortizingSwapSpec linear(double end_years, int frequency, double fixed_rate,
                                     double notional);

    double initial_notional() const { return notionals.front(); }
    double maturity() const { return payment_dates.back(); }
    // N(last payment date <= T): the notional prepayable at T
    double outstanding_entering(double T) const;

    void validate() const;
};

struct SwaptionSpec {
    double maturity{0.0};               // option expiry T
    AmortizingSwapSpec underlying;      // payments strictly after T remain
};

// ---- swap algebra on the t0 curve (forward discounts) ----------------------
double annuity(const DiscountCurve& curve, const AmortizingSwapSpec& swap, double T);
double swap_rate(const DiscountCurve& curve, const AmortizingSwapSpec& swap, double T);
double swap_value(const DiscountCurve& curve, const AmortizingSwapSpec& swap, double T,
                  double strike);

// ---- swap algebra conditional on the model state at T -----------------------
double annuity(const HullWhiteModel& model, double x, const AmortizingSwapSpec& swap,
               double T);
double swap_rate(const HullWhiteModel& model, double x, const AmortizingSwapSpec& swap,
                 double T);
double swap_value(const HullWhiteModel& model, double x, const AmortizingSwapSpec& swap,
                  double T, double strike);

// ---- swaptions ---------------------------------------------------------------

// Time-0 price of the receiver swaption with expiry T on the remaining
// schedule. Exact under the one-factor model (no payoff approximation).
//
// `cutoff` picks the payment set (dates strictly after it) and the start of
// the stub period, and defaults to the expiry. A cutoff before the expiry
// freezes the payment set while the expiry moves; a payment landing exactly
// at the expiry is then a deterministic coupon.
double swaption_price(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                      double expiry, double strike,
                      std::optional<double> cutoff = std::nullopt);
double swaption_price(const HullWhiteModel& model, const SwaptionSpec& spec, double strike);

double payer_swaption_price(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                            double expiry, double strike,
                            std::optional<double> cutoff = std::nullopt);

// Time-0 value of the forward swap delivered at T (receiver side);
// receiver minus payer swaption must equal this.
double forward_swap_value(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                          double expiry, double strike,
                          std::optional<double> cutoff = std::nullopt);

// ---- quote-space swap sensitivities -------------------------------------------

// Delta/Gamma of the time-0 receiver swap value with respect to the curve's
// calibrating par quotes. Pillar-discount sensitivities come from
// bump-and-reprice of the bootstrap (central differences at bump /
// gamma_bump); the swap-level Greeks are then assembled through the exact
// annuity / par-rate quotient algebra, including the Gamma cross terms.
GreekProfile swap_greeks_analytic(const DiscountCurve& curve,
                                  const AmortizingSwapSpec& swap, double strike,
                                  double bump = 1e-4, double gamma_bump = 5e-4);

} // namespace epor
