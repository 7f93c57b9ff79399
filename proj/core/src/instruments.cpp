#include "epor/instruments.hpp"

#include "epor/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epor {

namespace {

// Payments strictly after T in coefficient form:
//   S(T, K) = sum_j c_j P(T, t_j) - N_prepay
// Both legs of the remaining swap start at T itself: the fixed coupon of the
// period straddling T accrues only over (T, t_j], mirroring the floating stub
// that resets at T. The remaining swap is therefore par-neutral on its own
// calibrating curve at every T, not just at payment dates, and its value is
// continuous in T.
struct Decomposition {
    std::vector<double> dates;
    std::vector<double> coeffs;   // c_j = K N_{j-1} dt_j + (N_{j-1} - N_j)
    double prepay_notional{0.0};  // N(last payment date <= T)
};

Decomposition decompose(const AmortizingSwapSpec& swap, double T, double strike) {
    const auto& dates = swap.payment_dates;
    const std::size_t n = dates.size();
    std::size_t first = 0;
    while (first < n && dates[first] <= T) ++first;

    Decomposition out;
    out.prepay_notional = swap.notionals[first];
    out.dates.reserve(n - first);
    out.coeffs.reserve(n - first);
    for (std::size_t j = first; j < n; ++j) {
        const double period_start = std::max(j == 0 ? 0.0 : dates[j - 1], T);
        const double accrual = dates[j] - period_start;
        const double entering = swap.notionals[j];
        const double after = swap.notionals[j + 1];
        out.dates.push_back(dates[j]);
        out.coeffs.push_back(strike * entering * accrual + (entering - after));
    }
    // The float-leg telescope leaves N_{n-1} P(T, t_n) at the final date, not
    // N_{n-1} - N_n; restore the terminal notional (zero for fully amortized
    // schedules, where this is a no-op).
    if (!out.dates.empty()) out.coeffs.back() += swap.notionals.back();
    return out;
}

// Shared implementation of the swap algebra over any discount functional
// df(s) = P(T, s). The period straddling T starts at T on both legs: the
// fixed accrual is prorated to (T, t_j] and the floating stub resets at T
// (df(T) = 1), so annuity and float leg stay consistent between payment
// dates.
template <class DF>
double annuity_impl(const AmortizingSwapSpec& swap, double T, DF&& df) {
    const auto& dates = swap.payment_dates;
    double acc = 0.0;
    for (std::size_t j = 0; j < dates.size(); ++j) {
        if (dates[j] <= T) continue;
        const double period_start = std::max(j == 0 ? 0.0 : dates[j - 1], T);
        acc += swap.notionals[j] * (dates[j] - period_start) * df(dates[j]);
    }
    return acc;
}

template <class DF>
double float_leg_impl(const AmortizingSwapSpec& swap, double T, DF&& df) {
    const auto& dates = swap.payment_dates;
    double acc = 0.0;
    for (std::size_t j = 0; j < dates.size(); ++j) {
        if (dates[j] <= T) continue;
        const double period_start = j == 0 ? 0.0 : dates[j - 1];
        const double start_df = period_start <= T ? 1.0 : df(period_start);
        acc += swap.notionals[j] * (start_df - df(dates[j]));
    }
    return acc;
}

template <class DF>
double swap_rate_impl(const AmortizingSwapSpec& swap, double T, DF&& df) {
    const double a = annuity_impl(swap, T, df);
    if (!(a > 0.0))
        throw std::invalid_argument("swap_rate: no payments after T (empty annuity)");
    return float_leg_impl(swap, T, df) / a;
}

template <class DF>
double swap_value_impl(const AmortizingSwapSpec& swap, double T, double strike, DF&& df) {
    return strike * annuity_impl(swap, T, df) - float_leg_impl(swap, T, df);
}

} // namespace

void AmortizingSwapSpec::validate() const {
    const std::size_t n = payment_dates.size();
    if (n == 0) throw std::invalid_argument("swap: no payment dates");
    if (notionals.size() != n + 1)
        throw std::invalid_argument("swap: notional schedule must have one more entry than dates");
    double prev = 0.0;
    for (double d : payment_dates) {
        if (!(d > prev)) throw std::invalid_argument("swap: payment dates must be strictly increasing and positive");
        prev = d;
    }
    for (std::size_t j = 0; j + 1 < notionals.size(); ++j) {
        if (!(notionals[j] > 0.0))
            throw std::invalid_argument("swap: outstanding notionals must be positive");
        if (notionals[j + 1] > notionals[j] + 1e-12 * notionals.front())
            throw std::invalid_argument("swap: notional schedule must be non-increasing");
    }
    if (notionals.back() < 0.0)
        throw std::invalid_argument("swap: terminal notional must be non-negative");
    if (!std::isfinite(fixed_rate) || fixed_rate < 0.0)
        throw std::invalid_argument("swap: fixed rate must be finite and non-negative");
}

AmortizingSwapSpec AmortizingSwapSpec::bullet(double end_years, int frequency,
                                              double fixed_rate, double notional) {
    if (frequency < 1) throw std::invalid_argument("swap: frequency must be >= 1");
    const int n = static_cast<int>(std::round(end_years * frequency));
    if (n < 1 || std::fabs(end_years * frequency - n) > 1e-9)
        throw std::invalid_argument("swap: end is not a whole number of periods");
    AmortizingSwapSpec s;
    s.fixed_rate = fixed_rate;
    s.payment_dates.resize(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j)
        s.payment_dates[static_cast<std::size_t>(j - 1)] = static_cast<double>(j) / frequency;
    s.notionals.assign(static_cast<std::size_t>(n) + 1, notional);
    s.notionals.back() = 0.0; // redeemed at maturity
    s.validate();
    return s;
}

AmortizingSwapSpec AmortizingSwapSpec::linear(double end_years, int frequency,
                                              double fixed_rate, double notional) {
    AmortizingSwapSpec s = bullet(end_years, frequency, fixed_rate, notional);
    const std::size_t n = s.payment_dates.size();
    for (std::size_t j = 0; j <= n; ++j)
        s.notionals[j] = notional * static_cast<double>(n - j) / static_cast<double>(n);
    // keep the schedule valid: entering notionals stay positive
    s.validate();
    return s;
}

double AmortizingSwapSpec::outstanding_entering(double T) const {
    std::size_t paid = 0;
    while (paid < payment_dates.size() && payment_dates[paid] <= T) ++paid;
    return notionals[paid];
}

double annuity(const DiscountCurve& curve, const AmortizingSwapSpec& swap, double T) {
    return annuity_impl(swap, T, [&](double s) { return curve.discount(T, s); });
}

double swap_rate(const DiscountCurve& curve, const AmortizingSwapSpec& swap, double T) {
    return swap_rate_impl(swap, T, [&](double s) { return curve.discount(T, s); });
}

double swap_value(const DiscountCurve& curve, const AmortizingSwapSpec& swap, double T,
                  double strike) {
    return swap_value_impl(swap, T, strike,
                           [&](double s) { return curve.discount(T, s); });
}

double annuity(const HullWhiteModel& model, double x, const AmortizingSwapSpec& swap,
               double T) {
    return annuity_impl(swap, T, [&](double s) { return model.zcb_price(T, s, x); });
}

double swap_rate(const HullWhiteModel& model, double x, const AmortizingSwapSpec& swap,
                 double T) {
    return swap_rate_impl(swap, T, [&](double s) { return model.zcb_price(T, s, x); });
}

double swap_value(const HullWhiteModel& model, double x, const AmortizingSwapSpec& swap,
                  double T, double strike) {
    return swap_value_impl(swap, T, strike,
                           [&](double s) { return model.zcb_price(T, s, x); });
}

namespace {

// Payments at the expiry itself (possible when cutoff < expiry) are riskless
// at exercise; split them off so the root solve runs over the stochastic
// bonds only.
struct SplitClaim {
    Decomposition d;
    double deterministic{0.0};            // coupons paid exactly at expiry
    std::vector<std::size_t> stochastic;  // indices with t_j > expiry
};

SplitClaim split_claim(const AmortizingSwapSpec& swap, double expiry, double strike,
                       std::optional<double> cutoff) {
    swap.validate();
    if (expiry < 0.0) throw std::invalid_argument("swaption: negative expiry");
    const double cut = cutoff.value_or(expiry);
    if (cut > expiry)
        throw std::invalid_argument("swaption: cutoff must not exceed the expiry");

    SplitClaim out;
    out.d = decompose(swap, cut, strike);
    for (std::size_t j = 0; j < out.d.dates.size(); ++j) {
        if (out.d.dates[j] < expiry)
            throw std::invalid_argument(
                "swaption: payment strictly between cutoff and expiry");
        if (out.d.dates[j] == expiry)
            out.deterministic += out.d.coeffs[j];
        else
            out.stochastic.push_back(j);
    }
    return out;
}

// Critical state: the unique x* with det + sum_j c_j P(T, t_j; x*) = N_prepay.
// The left side is strictly decreasing in x, so a bracketed solve is safe.
double critical_state(const HullWhiteModel& model, const SplitClaim& c, double expiry,
                      double notional_scale) {
    auto excess = [&](double x) {
        double acc = c.deterministic - c.d.prepay_notional;
        for (std::size_t j : c.stochastic)
            acc += c.d.coeffs[j] * model.zcb_price(expiry, c.d.dates[j], x);
        return acc;
    };
    double lo = -0.5, hi = 0.5, flo, fhi;
    expand_bracket(excess, lo, hi, flo, fhi);
    const RootResult root =
        solve_bracketed(excess, lo, hi, 1e-12 * notional_scale, 0.0, 300);
    if (std::fabs(root.fx) > 1e-12 * notional_scale)
        throw std::runtime_error("swaption: critical-state solve did not converge");
    return root.x;
}

} // namespace

double swaption_price(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                      double expiry, double strike, std::optional<double> cutoff) {
    const SplitClaim c = split_claim(swap, expiry, strike, cutoff);
    if (c.d.dates.empty()) return 0.0; // no payments left: empty claim
    const DiscountCurve& curve = model.curve();

    const double floor_value = c.deterministic - c.d.prepay_notional;
    if (c.stochastic.empty()) // payoff carries no rate risk
        return curve.discount(expiry) * std::max(floor_value, 0.0);
    if (floor_value >= 0.0) { // exercised in every state: forward swap value
        double acc = floor_value * curve.discount(expiry);
        for (std::size_t j : c.stochastic) acc += c.d.coeffs[j] * curve.discount(c.d.dates[j]);
        return acc;
    }

    const double xstar = critical_state(model, c, expiry, swap.initial_notional());
    double price = 0.0;
    for (std::size_t j : c.stochastic) {
        const double bond_strike = model.zcb_price(expiry, c.d.dates[j], xstar);
        price += c.d.coeffs[j] * model.zcb_call(expiry, c.d.dates[j], bond_strike);
    }
    return price;
}

double swaption_price(const HullWhiteModel& model, const SwaptionSpec& spec, double strike) {
    return swaption_price(model, spec.underlying, spec.maturity, strike);
}

double payer_swaption_price(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                            double expiry, double strike, std::optional<double> cutoff) {
    const SplitClaim c = split_claim(swap, expiry, strike, cutoff);
    if (c.d.dates.empty()) return 0.0;
    const DiscountCurve& curve = model.curve();

    const double floor_value = c.deterministic - c.d.prepay_notional;
    if (c.stochastic.empty())
        return curve.discount(expiry) * std::max(-floor_value, 0.0);
    if (floor_value >= 0.0) return 0.0; // receiver exercised in every state

    const double xstar = critical_state(model, c, expiry, swap.initial_notional());
    double price = 0.0;
    for (std::size_t j : c.stochastic) {
        const double bond_strike = model.zcb_price(expiry, c.d.dates[j], xstar);
        price += c.d.coeffs[j] * model.zcb_put(expiry, c.d.dates[j], bond_strike);
    }
    return price;
}

double forward_swap_value(const HullWhiteModel& model, const AmortizingSwapSpec& swap,
                          double expiry, double strike, std::optional<double> cutoff) {
    const Decomposition d = decompose(swap, cutoff.value_or(expiry), strike);
    if (d.dates.empty()) return 0.0;
    double acc = -d.prepay_notional * model.curve().discount(expiry);
    for (std::size_t j = 0; j < d.dates.size(); ++j)
        acc += d.coeffs[j] * model.curve().discount(d.dates[j]);
    return acc;
}

GreekProfile swap_greeks_analytic(const DiscountCurve& curve,
                                  const AmortizingSwapSpec& swap, double strike,
                                  double bump, double gamma_bump) {
    swap.validate();
    const auto& quotes = curve.quotes();
    const Eigen::Index n_q = static_cast<Eigen::Index>(quotes.size());
    if (n_q == 0)
        throw std::invalid_argument("swap_greeks_analytic: curve carries no quotes");

    const auto& dates = swap.payment_dates;
    const std::size_t n = dates.size();

    // discounts at period starts and ends for a given curve
    auto discounts_at = [&](const DiscountCurve& c) {
        std::vector<double> p(n + 1);
        p[0] = 1.0; // t_0 = 0
        for (std::size_t j = 0; j < n; ++j) p[j + 1] = c.discount(dates[j]);
        return p;
    };

    const std::vector<double> p0 = discounts_at(curve);

    // first derivatives of the pillar discounts: central at `bump`
    std::vector<std::vector<double>> dp(static_cast<std::size_t>(n_q));
    for (Eigen::Index i = 0; i < n_q; ++i) {
        const auto up = discounts_at(bump_quote(curve, static_cast<std::size_t>(i), bump));
        const auto dn = discounts_at(bump_quote(curve, static_cast<std::size_t>(i), -bump));
        auto& row = dp[static_cast<std::size_t>(i)];
        row.resize(n + 1);
        for (std::size_t j = 0; j <= n; ++j) row[j] = (up[j] - dn[j]) / (2.0 * bump);
    }

    // second derivatives: central stencils at `gamma_bump`
    std::vector<std::vector<std::vector<double>>> d2p(
        static_cast<std::size_t>(n_q),
        std::vector<std::vector<double>>(static_cast<std::size_t>(n_q)));
    for (Eigen::Index i = 0; i < n_q; ++i) {
        const auto up = discounts_at(bump_quote(curve, static_cast<std::size_t>(i), gamma_bump));
        const auto dn = discounts_at(bump_quote(curve, static_cast<std::size_t>(i), -gamma_bump));
        auto& diag = d2p[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
        diag.resize(n + 1);
        for (std::size_t j = 0; j <= n; ++j)
            diag[j] = (up[j] - 2.0 * p0[j] + dn[j]) / (gamma_bump * gamma_bump);
    }
    for (Eigen::Index i = 0; i < n_q; ++i) {
        for (Eigen::Index l = i + 1; l < n_q; ++l) {
            std::vector<double> shift(static_cast<std::size_t>(n_q), 0.0);
            auto bumped2 = [&](double si, double sl) {
                std::fill(shift.begin(), shift.end(), 0.0);
                shift[static_cast<std::size_t>(i)] = si;
                shift[static_cast<std::size_t>(l)] = sl;
                return discounts_at(bump_quotes(curve, shift));
            };
            const auto pp = bumped2(gamma_bump, gamma_bump);
            const auto pm = bumped2(gamma_bump, -gamma_bump);
            const auto mp = bumped2(-gamma_bump, gamma_bump);
            const auto mm = bumped2(-gamma_bump, -gamma_bump);
            auto& cross = d2p[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
            cross.resize(n + 1);
            for (std::size_t j = 0; j <= n; ++j)
                cross[j] = (pp[j] - pm[j] - mp[j] + mm[j]) / (4.0 * gamma_bump * gamma_bump);
            d2p[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)] = cross;
        }
    }

    // assemble annuity / float-leg aggregates and their quote derivatives
    auto weight = [&](std::size_t j) { // accrual-weighted entering notional
        const double start = j == 0 ? 0.0 : dates[j - 1];
        return swap.notionals[j] * (dates[j] - start);
    };

    double A = 0.0, F = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        A += weight(j) * p0[j + 1];
        F += swap.notionals[j] * (p0[j] - p0[j + 1]);
    }
    const double kappa = F / A;

    Eigen::VectorXd dA = Eigen::VectorXd::Zero(n_q), dF = Eigen::VectorXd::Zero(n_q);
    for (Eigen::Index i = 0; i < n_q; ++i) {
        const auto& row = dp[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < n; ++j) {
            dA(i) += weight(j) * row[j + 1];
            dF(i) += swap.notionals[j] * (row[j] - row[j + 1]);
        }
    }
    const Eigen::VectorXd dkappa = (dF - kappa * dA) / A;

    GreekProfile out = GreekProfile::zero(n_q);
    out.delta = dA * (strike - kappa) - A * dkappa;

    for (Eigen::Index i = 0; i < n_q; ++i) {
        for (Eigen::Index l = 0; l < n_q; ++l) {
            const auto& row = d2p[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)];
            double d2A = 0.0, d2F = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                d2A += weight(j) * row[j + 1];
                d2F += swap.notionals[j] * (row[j] - row[j + 1]);
            }
            const double d2kappa =
                (d2F - kappa * d2A - dkappa(i) * dA(l) - dkappa(l) * dA(i)) / A;
            out.gamma(i, l) = d2A * (strike - kappa) - dA(i) * dkappa(l) -
                              dA(l) * dkappa(i) - A * d2kappa;
        }
    }
    return out;
}

} // namespace epor
