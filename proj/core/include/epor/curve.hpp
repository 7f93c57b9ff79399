#pragma once

// =============================================================================
// Discount curve: par-swap bootstrap and quote-level bumping
//
// The curve is anchored at t0 = 0 with P(0) = 1 and interpolates
// log-discounts linearly between pillars (piecewise-constant instantaneous
// forwards). Beyond the last pillar the last forward is extended flat.
// Pillars sit exactly at the quote end dates; each pillar discount is the
// root of the corresponding par-swap equation, solved sequentially.
// =============================================================================

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace epor {

struct SwapQuote {
    double end_years{0.0};
    double par_rate{0.0};
    int frequency{1};   // fixed payments per year
};

class DiscountCurve {
public:
    // Direct construction from pillars (times strictly increasing, > 0,
    // discounts > 0). `quotes` is optional metadata recorded by bootstrap().
    DiscountCurve(std::vector<double> pillar_times,
                  std::vector<double> pillar_discounts,
                  std::vector<SwapQuote> quotes = {});

    // P(0, t); t >= 0.
    double discount(double t) const;
    // P(t, s) = P(0, s) / P(0, t); requires s >= t >= 0.
    double discount(double t, double s) const;
    // instantaneous forward, piecewise constant between pillars
    double forward_rate(double t) const;

    const std::vector<double>& pillar_times() const { return times_; }
    const std::vector<double>& pillar_discounts() const { return discounts_; }
    const std::vector<SwapQuote>& quotes() const { return quotes_; }

private:
    std::vector<double> times_;
    std::vector<double> discounts_;
    std::vector<double> log_discounts_;
    std::vector<SwapQuote> quotes_;
};

// Fixed-leg minus floating-leg value of a par swap per unit notional,
// priced on the given curve. Payment dates are j / frequency.
double par_swap_value(const DiscountCurve& curve, const SwapQuote& quote);

// Sequential bootstrap. Quotes must be sorted strictly increasing in end
// date. Throws std::invalid_argument on malformed input and
// std::runtime_error when a pillar equation cannot be solved.
DiscountCurve bootstrap(const std::vector<SwapQuote>& quotes);

// Returns a curve re-bootstrapped with quotes[index].par_rate += size.
DiscountCurve bump_quote(const DiscountCurve& curve, std::size_t index, double size);

// Returns a curve re-bootstrapped with every quote shifted by shifts[i]
// (one entry per quote). Used for shock analysis.
DiscountCurve bump_quotes(const DiscountCurve& curve, const std::vector<double>& shifts);

// Convenience: all quotes share one par rate (flat par curve).
DiscountCurve flat_par_curve(const std::vector<double>& ends, double par_rate,
                             int frequency = 1);

// CSV interfaces. Quotes: header "end_years,par_rate,frequency".
// Curve dump: header "pillar_time,discount".
std::vector<SwapQuote> load_quotes_csv(std::istream& in);
std::vector<SwapQuote> load_quotes_csv(const std::string& path);
void dump_curve_csv(const DiscountCurve& curve, std::ostream& out);

} // namespace epor
