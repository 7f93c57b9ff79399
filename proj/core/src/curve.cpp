#include "epor/curve.hpp"

#include "epor/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace epor {

namespace {

void validate_quote(const SwapQuote& q) {
    if (!(q.end_years > 0.0) || !std::isfinite(q.end_years))
        throw std::invalid_argument("quote end must be positive and finite");
    if (!std::isfinite(q.par_rate))
        throw std::invalid_argument("quote par rate must be finite");
    if (q.frequency < 1)
        throw std::invalid_argument("quote frequency must be >= 1");
    const double n_payments = q.end_years * q.frequency;
    if (std::fabs(n_payments - std::round(n_payments)) > 1e-9)
        throw std::invalid_argument("quote end is not a whole number of payment periods");
}

std::vector<double> payment_dates_of(const SwapQuote& q) {
    const int n = static_cast<int>(std::round(q.end_years * q.frequency));
    std::vector<double> dates(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j)
        dates[static_cast<std::size_t>(j - 1)] = static_cast<double>(j) / q.frequency;
    return dates;
}

// log P(0, t) on pillars (times, logs) with the implicit (0, 0) anchor and
// flat-forward extrapolation past the last pillar.
double log_df_at(const std::vector<double>& times, const std::vector<double>& logs,
                 double t) {
    if (t <= 0.0) return 0.0;
    if (t <= times.front()) return logs.front() * (t / times.front());
    if (t >= times.back()) {
        double slope;
        const std::size_t m = times.size();
        if (m == 1) {
            slope = logs.back() / times.back();
        } else {
            slope = (logs[m - 1] - logs[m - 2]) / (times[m - 1] - times[m - 2]);
        }
        return logs.back() + slope * (t - times.back());
    }
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return logs[i - 1] * (1.0 - w) + logs[i] * w;
}

double par_value_on(const std::vector<double>& times, const std::vector<double>& logs,
                    const SwapQuote& q) {
    double fixed = 0.0;
    const double dt = 1.0 / q.frequency;
    double last_df = 1.0;
    for (double date : payment_dates_of(q)) {
        last_df = std::exp(log_df_at(times, logs, date));
        fixed += q.par_rate * dt * last_df;
    }
    const double floating = 1.0 - last_df;
    return fixed - floating;
}

} // namespace

DiscountCurve::DiscountCurve(std::vector<double> pillar_times,
                             std::vector<double> pillar_discounts,
                             std::vector<SwapQuote> quotes)
    : times_(std::move(pillar_times)),
      discounts_(std::move(pillar_discounts)),
      quotes_(std::move(quotes)) {
    if (times_.empty() || times_.size() != discounts_.size())
        throw std::invalid_argument("curve: empty pillars or size mismatch");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!(times_[i] > 0.0) || (i > 0 && !(times_[i] > times_[i - 1])))
            throw std::invalid_argument("curve: pillar times must be positive and strictly increasing");
        if (!(discounts_[i] > 0.0))
            throw std::invalid_argument("curve: pillar discounts must be positive");
    }
    log_discounts_.resize(times_.size());
    for (std::size_t i = 0; i < times_.size(); ++i)
        log_discounts_[i] = std::log(discounts_[i]);
}

double DiscountCurve::discount(double t) const {
    if (t < 0.0) throw std::invalid_argument("discount: negative time");
    return std::exp(log_df_at(times_, log_discounts_, t));
}

double DiscountCurve::discount(double t, double s) const {
    if (s < t) throw std::invalid_argument("discount: s must be >= t");
    if (t < 0.0) throw std::invalid_argument("discount: negative time");
    return std::exp(log_df_at(times_, log_discounts_, s) -
                    log_df_at(times_, log_discounts_, t));
}

double DiscountCurve::forward_rate(double t) const {
    if (t < 0.0) throw std::invalid_argument("forward_rate: negative time");
    // forward over the segment containing t = -d logP / dt on that segment
    if (t < times_.front() || times_.size() == 1) {
        const double seg = times_.front();
        return -log_discounts_.front() / seg;
    }
    std::size_t i = times_.size() - 1;
    if (t < times_.back()) {
        const auto it = std::upper_bound(times_.begin(), times_.end(), t);
        i = static_cast<std::size_t>(it - times_.begin());
    }
    return -(log_discounts_[i] - log_discounts_[i - 1]) / (times_[i] - times_[i - 1]);
}

double par_swap_value(const DiscountCurve& curve, const SwapQuote& quote) {
    validate_quote(quote);
    double fixed = 0.0;
    const double dt = 1.0 / quote.frequency;
    double last_df = 1.0;
    for (double date : payment_dates_of(quote)) {
        last_df = curve.discount(date);
        fixed += quote.par_rate * dt * last_df;
    }
    return fixed - (1.0 - last_df);
}

DiscountCurve bootstrap(const std::vector<SwapQuote>& quotes) {
    if (quotes.empty()) throw std::invalid_argument("bootstrap: no quotes");
    for (std::size_t i = 0; i < quotes.size(); ++i) {
        validate_quote(quotes[i]);
        if (i > 0 && !(quotes[i].end_years > quotes[i - 1].end_years))
            throw std::invalid_argument("bootstrap: quote ends must be strictly increasing");
    }

    std::vector<double> times, logs;
    times.reserve(quotes.size());
    logs.reserve(quotes.size());

    for (std::size_t i = 0; i < quotes.size(); ++i) {
        const SwapQuote& q = quotes[i];
        times.push_back(q.end_years);
        logs.push_back(0.0); // candidate slot

        auto value_at = [&](double y) {
            logs.back() = y;
            return par_value_on(times, logs, q);
        };

        // initial guess: continue at the quoted par rate from the previous pillar
        const double prev_log = i == 0 ? 0.0 : logs[i - 1];
        const double prev_time = i == 0 ? 0.0 : times[i - 1];
        const double guess = prev_log - q.par_rate * (q.end_years - prev_time);
        double lo = guess - 0.10 * (q.end_years - prev_time);
        double hi = guess + 0.10 * (q.end_years - prev_time);
        double flo, fhi;
        try {
            expand_bracket(value_at, lo, hi, flo, fhi);
        } catch (const std::runtime_error&) {
            throw std::runtime_error("bootstrap: cannot bracket pillar at t=" +
                                     std::to_string(q.end_years));
        }
        const RootResult root = solve_bracketed(value_at, lo, hi, 1e-15);
        logs.back() = root.x;
        if (std::fabs(value_at(root.x)) > 1e-12)
            throw std::runtime_error("bootstrap: pillar equation not solved at t=" +
                                     std::to_string(q.end_years));
    }

    std::vector<double> dfs(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) dfs[i] = std::exp(logs[i]);
    return DiscountCurve(std::move(times), std::move(dfs), quotes);
}

DiscountCurve bump_quote(const DiscountCurve& curve, std::size_t index, double size) {
    std::vector<SwapQuote> quotes = curve.quotes();
    if (quotes.empty())
        throw std::invalid_argument("bump_quote: curve carries no quotes");
    if (index >= quotes.size())
        throw std::invalid_argument("bump_quote: quote index out of range");
    quotes[index].par_rate += size;
    return bootstrap(quotes);
}

DiscountCurve bump_quotes(const DiscountCurve& curve, const std::vector<double>& shifts) {
    std::vector<SwapQuote> quotes = curve.quotes();
    if (quotes.size() != shifts.size())
        throw std::invalid_argument("bump_quotes: one shift per quote required");
    for (std::size_t i = 0; i < quotes.size(); ++i) quotes[i].par_rate += shifts[i];
    return bootstrap(quotes);
}

DiscountCurve flat_par_curve(const std::vector<double>& ends, double par_rate,
                             int frequency) {
    std::vector<SwapQuote> quotes;
    quotes.reserve(ends.size());
    for (double e : ends) quotes.push_back({e, par_rate, frequency});
    return bootstrap(quotes);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

} // namespace

std::vector<SwapQuote> load_quotes_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("quotes csv: empty file");
    if (line.size() && line.back() == '\r') line.pop_back();
    if (line != "end_years,par_rate,frequency")
        throw std::invalid_argument("quotes csv: expected header end_years,par_rate,frequency");
    std::vector<SwapQuote> quotes;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 3)
            throw std::invalid_argument("quotes csv: bad field count on line " +
                                        std::to_string(line_no));
        try {
            SwapQuote q;
            q.end_years = std::stod(fields[0]);
            q.par_rate = std::stod(fields[1]);
            q.frequency = std::stoi(fields[2]);
            validate_quote(q);
            quotes.push_back(q);
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("quotes csv: malformed line " + std::to_string(line_no));
        }
    }
    if (quotes.empty()) throw std::invalid_argument("quotes csv: no data rows");
    return quotes;
}

std::vector<SwapQuote> load_quotes_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("quotes csv: cannot open " + path);
    return load_quotes_csv(in);
}

void dump_curve_csv(const DiscountCurve& curve, std::ostream& out) {
    out << "pillar_time,discount\n";
    char buf[64];
    for (std::size_t i = 0; i < curve.pillar_times().size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.17g\n", curve.pillar_times()[i],
                      curve.pillar_discounts()[i]);
        out << buf;
    }
}

} // namespace epor
