#pragma once

// =============================================================================
// One-factor Hull-White short-rate model fitted to a bootstrapped curve.
//
// The model is parameterised by the centred state x(t) with
//   dx = -a x dt + sigma dW,   x(0) = 0,   r(t) = x(t) + alpha(t),
// where alpha(t) = f(0,t) + phi(t) absorbs the fit to the initial curve.
// Bond prices conditional on the state never require differentiating the
// curve twice:
//   P(t,s | x) = P(0,s)/P(0,t) * exp(-1/2 B(t,s)^2 V(t) - B(t,s) phi(t)) * e^{-B(t,s) x}
// with B(t,s) = (1 - e^{-a(s-t)})/a, V(t) = Var[x(t)], and
// phi(t) = sigma^2/(2a^2) (1-e^{-at})^2. The phi term is exactly what makes
// discounted bond prices martingales, which the Monte Carlo fit test checks.
// =============================================================================

#include "epor/curve.hpp"
#include "epor/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace epor {

struct HullWhiteParams {
    double mean_reversion{0.05};
    double volatility{0.01};
};

class HullWhiteModel {
public:
    HullWhiteModel(HullWhiteParams params, DiscountCurve curve);

    double b_factor(double t, double s) const;   // B(t, s)
    double state_variance(double t) const;       // Var[x(t)]
    double convexity_shift(double t) const;      // phi(t)

    // Bond price at time t conditional on state x; s >= t. At t = 0 the
    // model-implied state is x = 0 and this reproduces curve.discount(s).
    double zcb_price(double t, double s, double x) const;

    double short_rate(double t, double x) const; // x + f(0,t) + phi(t)

    // Time-0 prices of European options on P(expiry, maturity), strike K.
    double zcb_call(double expiry, double maturity, double strike) const;
    double zcb_put(double expiry, double maturity, double strike) const;

    const DiscountCurve& curve() const { return curve_; }
    const HullWhiteParams& params() const { return params_; }

private:
    HullWhiteParams params_;
    DiscountCurve curve_;
};

// Exact-transition path generator over a fixed grid. Path `i` draws from the
// substream (seed, i), so results do not depend on work partitioning.
class HwPathSampler {
public:
    HwPathSampler(const HullWhiteModel& model, std::vector<double> grid,
                  std::uint64_t seed);

    std::size_t grid_size() const { return grid_.size(); }
    const std::vector<double>& grid() const { return grid_; }

    // Fills x(t_k) and the trapezoid-accumulated integral of
    // r = x + alpha over [t_0, t_k]. Spans must have grid_size() entries.
    void fill_path(std::size_t path_index, std::span<double> states,
                   std::span<double> integrated_rate) const;

    double alpha(std::size_t k) const { return alphas_[k]; }

private:
    const HullWhiteModel* model_;
    std::vector<double> grid_;
    std::vector<double> decay_;    // e^{-a dt_k}
    std::vector<double> step_sd_;  // conditional std dev of x over step k
    std::vector<double> alphas_;   // alpha(t_k)
    std::uint64_t seed_;
};

struct ShortRatePaths {
    std::vector<double> grid;
    std::size_t n_paths{0};
    // row-major: path p, grid index k
    std::vector<double> states;
    std::vector<double> integrated_rate;
    std::vector<double> alphas;

    double state(std::size_t p, std::size_t k) const { return states[p * grid.size() + k]; }
    double integral(std::size_t p, std::size_t k) const {
        return integrated_rate[p * grid.size() + k];
    }
    double short_rate(std::size_t p, std::size_t k) const { return state(p, k) + alphas[k]; }
};

// Materialises n_paths exact-transition paths on the grid (grid must start
// at 0 and be strictly increasing).
ShortRatePaths simulate_short_rate(const HullWhiteModel& model,
                                   std::span<const double> grid,
                                   std::size_t n_paths, std::uint64_t seed);

} // namespace epor
