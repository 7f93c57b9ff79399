#include "epor/hullwhite.hpp"

#include "epor/numerics.hpp"
#include "epor/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace epor {

namespace {
constexpr double kTinyMeanReversion = 1e-12;
constexpr double kTinyVol = 1e-14;
} // namespace

HullWhiteModel::HullWhiteModel(HullWhiteParams params, DiscountCurve curve)
    : params_(params), curve_(std::move(curve)) {
    if (!(params_.mean_reversion > 0.0))
        throw std::invalid_argument("hull-white: mean reversion must be positive");
    if (params_.volatility < 0.0)
        throw std::invalid_argument("hull-white: volatility must be non-negative");
}

double HullWhiteModel::b_factor(double t, double s) const {
    if (s < t) throw std::invalid_argument("b_factor: s must be >= t");
    const double a = params_.mean_reversion;
    if (a < kTinyMeanReversion) return s - t;
    return -std::expm1(-a * (s - t)) / a;
}

double HullWhiteModel::state_variance(double t) const {
    const double a = params_.mean_reversion;
    const double s2 = params_.volatility * params_.volatility;
    if (a < kTinyMeanReversion) return s2 * t;
    return s2 * -std::expm1(-2.0 * a * t) / (2.0 * a);
}

double HullWhiteModel::convexity_shift(double t) const {
    const double a = params_.mean_reversion;
    const double s2 = params_.volatility * params_.volatility;
    if (a < kTinyMeanReversion) return 0.5 * s2 * t * t;
    const double one_minus = -std::expm1(-a * t);
    return s2 / (2.0 * a * a) * one_minus * one_minus;
}

double HullWhiteModel::zcb_price(double t, double s, double x) const {
    if (s < t || t < 0.0) throw std::invalid_argument("zcb_price: need 0 <= t <= s");
    const double b = b_factor(t, s);
    const double log_ratio = std::log(curve_.discount(s)) - std::log(curve_.discount(t));
    const double adj = -0.5 * b * b * state_variance(t) - b * convexity_shift(t);
    return std::exp(log_ratio + adj - b * x);
}

double HullWhiteModel::short_rate(double t, double x) const {
    return x + curve_.forward_rate(t) + convexity_shift(t);
}

double HullWhiteModel::zcb_call(double expiry, double maturity, double strike) const {
    if (!(strike > 0.0)) throw std::invalid_argument("zcb_call: strike must be positive");
    if (maturity < expiry || expiry < 0.0)
        throw std::invalid_argument("zcb_call: need 0 <= expiry <= maturity");
    const double pt = curve_.discount(expiry);
    const double ps = curve_.discount(maturity);
    const double sigma_p = b_factor(expiry, maturity) * std::sqrt(state_variance(expiry));
    if (sigma_p < kTinyVol) return std::max(ps - strike * pt, 0.0);
    const double h = std::log(ps / (strike * pt)) / sigma_p + 0.5 * sigma_p;
    return ps * norm_cdf(h) - strike * pt * norm_cdf(h - sigma_p);
}

double HullWhiteModel::zcb_put(double expiry, double maturity, double strike) const {
    if (!(strike > 0.0)) throw std::invalid_argument("zcb_put: strike must be positive");
    if (maturity < expiry || expiry < 0.0)
        throw std::invalid_argument("zcb_put: need 0 <= expiry <= maturity");
    const double pt = curve_.discount(expiry);
    const double ps = curve_.discount(maturity);
    const double sigma_p = b_factor(expiry, maturity) * std::sqrt(state_variance(expiry));
    if (sigma_p < kTinyVol) return std::max(strike * pt - ps, 0.0);
    const double h = std::log(ps / (strike * pt)) / sigma_p + 0.5 * sigma_p;
    return strike * pt * norm_cdf(sigma_p - h) - ps * norm_cdf(-h);
}

HwPathSampler::HwPathSampler(const HullWhiteModel& model, std::vector<double> grid,
                             std::uint64_t seed)
    : model_(&model), grid_(std::move(grid)), seed_(seed) {
    if (grid_.size() < 2) throw std::invalid_argument("path sampler: grid needs >= 2 points");
    if (std::fabs(grid_.front()) > 1e-12)
        throw std::invalid_argument("path sampler: grid must start at t0 = 0");
    const double a = model.params().mean_reversion;
    const double sigma = model.params().volatility;
    decay_.resize(grid_.size() - 1);
    step_sd_.resize(grid_.size() - 1);
    alphas_.resize(grid_.size());
    alphas_[0] = model.curve().forward_rate(0.0) + model.convexity_shift(0.0);
    for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
        const double dt = grid_[k + 1] - grid_[k];
        if (!(dt > 0.0))
            throw std::invalid_argument("path sampler: grid must be strictly increasing");
        decay_[k] = std::exp(-a * dt);
        const double var = sigma * sigma * -std::expm1(-2.0 * a * dt) / (2.0 * a);
        step_sd_[k] = std::sqrt(var);
        alphas_[k + 1] =
            model.curve().forward_rate(grid_[k + 1]) + model.convexity_shift(grid_[k + 1]);
    }
}

void HwPathSampler::fill_path(std::size_t path_index, std::span<double> states,
                              std::span<double> integrated_rate) const {
    if (states.size() != grid_.size() || integrated_rate.size() != grid_.size())
        throw std::invalid_argument("fill_path: output spans must match grid size");
    Rng rng(seed_, path_index);
    double x = 0.0;
    states[0] = x;
    integrated_rate[0] = 0.0;
    double prev_r = x + alphas_[0];
    for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
        x = x * decay_[k] + step_sd_[k] * rng.normal();
        states[k + 1] = x;
        const double r = x + alphas_[k + 1];
        const double dt = grid_[k + 1] - grid_[k];
        integrated_rate[k + 1] = integrated_rate[k] + 0.5 * (prev_r + r) * dt;
        prev_r = r;
    }
}

ShortRatePaths simulate_short_rate(const HullWhiteModel& model,
                                   std::span<const double> grid,
                                   std::size_t n_paths, std::uint64_t seed) {
    if (n_paths == 0) throw std::invalid_argument("simulate_short_rate: zero paths");
    HwPathSampler sampler(model, std::vector<double>(grid.begin(), grid.end()), seed);

    ShortRatePaths out;
    out.grid = sampler.grid();
    out.n_paths = n_paths;
    out.alphas.resize(out.grid.size());
    for (std::size_t k = 0; k < out.grid.size(); ++k) out.alphas[k] = sampler.alpha(k);
    out.states.resize(n_paths * out.grid.size());
    out.integrated_rate.resize(n_paths * out.grid.size());

    const std::size_t m = out.grid.size();
    parallel_for(n_paths, [&](std::size_t p) {
        sampler.fill_path(p, std::span<double>(out.states.data() + p * m, m),
                          std::span<double>(out.integrated_rate.data() + p * m, m));
    });
    return out;
}

} // namespace epor
