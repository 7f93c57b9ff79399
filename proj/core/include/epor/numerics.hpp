#pragma once

// Small numerical toolbox shared across the library: root bracketing and
// safeguarded solves, golden-section minimisation, composite quadrature,
// deterministic pairwise summation, normal distribution helpers and
// Gaussian quadrature rules (computed via Golub-Welsch, not tabulated).

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace epor {

inline constexpr double kMonthsPerYear = 12.0;

// ---- root finding ---------------------------------------------------------

struct RootResult {
    double x{0.0};
    double fx{0.0};
    int iterations{0};
};

// Expands [lo, hi] geometrically around the seed interval until f changes
// sign. Throws std::runtime_error if no sign change is found.
void expand_bracket(const std::function<double(double)>& f,
                    double& lo, double& hi,
                    double& flo, double& fhi,
                    int max_expansions = 60);

// Safeguarded secant: falls back to bisection whenever the secant step
// leaves the bracket. Requires f(lo) and f(hi) of opposite sign.
RootResult solve_bracketed(const std::function<double(double)>& f,
                           double lo, double hi,
                           double y_tol, double x_tol = 0.0,
                           int max_iter = 200);

// ---- 1-d minimisation ------------------------------------------------------

struct MinResult {
    double x{0.0};
    double fx{0.0};
};

// Golden-section search on [lo, hi]; assumes a unimodal-enough objective.
MinResult golden_section_min(const std::function<double(double)>& f,
                             double lo, double hi,
                             double x_tol, int max_iter = 120);

// Evaluates f on an n-point uniform grid over [lo, hi] and returns the
// minimising node together with its bracketing neighbours. Used to seed
// golden-section when the objective may have several local dips.
MinResult grid_then_golden_min(const std::function<double(double)>& f,
                               double lo, double hi,
                               int scan_points, double x_tol);

// ---- quadrature ------------------------------------------------------------

// Composite Simpson on a uniform grid of `values` with spacing dx.
// Requires an even number of intervals (odd number of points >= 3).
double integrate_simpson(std::span<const double> values, double dx);

double integrate_trapezoid(std::span<const double> values, double dx);

struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Hermite rule for integrals of g against exp(-x^2); to average a
// function of a N(mu, sigma^2) variable evaluate g(mu + sqrt(2) sigma x_i)
// with weights w_i / sqrt(pi).
GaussRule gauss_hermite(int n);

// Gauss-Legendre rule on [a, b].
GaussRule gauss_legendre(int n, double a = -1.0, double b = 1.0);

// ---- reductions and statistics ----------------------------------------------

// Pairwise (cascade) summation; deterministic for a fixed element order
// regardless of how the elements were produced.
double pairwise_sum(std::span<const double> values);

struct MeanStdErr {
    double mean{0.0};
    double std_err{0.0};
};

MeanStdErr mean_and_std_err(std::span<const double> values);

// Linear-interpolation (type 7) quantile of an unsorted sample copy.
double quantile(std::vector<double> values, double q);

// ---- normal distribution helpers ---------------------------------------------

double norm_cdf(double x);
double norm_pdf(double x);
// Inverse standard normal CDF (Acklam's rational approximation polished
// with one Halley step; accurate to ~1e-15 in the bulk).
double norm_ppf(double u);

// ---- interpolation -------------------------------------------------------------

// Piecewise-linear interpolation with flat extrapolation. xs must be
// strictly increasing.
double interp_linear(std::span<const double> xs, std::span<const double> ys, double x);

} // namespace epor
