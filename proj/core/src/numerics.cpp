#include "epor/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epor {

void expand_bracket(const std::function<double(double)>& f,
                    double& lo, double& hi,
                    double& flo, double& fhi,
                    int max_expansions) {
    if (!(lo < hi)) throw std::invalid_argument("expand_bracket: lo must be < hi");
    flo = f(lo);
    fhi = f(hi);
    for (int i = 0; i < max_expansions; ++i) {
        if (flo == 0.0 || fhi == 0.0 || (flo < 0.0) != (fhi < 0.0)) return;
        const double width = hi - lo;
        // grow the side whose value is closer to zero
        if (std::fabs(flo) < std::fabs(fhi)) {
            lo -= width;
            flo = f(lo);
        } else {
            hi += width;
            fhi = f(hi);
        }
    }
    throw std::runtime_error("expand_bracket: no sign change found");
}

RootResult solve_bracketed(const std::function<double(double)>& f,
                           double lo, double hi,
                           double y_tol, double x_tol,
                           int max_iter) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return {lo, 0.0, 0};
    if (fhi == 0.0) return {hi, 0.0, 0};
    if ((flo < 0.0) == (fhi < 0.0))
        throw std::invalid_argument("solve_bracketed: endpoints do not bracket a root");

    // Illinois-damped false position: plain regula falsi stalls to linear
    // convergence on convex functions (one endpoint never moves); halving
    // the stale endpoint's value keeps the order superlinear.
    double x = hi, fx = fhi;
    int stale_side = 0;
    for (int it = 1; it <= max_iter; ++it) {
        double cand = hi - fhi * (hi - lo) / (fhi - flo);
        if (!std::isfinite(cand) || cand <= lo || cand >= hi)
            cand = 0.5 * (lo + hi);
        x = cand;
        fx = f(x);
        if (std::fabs(fx) <= y_tol || (x_tol > 0.0 && hi - lo <= x_tol))
            return {x, fx, it};
        if ((fx < 0.0) == (flo < 0.0)) {
            lo = x;
            flo = fx;
            if (stale_side == 1) fhi *= 0.5;
            stale_side = 1;
        } else {
            hi = x;
            fhi = fx;
            if (stale_side == -1) flo *= 0.5;
            stale_side = -1;
        }
    }
    return {x, fx, max_iter};
}

MinResult golden_section_min(const std::function<double(double)>& f,
                             double lo, double hi,
                             double x_tol, int max_iter) {
    static const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iter && (b - a) > x_tol; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? MinResult{c, fc} : MinResult{d, fd};
}

MinResult grid_then_golden_min(const std::function<double(double)>& f,
                               double lo, double hi,
                               int scan_points, double x_tol) {
    if (scan_points < 3) throw std::invalid_argument("grid_then_golden_min: need >= 3 scan points");
    const double dx = (hi - lo) / (scan_points - 1);
    int best = 0;
    double fbest = f(lo);
    std::vector<double> fs(static_cast<std::size_t>(scan_points));
    fs[0] = fbest;
    for (int i = 1; i < scan_points; ++i) {
        fs[static_cast<std::size_t>(i)] = f(lo + i * dx);
        if (fs[static_cast<std::size_t>(i)] < fbest) {
            fbest = fs[static_cast<std::size_t>(i)];
            best = i;
        }
    }
    const double a = lo + std::max(0, best - 1) * dx;
    const double b = lo + std::min(scan_points - 1, best + 1) * dx;
    MinResult refined = golden_section_min(f, a, b, x_tol);
    if (fbest < refined.fx) return {lo + best * dx, fbest};
    return refined;
}

double integrate_simpson(std::span<const double> values, double dx) {
    const std::size_t n = values.size();
    if (n < 3 || n % 2 == 0)
        throw std::invalid_argument("integrate_simpson: need an odd number of points >= 3");
    double sum4 = 0.0, sum2 = 0.0;
    for (std::size_t i = 1; i + 1 < n; i += 2) sum4 += values[i];
    for (std::size_t i = 2; i + 1 < n; i += 2) sum2 += values[i];
    return dx / 3.0 * (values.front() + values.back() + 4.0 * sum4 + 2.0 * sum2);
}

double integrate_trapezoid(std::span<const double> values, double dx) {
    const std::size_t n = values.size();
    if (n < 2) throw std::invalid_argument("integrate_trapezoid: need >= 2 points");
    double sum = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < n; ++i) sum += values[i];
    return sum * dx;
}

namespace {

// Golub-Welsch: nodes are eigenvalues of the symmetric tridiagonal Jacobi
// matrix, weights are mu0 * (first eigenvector component)^2.
GaussRule golub_welsch(const std::vector<double>& offdiag, double mu0) {
    const int n = static_cast<int>(offdiag.size()) + 1;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        jacobi(i, i + 1) = offdiag[static_cast<std::size_t>(i)];
        jacobi(i + 1, i) = offdiag[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rule.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
        const double v0 = solver.eigenvectors()(0, i);
        rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
    }
    return rule;
}

} // namespace

GaussRule gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("gauss_hermite: n must be >= 1");
    std::vector<double> offdiag(static_cast<std::size_t>(n - 1));
    for (int k = 1; k < n; ++k) offdiag[static_cast<std::size_t>(k - 1)] = std::sqrt(k / 2.0);
    return golub_welsch(offdiag, std::sqrt(M_PI));
}

GaussRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    std::vector<double> offdiag(static_cast<std::size_t>(n - 1));
    for (int k = 1; k < n; ++k)
        offdiag[static_cast<std::size_t>(k - 1)] = k / std::sqrt(4.0 * k * k - 1.0);
    GaussRule rule = golub_welsch(offdiag, 2.0);
    // map from [-1, 1] to [a, b]
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        rule.nodes[i] = mid + half * rule.nodes[i];
        rule.weights[i] *= half;
    }
    return rule;
}

double pairwise_sum(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n <= 16) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

MeanStdErr mean_and_std_err(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n == 0) return {};
    const double mean = pairwise_sum(values) / static_cast<double>(n);
    if (n == 1) return {mean, 0.0};
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q outside [0, 1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= values.size()) return values.back();
    const double frac = pos - static_cast<double>(i);
    return values[i] * (1.0 - frac) + values[i + 1] * frac;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

double norm_ppf(double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("norm_ppf: u outside (0, 1)");
    // Acklam's rational approximation
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (u < plow) {
        const double q = std::sqrt(-2.0 * std::log(u));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (u <= 1.0 - plow) {
        const double q = u - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-u));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // one Halley polish step
    const double e = norm_cdf(x) - u;
    const double f = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= f / (1.0 + 0.5 * x * f);
    return x;
}

double interp_linear(std::span<const double> xs, std::span<const double> ys, double x) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("interp_linear: mismatched or empty inputs");
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
    const double w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    return ys[i] * (1.0 - w) + ys[i + 1] * w;
}

} // namespace epor
