#include "epor/calibration.hpp"

#include "epor/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace epor {

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) {
        const double e = std::exp(-z);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + e^z) without overflow
double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace

void validate_observations(const std::vector<HmObservation>& obs) {
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& o = obs[i];
        if (o.month < 1 || o.month > 12)
            throw std::invalid_argument("observation " + std::to_string(i) +
                                        ": month out of range");
        if (!(o.h_frac >= 0.0) || !(o.h_frac <= 1.0))
            throw std::invalid_argument("observation " + std::to_string(i) +
                                        ": h_frac outside [0, 1]");
        if (!(o.p_frac >= 0.0) || !(o.p_frac <= 1.0))
            throw std::invalid_argument("observation " + std::to_string(i) +
                                        ": p_frac outside [0, 1]");
        if (o.exposures < 0.0)
            throw std::invalid_argument("observation " + std::to_string(i) +
                                        ": negative exposures");
    }
}

// ---- level-law moment matching -----------------------------------------------

HousingModel MomentFit::model() const {
    HousingModel m;
    m.kind = HousingKind::flat_random;
    m.distribution = distribution;
    m.mean = mean;
    m.variance = variance;
    return m;
}

MomentFit moment_fit(const std::vector<HmObservation>& obs, LevelDistribution kind) {
    validate_observations(obs);
    const std::size_t n = obs.size();
    if (n < 2) throw std::invalid_argument("moment_fit: need at least 2 observations");

    double mean = 0.0;
    for (const auto& o : obs) mean += o.h_frac / month_dt;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& o : obs) {
        const double d = o.h_frac / month_dt - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    // a constant series accumulates a few ulp^2 of round-off; snap spreads
    // below any data resolution to an exact point mass
    if (var <= 1e-18 * mean * mean) var = 0.0;

    MomentFit fit;
    fit.distribution = kind;
    fit.mean = mean;
    fit.variance = var;
    fit.observations = n;
    switch (kind) {
    case LevelDistribution::normal:
        fit.param1 = mean;
        fit.param2 = std::sqrt(var);
        break;
    case LevelDistribution::lognormal: {
        if (var <= 0.0)
            throw CalibrationError("moment_fit: lognormal law needs positive variance");
        if (mean <= 0.0)
            throw CalibrationError("moment_fit: lognormal law needs a positive mean");
        const double s2 = std::log1p(var / (mean * mean));
        fit.param1 = std::log(mean) - 0.5 * s2;
        fit.param2 = std::sqrt(s2);
        break;
    }
    case LevelDistribution::shifted_exponential: {
        if (var <= 0.0)
            throw CalibrationError(
                "moment_fit: shifted-exponential law needs positive variance");
        const double sd = std::sqrt(var);
        fit.param1 = mean - sd;
        fit.param2 = sd;
        break;
    }
    }
    return fit;
}

// ---- OU maximum likelihood ---------------------------------------------------

OuFit ou_mle(const std::vector<HmObservation>& obs) {
    validate_observations(obs);
    const std::size_t n = obs.size();
    if (n < 3) throw std::invalid_argument("ou_mle: need at least 3 observations");
    for (std::size_t i = 1; i < n; ++i)
        if (obs[i].month_index() != obs[i - 1].month_index() + 1)
            throw std::invalid_argument("ou_mle: observations must be consecutive months");

    // exact discretization: h_{k+1} = theta + rho (h_k - theta) + eps,
    // rho = exp(-alpha dt). The conditional MLE is the OLS regression of
    // h_{k+1} on (1, h_k).
    const std::size_t m = n - 1;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sx += obs[i].h_frac / month_dt;
        sy += obs[i + 1].h_frac / month_dt;
    }
    const double xbar = sx / static_cast<double>(m);
    const double ybar = sy / static_cast<double>(m);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double dx = obs[i].h_frac / month_dt - xbar;
        const double dy = obs[i + 1].h_frac / month_dt - ybar;
        sxx += dx * dx;
        sxy += dx * dy;
    }
    if (sxx <= 0.0) throw CalibrationError("ou_mle: series has no variation");

    OuFit fit;
    fit.transitions = m;
    fit.rho = sxy / sxx;
    if (!(fit.rho > 0.0) || !(fit.rho < 1.0))
        throw CalibrationError("ou_mle: series is not mean-reverting "
                               "(lag-1 coefficient outside (0, 1))");
    fit.theta = (ybar - fit.rho * xbar) / (1.0 - fit.rho);
    double rss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double x = obs[i].h_frac / month_dt;
        const double y = obs[i + 1].h_frac / month_dt;
        const double e = y - fit.theta - fit.rho * (x - fit.theta);
        rss += e * e;
    }
    fit.innovation_sd = std::sqrt(rss / static_cast<double>(m));
    fit.alpha = -std::log(fit.rho) / month_dt;
    // stationary step variance eta^2 (1 - rho^2) / (2 alpha)
    fit.eta = fit.innovation_sd *
              std::sqrt(2.0 * fit.alpha / (1.0 - fit.rho * fit.rho));
    fit.weakly_identified = fit.alpha * month_dt >= 1.0;
    return fit;
}

// ---- logistic intensity regression -------------------------------------------

LogisticFit logistic_intensity_fit(const std::vector<HmObservation>& obs) {
    validate_observations(obs);
    const std::size_t n = obs.size();
    if (n < 10)
        throw std::invalid_argument("logistic fit: need at least 10 observations");
    for (const auto& o : obs)
        if (!(o.p_frac > 0.0) || !(o.p_frac < 1.0))
            throw std::invalid_argument("logistic fit: p_frac must lie strictly in (0, 1)");

    // exposure counts turn the fit binomial; without them each month enters
    // with unit weight (quasi-likelihood on the observed fraction)
    bool binomial = true;
    for (const auto& o : obs) binomial = binomial && o.exposures > 0.0;

    // the monthly regressor is tiny (~4e-3), so its monomials are terribly
    // conditioned; fit in standardized coordinates and expand afterwards
    double tm = 0.0;
    for (const auto& o : obs) tm += o.h_frac;
    tm /= static_cast<double>(n);
    double tv = 0.0;
    for (const auto& o : obs) {
        const double d = o.h_frac - tm;
        tv += d * d;
    }
    tv /= static_cast<double>(n);
    if (tv <= 0.0)
        throw CalibrationError("logistic fit: transaction series is constant; "
                               "slope coefficients are not identified");
    const double ts = std::sqrt(tv);

    Eigen::VectorXd u(n), y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[static_cast<Eigen::Index>(i)] = (obs[i].h_frac - tm) / ts;
        y[static_cast<Eigen::Index>(i)] = obs[i].p_frac;
        w[static_cast<Eigen::Index>(i)] = binomial ? obs[i].exposures : 1.0;
    }

    const auto loglik = [&](const Eigen::Vector3d& g) {
        double ll = 0.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const double z = g[0] + g[1] * u[i] + g[2] * u[i] * u[i];
            ll += w[i] * (y[i] * z - softplus(z));
        }
        return ll;
    };

    double pbar = 0.0, wsum = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        pbar += w[i] * y[i];
        wsum += w[i];
    }
    pbar = std::min(1.0 - 1e-12, std::max(1e-12, pbar / wsum));

    Eigen::Vector3d gamma(logit(pbar), 0.0, 0.0);
    double ll = loglik(gamma);
    const double grad_tol = 1e-10;
    const int max_iter = 200;
    int iters = 0;
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    Eigen::Matrix3d info = Eigen::Matrix3d::Zero();

    const auto fill_derivatives = [&](const Eigen::Vector3d& g) {
        grad.setZero();
        info.setZero();
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const Eigen::Vector3d x(1.0, u[i], u[i] * u[i]);
            const double p = stable_sigmoid(g.dot(x));
            grad += w[i] * (y[i] - p) * x;
            info += w[i] * p * (1.0 - p) * x * x.transpose();
        }
    };

    for (; iters < max_iter; ++iters) {
        fill_derivatives(gamma);
        if (grad.norm() <= grad_tol) break;
        const Eigen::LDLT<Eigen::Matrix3d> ldlt(info);
        if (ldlt.info() != Eigen::Success)
            throw CalibrationError("logistic fit: singular information matrix");
        const Eigen::Vector3d delta = ldlt.solve(grad);
        if (!delta.allFinite())
            throw CalibrationError("logistic fit: non-finite update step");
        // near the optimum the likelihood gain drowns in round-off; take the
        // raw Newton step there instead of fighting the monotonicity test
        const double decrement = grad.dot(delta);
        if (decrement <= std::fabs(ll) * 1e-14) {
            gamma += delta;
            ll = loglik(gamma);
            continue;
        }
        double step = 1.0;
        double ll_new = loglik(gamma + step * delta);
        while (ll_new < ll && step > 1e-12) {
            step *= 0.5;
            ll_new = loglik(gamma + step * delta);
        }
        if (ll_new < ll) break; // no ascent direction left
        gamma += step * delta;
        ll = ll_new;
    }
    fill_derivatives(gamma);
    if (grad.norm() > grad_tol)
        throw CalibrationError("logistic fit: no convergence after " +
                               std::to_string(max_iter) +
                               " iterations (possible separation)");

    // expand standardized coefficients to monomials in h_dt:
    //   z = g0 + g1 (t-m)/s + g2 ((t-m)/s)^2 = b0 + b1 t + b2 t^2
    Eigen::Matrix3d expand = Eigen::Matrix3d::Zero();
    expand(0, 0) = 1.0;
    expand(0, 1) = -tm / ts;
    expand(0, 2) = tm * tm / (ts * ts);
    expand(1, 1) = 1.0 / ts;
    expand(1, 2) = -2.0 * tm / (ts * ts);
    expand(2, 2) = 1.0 / (ts * ts);
    const Eigen::Vector3d beta_monthly = expand * gamma;

    // observed-information covariance, expanded and rescaled the same way
    const Eigen::Matrix3d cov_gamma =
        Eigen::LDLT<Eigen::Matrix3d>(info).solve(Eigen::Matrix3d::Identity());
    const Eigen::Matrix3d cov_monthly = expand * cov_gamma * expand.transpose();

    // annual coordinates: with h = h_dt / dt the monomial coefficients scale
    // as b*_i = b_i dt^i, leaving sigma(z) at matched arguments unchanged
    const Eigen::Vector3d scale(1.0, month_dt, month_dt * month_dt);

    LogisticFit fit;
    fit.params.dt_ref = month_dt;
    fit.params.map = HazardMap::linear;
    for (int i = 0; i < 3; ++i) {
        fit.beta_monthly[static_cast<std::size_t>(i)] = beta_monthly[i];
        fit.params.beta[static_cast<std::size_t>(i)] = beta_monthly[i] * scale[i];
        fit.std_err[static_cast<std::size_t>(i)] =
            std::sqrt(std::max(0.0, cov_monthly(i, i))) * scale[i];
    }
    fit.log_likelihood = ll;
    fit.gradient_norm = grad.norm();
    fit.iterations = iters;
    fit.binomial = binomial;
    return fit;
}

// ---- synthetic series --------------------------------------------------------

std::vector<HmObservation> synth_generate(const IntensityParams& params,
                                          const HousingModel& model, int months,
                                          int borrowers, std::uint64_t seed,
                                          int start_year, int start_month) {
    params.validate();
    if (months < 12) throw std::invalid_argument("synth_generate: need >= 12 months");
    if (borrowers < 1) throw std::invalid_argument("synth_generate: need >= 1 borrower");
    if (start_month < 1 || start_month > 12)
        throw std::invalid_argument("synth_generate: start month out of range");

    std::vector<double> grid(static_cast<std::size_t>(months));
    for (int i = 0; i < months; ++i)
        grid[static_cast<std::size_t>(i)] = static_cast<double>(i) * month_dt;
    // stream 0 drives the housing path; streams 1.. draw the monthly counts
    const HousingScenario path = sample_scenario(model, grid, seed, 0);

    std::vector<HmObservation> out(static_cast<std::size_t>(months));
    int mi = start_year * 12 + (start_month - 1);
    for (int i = 0; i < months; ++i, ++mi) {
        const double h = path.values[static_cast<std::size_t>(i)];
        const double z = params.beta[0] + params.beta[1] * h + params.beta[2] * h * h;
        // monthly relocation probability; identical for both hazard maps,
        // which only differ in how the probability maps to an intensity
        const double p = stable_sigmoid(z);
        Rng rng(seed, static_cast<std::uint64_t>(i) + 1);
        int count = 0;
        for (int b = 0; b < borrowers; ++b)
            if (rng.uniform() < p) ++count;

        auto& o = out[static_cast<std::size_t>(i)];
        o.year = mi / 12;
        o.month = mi % 12 + 1;
        // rare negative activity draws clamp to an empty month
        o.h_frac = std::min(1.0, std::max(0.0, h * month_dt));
        o.p_frac = static_cast<double>(count) / static_cast<double>(borrowers);
        o.exposures = static_cast<double>(borrowers);
    }
    return out;
}

// ---- CSV round trip ----------------------------------------------------------

std::vector<HmObservation> load_hm_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("hm csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("hm csv: empty file");
    if (line.size() && line.back() == '\r') line.pop_back();
    bool with_exposures = false;
    if (line == "month,h_frac,p_frac,exposures")
        with_exposures = true;
    else if (line != "month,h_frac,p_frac")
        throw std::invalid_argument(
            "hm csv: expected header month,h_frac,p_frac[,exposures]");

    std::vector<HmObservation> obs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.size() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::stringstream ss(line);
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != (with_exposures ? 4u : 3u))
            throw std::invalid_argument("hm csv: bad field count on line " +
                                        std::to_string(line_no));
        try {
            HmObservation o;
            if (std::sscanf(fields[0].c_str(), "%d-%d", &o.year, &o.month) != 2)
                throw std::invalid_argument("month");
            o.h_frac = std::stod(fields[1]);
            o.p_frac = std::stod(fields[2]);
            if (with_exposures) o.exposures = std::stod(fields[3]);
            obs.push_back(o);
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("hm csv: malformed line " +
                                        std::to_string(line_no));
        }
    }
    if (obs.empty()) throw std::invalid_argument("hm csv: no data rows");
    validate_observations(obs);
    return obs;
}

void save_hm_csv(const std::vector<HmObservation>& obs, const std::string& path) {
    validate_observations(obs);
    bool with_exposures = !obs.empty();
    for (const auto& o : obs) with_exposures = with_exposures && o.exposures > 0.0;
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("hm csv: cannot write " + path);
    out << (with_exposures ? "month,h_frac,p_frac,exposures" : "month,h_frac,p_frac")
        << "\n";
    char buf[160];
    for (const auto& o : obs) {
        if (with_exposures)
            std::snprintf(buf, sizeof buf, "%04d-%02d,%.17g,%.17g,%.17g", o.year,
                          o.month, o.h_frac, o.p_frac, o.exposures);
        else
            std::snprintf(buf, sizeof buf, "%04d-%02d,%.17g,%.17g", o.year, o.month,
                          o.h_frac, o.p_frac);
        out << buf << "\n";
    }
}

} // namespace epor
