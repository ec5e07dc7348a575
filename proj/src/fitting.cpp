#include "qdtwin/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "qdtwin/error.hpp"

namespace qdtwin {

namespace {

// Parameter layouts.
//   mono: A, t1_fast, B
//   bi:   A, slow_fraction, t1_fast, t1_slow, B
constexpr int kMonoParams = 3;
constexpr int kBiParams = 5;

std::vector<std::string> decay_names(DecayModel m)
{
    if (m == DecayModel::mono) {
        return {"amplitude", "t1_fast", "baseline"};
    }
    return {"amplitude", "slow_fraction", "t1_fast", "t1_slow", "baseline"};
}

struct DecaySelection {
    std::vector<double> t;
    Eigen::VectorXd y;
};

DecaySelection select_bins(const DecayHistogram& hist, const DecayFitOptions& options)
{
    DecaySelection s;
    std::vector<double> y;
    const double stop = options.t_stop_ps.value_or(std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double c = hist.bin_center(i);
        if (c >= options.t_start_ps && c < stop) {
            s.t.push_back(c - options.t_start_ps);
            y.push_back(hist.counts[i]);
        }
    }
    s.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    return s;
}

}  // namespace

double DecayFitResult::error_of(const std::string& name) const
{
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) {
            return std::sqrt(covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
        }
    }
    throw DomainError("DecayFitResult: unknown parameter " + name);
}

double decay_model(double t, const Eigen::VectorXd& p, DecayModel model)
{
    if (model == DecayModel::mono) {
        return p[0] * std::exp(-t / p[1]) + p[2];
    }
    return p[0] * ((1.0 - p[1]) * std::exp(-t / p[2]) + p[1] * std::exp(-t / p[3])) + p[4];
}

LmProblem make_decay_problem(const DecayHistogram& hist, const DecayFitOptions& options)
{
    DecaySelection sel = select_bins(hist, options);
    LmProblem problem;
    problem.loss = options.method == FitMethod::poisson_mle ? Loss::poisson : Loss::least_squares;
    problem.y = sel.y;
    if (options.method == FitMethod::least_squares) {
        problem.weights = sel.y.cwiseMax(1.0).cwiseInverse();
    }
    const DecayModel model = options.model;
    problem.model = [t = std::move(sel.t), model](const Eigen::VectorXd& p, Eigen::VectorXd& mu,
                                                  Eigen::MatrixXd* jac) {
        const auto n = static_cast<Eigen::Index>(t.size());
        mu.resize(n);
        if (jac) {
            jac->resize(n, p.size());
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ti = t[static_cast<std::size_t>(i)];
            if (model == DecayModel::mono) {
                const double e = std::exp(-ti / p[1]);
                mu[i] = p[0] * e + p[2];
                if (jac) {
                    (*jac)(i, 0) = e;
                    (*jac)(i, 1) = p[0] * e * ti / (p[1] * p[1]);
                    (*jac)(i, 2) = 1.0;
                }
            } else {
                const double ef = std::exp(-ti / p[2]);
                const double es = std::exp(-ti / p[3]);
                mu[i] = p[0] * ((1.0 - p[1]) * ef + p[1] * es) + p[4];
                if (jac) {
                    (*jac)(i, 0) = (1.0 - p[1]) * ef + p[1] * es;
                    (*jac)(i, 1) = p[0] * (es - ef);
                    (*jac)(i, 2) = p[0] * (1.0 - p[1]) * ef * ti / (p[2] * p[2]);
                    (*jac)(i, 3) = p[0] * p[1] * es * ti / (p[3] * p[3]);
                    (*jac)(i, 4) = 1.0;
                }
            }
        }
    };
    problem.feasible = [model](const Eigen::VectorXd& p) {
        if (model == DecayModel::mono) {
            return p[0] > 0.0 && p[1] > 0.0;
        }
        return p[0] > 0.0 && p[1] < 1.0 && p[2] > 0.0 && p[3] > p[2];
    };
    // Baseline and slow fraction are non-negative.
    constexpr double kFree = -std::numeric_limits<double>::infinity();
    if (model == DecayModel::mono) {
        problem.lower = Eigen::Vector3d(kFree, kFree, 0.0);
    } else {
        problem.lower.resize(kBiParams);
        problem.lower << kFree, 0.0, kFree, kFree, 0.0;
    }
    return problem;
}

namespace {

Eigen::VectorXd decay_initial_guess(const Eigen::VectorXd& y, double bin_width, DecayModel model)
{
    const Eigen::Index n = y.size();
    const Eigen::Index tail = std::max<Eigen::Index>(1, n / 10);
    const double baseline = std::max(0.0, y.tail(tail).mean());
    const double peak = std::max(y[0] - baseline, 1.0);
    double area = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        area += std::max(y[i] - baseline, 0.0);
    }
    const double tau = std::clamp(area * bin_width / peak, bin_width, bin_width * static_cast<double>(n));
    if (model == DecayModel::mono) {
        Eigen::VectorXd p(kMonoParams);
        p << peak, tau, baseline;
        return p;
    }
    Eigen::VectorXd p(kBiParams);
    p << peak, 0.1, 0.7 * tau, 5.0 * tau, baseline;
    return p;
}

std::string describe(const LmResult& r, const std::vector<std::string>& names)
{
    std::ostringstream os;
    os << "iterations=" << r.iterations << " deviance=" << r.deviance << " stop=\"" << r.stop_reason << "\"";
    for (std::size_t i = 0; i < names.size() && static_cast<Eigen::Index>(i) < r.params.size(); ++i) {
        os << ' ' << names[i] << '=' << r.params[static_cast<Eigen::Index>(i)];
    }
    return os.str();
}

Eigen::MatrixXd invert_information(const Eigen::MatrixXd& info)
{
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(info);
    Eigen::MatrixXd cov = cod.pseudoInverse();
    return 0.5 * (cov + cov.transpose());
}

}  // namespace

DecayFitResult fit_decay(const DecayHistogram& hist, const DecayFitOptions& options)
{
    if (hist.bin_width_ps <= 0) {
        throw DomainError("fit_decay: bin width must be > 0");
    }
    LmProblem problem = make_decay_problem(hist, options);
    const Eigen::VectorXd& y = problem.y;
    const int n_params = options.model == DecayModel::mono ? kMonoParams : kBiParams;
    const int min_bins = options.model == DecayModel::mono ? 3 : 5;
    if (y.size() < n_params + 1) {
        throw DataError("fit_decay: too few bins in the fit range");
    }
    const Eigen::Index tail = std::max<Eigen::Index>(1, y.size() / 10);
    const double floor = y.tail(tail).mean();
    const double spread = std::sqrt(std::max(floor, 1.0));
    const auto above = (y.array() > floor + 3.0 * spread).count();
    if (above < min_bins) {
        throw DataError("fit_decay: need at least " + std::to_string(min_bins) +
                        " bins above the baseline in the fit range");
    }

    const Eigen::VectorXd p0 = decay_initial_guess(y, static_cast<double>(hist.bin_width_ps), options.model);
    const LmResult lm = levenberg_marquardt(problem, p0, options.lm);
    const auto names = decay_names(options.model);
    if (!lm.converged) {
        throw FitError("fit_decay: no convergence", describe(lm, names));
    }

    DecayFitResult r;
    r.model = options.model;
    r.names = names;
    r.params = lm.params;
    r.deviance = lm.deviance;
    r.iterations = lm.iterations;
    r.converged = lm.converged;
    r.bins_used = static_cast<std::size_t>(y.size());
    r.reduced_deviance = lm.deviance / static_cast<double>(y.size() - n_params);

    Eigen::MatrixXd info;
    if (options.method == FitMethod::poisson_mle) {
        // Observed information of the log-likelihood is half the deviance Hessian.
        info = 0.5 * deviance_hessian(problem, lm.params);
    } else {
        Eigen::VectorXd mu;
        Eigen::MatrixXd jac;
        problem.model(lm.params, mu, &jac);
        info = jac.transpose() * problem.weights.asDiagonal() * jac;
    }
    // Parameters resting on their bound carry no variance.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < lm.params.size(); ++i) {
        if (!(lm.params[i] <= problem.lower[i])) {
            free.push_back(i);
        }
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd sub(nf, nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
        for (Eigen::Index j = 0; j < nf; ++j) {
            sub(i, j) = info(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]);
        }
    }
    const Eigen::MatrixXd sub_cov = invert_information(sub);
    r.covariance = Eigen::MatrixXd::Zero(lm.params.size(), lm.params.size());
    for (Eigen::Index i = 0; i < nf; ++i) {
        for (Eigen::Index j = 0; j < nf; ++j) {
            r.covariance(free[static_cast<std::size_t>(i)], free[static_cast<std::size_t>(j)]) = sub_cov(i, j);
        }
    }

    const Eigen::VectorXd& p = lm.params;
    if (options.model == DecayModel::mono) {
        r.amplitude = p[0];
        r.t1_fast = p[1];
        r.baseline = p[2];
    } else {
        r.amplitude = p[0];
        r.slow_fraction = p[1];
        r.t1_fast = p[2];
        r.t1_slow = p[3];
        r.baseline = p[4];
        const double sf_err = std::sqrt(std::max(r.covariance(1, 1), 0.0));
        r.effectively_mono = r.slow_fraction < 1e-3 || r.slow_fraction < sf_err;
    }
    return r;
}

void Spectrum::validate() const
{
    if (wavelength_nm.size() != intensity.size()) {
        throw DataError("spectrum: wavelength and intensity lengths differ");
    }
    for (std::size_t i = 1; i < wavelength_nm.size(); ++i) {
        if (!(wavelength_nm[i] > wavelength_nm[i - 1])) {
            throw DataError("spectrum: wavelengths must be strictly ascending");
        }
    }
}

Spectrum Spectrum::window(double lo_nm, double hi_nm) const
{
    Spectrum out;
    for (std::size_t i = 0; i < wavelength_nm.size(); ++i) {
        if (wavelength_nm[i] >= lo_nm && wavelength_nm[i] <= hi_nm) {
            out.wavelength_nm.push_back(wavelength_nm[i]);
            out.intensity.push_back(intensity[i]);
        }
    }
    return out;
}

Eigen::VectorXd FanoParams::vector() const
{
    Eigen::VectorXd v(5);
    v << lambda_m, w_m, q, amplitude, background;
    return v;
}

FanoParams FanoParams::from_vector(const Eigen::VectorXd& v)
{
    return {v[0], v[1], v[2], v[3], v[4]};
}

double fano_model(double lambda_nm, const FanoParams& p)
{
    const double e = 2.0 * (lambda_nm - p.lambda_m) / p.w_m;
    return p.amplitude * (p.q + e) * (p.q + e) / (1.0 + e * e) + p.background;
}

LmProblem make_fano_problem(const Spectrum& spec)
{
    LmProblem problem;
    problem.loss = Loss::least_squares;
    problem.y = Eigen::Map<const Eigen::VectorXd>(spec.intensity.data(),
                                                  static_cast<Eigen::Index>(spec.intensity.size()));
    problem.model = [x = spec.wavelength_nm](const Eigen::VectorXd& p, Eigen::VectorXd& mu, Eigen::MatrixXd* jac) {
        const auto n = static_cast<Eigen::Index>(x.size());
        mu.resize(n);
        if (jac) {
            jac->resize(n, 5);
        }
        const double lm = p[0];
        const double w = p[1];
        const double q = p[2];
        const double a = p[3];
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = 2.0 * (x[static_cast<std::size_t>(i)] - lm) / w;
            const double den = 1.0 + e * e;
            const double f = (q + e) * (q + e) / den;
            mu[i] = a * f + p[4];
            if (jac) {
                const double df_de = 2.0 * (q + e) * (1.0 - q * e) / (den * den);
                (*jac)(i, 0) = a * df_de * (-2.0 / w);
                (*jac)(i, 1) = a * df_de * (-e / w);
                (*jac)(i, 2) = a * 2.0 * (q + e) / den;
                (*jac)(i, 3) = f;
                (*jac)(i, 4) = 1.0;
            }
        }
    };
    problem.feasible = [](const Eigen::VectorXd& p) { return p[1] > 0.0; };
    return problem;
}

namespace {

// Same lineshape written as P (1 + s e)^2 / (1 + e^2) + B with s = 1/q and
// P = A q^2. Well conditioned near the Lorentzian limit q -> inf (s -> 0),
// where the direct form drifts along q without converging.
LmProblem make_fano_problem_inverse_q(const Spectrum& spec)
{
    LmProblem problem;
    problem.loss = Loss::least_squares;
    problem.y = Eigen::Map<const Eigen::VectorXd>(spec.intensity.data(),
                                                  static_cast<Eigen::Index>(spec.intensity.size()));
    problem.model = [x = spec.wavelength_nm](const Eigen::VectorXd& p, Eigen::VectorXd& mu, Eigen::MatrixXd* jac) {
        const auto n = static_cast<Eigen::Index>(x.size());
        mu.resize(n);
        if (jac) {
            jac->resize(n, 5);
        }
        const double w = p[1];
        const double s = p[2];
        const double a = p[3];
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = 2.0 * (x[static_cast<std::size_t>(i)] - p[0]) / w;
            const double den = 1.0 + e * e;
            const double f = (1.0 + s * e) * (1.0 + s * e) / den;
            mu[i] = a * f + p[4];
            if (jac) {
                const double df_de = 2.0 * (1.0 + s * e) * (s - e) / (den * den);
                (*jac)(i, 0) = a * df_de * (-2.0 / w);
                (*jac)(i, 1) = a * df_de * (-e / w);
                (*jac)(i, 2) = a * 2.0 * (1.0 + s * e) * e / den;
                (*jac)(i, 3) = f;
                (*jac)(i, 4) = 1.0;
            }
        }
    };
    problem.feasible = [](const Eigen::VectorXd& p) { return p[1] > 0.0; };
    return problem;
}

}  // namespace

FanoParams fano_initial_guess(const Spectrum& spec)
{
    spec.validate();
    const auto& x = spec.wavelength_nm;
    const auto& y = spec.intensity;
    const std::size_t n = y.size();
    if (n < 6) {
        throw DataError("fit_fano: spectrum needs at least 6 points");
    }
    const std::size_t edge = std::max<std::size_t>(1, n / 20);
    double base = 0.0;
    for (std::size_t i = 0; i < edge; ++i) {
        base += y[i] + y[n - 1 - i];
    }
    base /= static_cast<double>(2 * edge);

    const std::size_t imin = static_cast<std::size_t>(std::min_element(y.begin(), y.end()) - y.begin());
    const double depth = base - y[imin];
    const double scale = std::max({std::abs(base), std::abs(y[imin]), 1e-300});
    if (!(depth > 1e-9 * scale)) {
        throw FitError("fit_fano: degenerate spectrum without a dip", "depth=" + std::to_string(depth));
    }

    const double half = y[imin] + 0.5 * depth;
    std::size_t left = imin;
    while (left > 0 && y[left] < half) {
        --left;
    }
    std::size_t right = imin;
    while (right + 1 < n && y[right] < half) {
        ++right;
    }
    const double fwhm = std::max(x[right] - x[left], x[std::min(imin + 1, n - 1)] - x[imin > 0 ? imin - 1 : 0]);

    const double over_left = *std::max_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(imin + 1)) - base;
    const double over_right = *std::max_element(y.begin() + static_cast<std::ptrdiff_t>(imin), y.end()) - base;
    double q = 0.0;
    if (std::max(over_left, over_right) > 0.1 * depth) {
        q = over_left > over_right ? -0.5 : 0.5;
    }
    return {x[imin], fwhm, q, depth, y[imin]};
}

FanoFitResult fit_fano(const Spectrum& spec, std::optional<FanoParams> init, const LmOptions& options)
{
    spec.validate();
    if (spec.intensity.size() < 6) {
        throw DataError("fit_fano: spectrum needs at least 6 points");
    }
    const auto [lo, hi] = std::minmax_element(spec.intensity.begin(), spec.intensity.end());
    if (!(*hi - *lo > 1e-12 * std::max(std::abs(*hi), 1e-300))) {
        throw FitError("fit_fano: flat spectrum", "all intensities equal");
    }
    const LmProblem problem = make_fano_problem(spec);

    std::vector<FanoParams> starts;
    if (init) {
        starts.push_back(*init);
    } else {
        const FanoParams guess = fano_initial_guess(spec);
        starts.push_back(guess);
        for (double q : {-1.0, 1.0}) {
            FanoParams s = guess;
            s.q = q;
            // Keep the far-field level A + B and the minimum B of the guess.
            starts.push_back(s);
        }
    }

    const LmProblem inverse = make_fano_problem_inverse_q(spec);
    std::optional<LmResult> best;
    bool best_inverse = false;
    std::optional<LmResult> first;
    auto keep = [&](LmResult r, bool inv) {
        if (r.converged && (!best || r.deviance < best->deviance)) {
            best = std::move(r);
            best_inverse = inv;
        }
    };
    for (const FanoParams& s : starts) {
        LmResult r = levenberg_marquardt(problem, s.vector(), options);
        if (!first) {
            first = r;
        }
        // Retry large-|q| ends in the inverse form.
        if (std::abs(r.params[2]) >= 1.0 && std::isfinite(r.deviance)) {
            Eigen::VectorXd v = r.params;
            v[3] = r.params[3] * r.params[2] * r.params[2];
            v[2] = 1.0 / r.params[2];
            keep(levenberg_marquardt(inverse, v, options), true);
        }
        keep(std::move(r), false);
    }
    if (!best) {
        throw FitError("fit_fano: no convergence", describe(*first, {"lambda_m", "w_m", "q", "amplitude", "background"}));
    }

    FanoFitResult res;
    res.chi2 = best->deviance;
    res.iterations = best->iterations;
    res.converged = true;
    const double dof = static_cast<double>(spec.intensity.size()) - 5.0;
    res.reduced_chi2 = res.chi2 / dof;
    Eigen::VectorXd mu;
    Eigen::MatrixXd jac;
    (best_inverse ? inverse : problem).model(best->params, mu, &jac);
    Eigen::MatrixXd cov = res.reduced_chi2 * invert_information(jac.transpose() * jac);
    if (best_inverse) {
        const double s = best->params[2];
        const double a = best->params[3];
        Eigen::VectorXd direct = best->params;
        direct[2] = 1.0 / s;
        direct[3] = a * s * s;
        Eigen::MatrixXd d = Eigen::MatrixXd::Identity(5, 5);
        d(2, 2) = -1.0 / (s * s);
        d(3, 2) = 2.0 * a * s;
        d(3, 3) = s * s;
        cov = d * cov * d.transpose();
        res.params = FanoParams::from_vector(direct);
    } else {
        res.params = FanoParams::from_vector(best->params);
    }
    res.covariance = 0.5 * (cov + cov.transpose());
    return res;
}

Measured q_factor(double lambda_m, double w_m, const Eigen::Matrix2d& covariance)
{
    if (!(w_m > 0.0)) {
        throw DomainError("q_factor: w_m must be > 0 (unbounded Q)");
    }
    const double q = lambda_m / w_m;
    if (!std::isfinite(q)) {
        throw DomainError("q_factor: unbounded Q");
    }
    const double var = q * q *
                       (covariance(0, 0) / (lambda_m * lambda_m) + covariance(1, 1) / (w_m * w_m) -
                        2.0 * covariance(0, 1) / (lambda_m * w_m));
    return {q, std::sqrt(std::max(var, 0.0))};
}

Measured purcell_factor(Measured t1_ref, Measured t1)
{
    if (!(t1_ref.value > 0.0) || !(t1.value > 0.0)) {
        throw DomainError("purcell_factor: lifetimes must be > 0");
    }
    const double fp = t1_ref.value / t1.value;
    return {fp, fp * std::hypot(t1_ref.err / t1_ref.value, t1.err / t1.value)};
}

}  // namespace qdtwin
