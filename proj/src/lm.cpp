#include "qdtwin/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace qdtwin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_feasible(const LmProblem& problem, const Eigen::VectorXd& p)
{
    return p.allFinite() && (!problem.feasible || problem.feasible(p));
}

double deviance_of(const LmProblem& problem, const Eigen::VectorXd& mu)
{
    double d = 0.0;
    if (problem.loss == Loss::least_squares) {
        for (Eigen::Index i = 0; i < mu.size(); ++i) {
            const double r = problem.y[i] - mu[i];
            d += (problem.weights.size() ? problem.weights[i] : 1.0) * r * r;
        }
        return std::isfinite(d) ? d : kInf;
    }
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        const double m = mu[i];
        const double y = problem.y[i];
        if (!(m > 0.0) && !(m == 0.0 && y == 0.0)) {
            return kInf;
        }
        d += m - y + (y > 0.0 ? y * std::log(y / m) : 0.0);
    }
    return std::isfinite(d) ? 2.0 * d : kInf;
}

// Gradient and approximate curvature of the deviance from mu and J.
void gradient_and_curvature(const LmProblem& problem, const Eigen::VectorXd& mu, const Eigen::MatrixXd& jac,
                            Eigen::VectorXd& g, Eigen::MatrixXd& h)
{
    const Eigen::Index n = mu.size();
    Eigen::VectorXd r(n);
    Eigen::VectorXd w(n);
    if (problem.loss == Loss::least_squares) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double wi = problem.weights.size() ? problem.weights[i] : 1.0;
            r[i] = -2.0 * wi * (problem.y[i] - mu[i]);
            w[i] = 2.0 * wi;
        }
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            r[i] = problem.y[i] > 0.0 ? 2.0 * (1.0 - problem.y[i] / mu[i]) : 2.0;
            w[i] = 2.0 / std::max(mu[i], 1e-12);
        }
    }
    g = jac.transpose() * r;
    h = jac.transpose() * w.asDiagonal() * jac;
}

}  // namespace

double deviance(const LmProblem& problem, const Eigen::VectorXd& p)
{
    if (!is_feasible(problem, p)) {
        return kInf;
    }
    Eigen::VectorXd mu;
    problem.model(p, mu, nullptr);
    return deviance_of(problem, mu);
}

Eigen::VectorXd deviance_gradient(const LmProblem& problem, const Eigen::VectorXd& p)
{
    Eigen::VectorXd mu;
    Eigen::MatrixXd jac;
    problem.model(p, mu, &jac);
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    gradient_and_curvature(problem, mu, jac, g, h);
    return g;
}

Eigen::MatrixXd deviance_hessian(const LmProblem& problem, const Eigen::VectorXd& p)
{
    const Eigen::Index k = p.size();
    Eigen::MatrixXd h(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double step = 1e-5 * std::max(std::abs(p[j]), 1e-6);
        Eigen::VectorXd up = p;
        Eigen::VectorXd down = p;
        up[j] += step;
        down[j] -= step;
        h.col(j) = (deviance_gradient(problem, up) - deviance_gradient(problem, down)) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

LmResult levenberg_marquardt(const LmProblem& problem, Eigen::VectorXd p0, const LmOptions& options)
{
    LmResult res;
    res.params = std::move(p0);
    if (!is_feasible(problem, res.params)) {
        res.deviance = kInf;
        res.stop_reason = "infeasible starting point";
        return res;
    }

    Eigen::VectorXd mu;
    Eigen::MatrixXd jac;
    problem.model(res.params, mu, &jac);
    res.deviance = deviance_of(problem, mu);
    if (!std::isfinite(res.deviance)) {
        res.stop_reason = "non-finite deviance at starting point";
        return res;
    }

    double lambda = options.initial_lambda;
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    gradient_and_curvature(problem, mu, jac, g, h);

    for (res.iterations = 1; res.iterations <= options.max_iterations; ++res.iterations) {
        const Eigen::VectorXd diag = h.diagonal().cwiseMax(1e-12 * std::max(h.diagonal().maxCoeff(), 1e-300));
        bool accepted = false;
        Eigen::VectorXd step;
        // Parameters pinned on a lower bound by an outward gradient.
        std::vector<Eigen::Index> pinned;
        for (Eigen::Index i = 0; i < problem.lower.size(); ++i) {
            if (res.params[i] <= problem.lower[i] && g[i] > 0.0) {
                pinned.push_back(i);
            }
        }
        while (lambda < 1e20) {
            Eigen::MatrixXd a = h;
            a.diagonal() += lambda * diag;
            Eigen::VectorXd rhs = -g;
            for (Eigen::Index i : pinned) {
                a.row(i).setZero();
                a.col(i).setZero();
                a(i, i) = 1.0;
                rhs[i] = 0.0;
            }
            step = a.ldlt().solve(rhs);
            Eigen::VectorXd trial = res.params + step;
            for (Eigen::Index i = 0; i < problem.lower.size(); ++i) {
                trial[i] = std::max(trial[i], problem.lower[i]);
            }
            step = trial - res.params;
            if (step.allFinite() && is_feasible(problem, trial)) {
                Eigen::VectorXd mu_trial;
                Eigen::MatrixXd jac_trial;
                problem.model(trial, mu_trial, &jac_trial);
                const double d_trial = deviance_of(problem, mu_trial);
                if (d_trial < res.deviance) {
                    res.params = trial;
                    res.deviance = d_trial;
                    mu = std::move(mu_trial);
                    jac = std::move(jac_trial);
                    gradient_and_curvature(problem, mu, jac, g, h);
                    lambda = std::max(lambda * 0.3, 1e-12);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            res.converged = true;
            res.stop_reason = "no step lowers the deviance further";
            break;
        }
        double rel = 0.0;
        for (Eigen::Index i = 0; i < step.size(); ++i) {
            // Small absolute floor so parameters resting near zero can converge.
            rel = std::max(rel, std::abs(step[i]) / (std::abs(res.params[i]) + 1e-6));
        }
        if (rel < options.step_tolerance) {
            res.converged = true;
            res.stop_reason = "relative step below tolerance";
            break;
        }
    }
    if (!res.converged) {
        res.iterations = options.max_iterations;
        res.stop_reason = "iteration limit reached";
    }
    res.gradient = g;
    return res;
}

}  // namespace qdtwin
