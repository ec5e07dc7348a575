#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace qdtwin {

enum class Loss { least_squares, poisson };

/// Model fit problem: minimise the deviance between `y` and mu(p).
///
///   least_squares  D = sum w_i (y_i - mu_i)^2
///   poisson        D = 2 sum [mu_i - y_i + y_i ln(y_i / mu_i)]
struct LmProblem {
    Loss loss = Loss::least_squares;
    Eigen::VectorXd y;
    /// Least-squares weights; empty means unit weights.
    Eigen::VectorXd weights;
    /// Evaluates mu at `p` and, when `jac` is non-null, d mu / d p.
    std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& mu, Eigen::MatrixXd* jac)> model;
    /// Optional parameter-space constraint; infeasible trial steps are rejected.
    std::function<bool(const Eigen::VectorXd& p)> feasible;
    /// Optional lower bounds (-inf for none). Trial steps are projected onto
    /// them, and a parameter resting on its bound with the gradient pointing
    /// outwards is held fixed for that iteration.
    Eigen::VectorXd lower;
};

struct LmOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-8;
    double initial_lambda = 1e-3;
};

struct LmResult {
    Eigen::VectorXd params;
    double deviance = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
};

/// Deviance at `p`; +inf when p is infeasible or a Poisson mean is <= 0.
double deviance(const LmProblem& problem, const Eigen::VectorXd& p);

/// Analytic gradient of the deviance.
Eigen::VectorXd deviance_gradient(const LmProblem& problem, const Eigen::VectorXd& p);

/// Hessian of the deviance by central differences of the analytic gradient.
Eigen::MatrixXd deviance_hessian(const LmProblem& problem, const Eigen::VectorXd& p);

/// Levenberg-Marquardt with Marquardt diagonal scaling. Gauss-Newton
/// curvature for least squares, Fisher scoring for Poisson. Accepted steps
/// always lower the deviance. Converged when the largest relative parameter
/// step falls below `step_tolerance`, or when no step can lower the deviance
/// any further.
///
/// Poisson bins with zero counts admit a zero mean.
LmResult levenberg_marquardt(const LmProblem& problem, Eigen::VectorXd p0, const LmOptions& options = {});

}  // namespace qdtwin
