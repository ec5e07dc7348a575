#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qdtwin/lm.hpp"
#include "qdtwin/measured.hpp"

namespace qdtwin {

/// Time-binned photon counts; bin i covers [t0 + i*w, t0 + (i+1)*w).
struct DecayHistogram {
    std::int64_t t0_ps = 0;
    std::int64_t bin_width_ps = 1;
    std::vector<double> counts;

    double bin_center(std::size_t i) const
    {
        return static_cast<double>(t0_ps) + (static_cast<double>(i) + 0.5) * static_cast<double>(bin_width_ps);
    }
};

enum class DecayModel { mono, bi };
enum class FitMethod { poisson_mle, least_squares };

struct DecayFitOptions {
    DecayModel model = DecayModel::mono;
    FitMethod method = FitMethod::poisson_mle;
    /// Fit bins whose centres lie in [t_start, t_stop).
    double t_start_ps = 0.0;
    std::optional<double> t_stop_ps;
    LmOptions lm;
};

/// A [(1-sf) exp(-t/t1_fast) + sf exp(-t/t1_slow)] + B, with t measured from t_start.
struct DecayFitResult {
    DecayModel model = DecayModel::mono;
    double amplitude = 0.0;
    double t1_fast = 0.0;
    std::optional<double> t1_slow;
    double slow_fraction = 0.0;
    double baseline = 0.0;
    std::vector<std::string> names;
    Eigen::VectorXd params;
    Eigen::MatrixXd covariance;
    double deviance = 0.0;
    /// Deviance per degree of freedom (reduced chi^2 for least squares).
    double reduced_deviance = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Bi-exponential fit whose slow fraction collapsed to zero.
    bool effectively_mono = false;
    std::size_t bins_used = 0;

    double error_of(const std::string& name) const;
};

double decay_model(double t, const Eigen::VectorXd& p, DecayModel model);

/// Builds the fit problem over the selected bins (exposed for gradient checks).
LmProblem make_decay_problem(const DecayHistogram& hist, const DecayFitOptions& options);

DecayFitResult fit_decay(const DecayHistogram& hist, const DecayFitOptions& options);

/// Strictly ascending wavelengths (nm) with matching intensities.
struct Spectrum {
    std::vector<double> wavelength_nm;
    std::vector<double> intensity;

    void validate() const;
    /// Points with wavelength in [lo, hi].
    Spectrum window(double lo_nm, double hi_nm) const;
};

/// R(lambda) = A (q + e)^2 / (1 + e^2) + B with e = 2 (lambda - lambda_m) / w_m.
struct FanoParams {
    double lambda_m = 0.0;
    double w_m = 1.0;
    double q = 0.0;
    double amplitude = 1.0;
    double background = 0.0;

    Eigen::VectorXd vector() const;
    static FanoParams from_vector(const Eigen::VectorXd& v);
};

struct FanoFitResult {
    FanoParams params;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
    int iterations = 0;
    bool converged = false;

    Measured lambda_m() const { return {params.lambda_m, std::sqrt(covariance(0, 0))}; }
    Measured w_m() const { return {params.w_m, std::sqrt(covariance(1, 1))}; }
    Measured q() const { return {params.q, std::sqrt(covariance(2, 2))}; }
};

double fano_model(double lambda_nm, const FanoParams& p);

LmProblem make_fano_problem(const Spectrum& spec);

/// Starting point: lambda_m at the spectrum minimum, w_m from the dip FWHM,
/// q sign from the side of the dip carrying the larger overshoot.
FanoParams fano_initial_guess(const Spectrum& spec);

/// Least-squares Fano fit. Without `init`, starts from fano_initial_guess
/// and from q = -1, +1, keeping the lowest chi^2.
FanoFitResult fit_fano(const Spectrum& spec, std::optional<FanoParams> init = std::nullopt,
                       const LmOptions& options = {});

/// Q = lambda_m / w_m with first-order error from the (lambda_m, w_m) covariance.
Measured q_factor(double lambda_m, double w_m, const Eigen::Matrix2d& covariance);

/// F_P = t1_ref / t1, relative errors in quadrature.
Measured purcell_factor(Measured t1_ref, Measured t1);

}  // namespace qdtwin
