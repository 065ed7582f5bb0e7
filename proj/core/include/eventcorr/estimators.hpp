#pragma once

#include "eventcorr/events.hpp"
#include "eventcorr/types.hpp"

namespace ecc {

/// How conditional covariate moments are obtained. `empirical` uses the event
/// rows directly and is assumption-free (the default). `gaussian_model` fits a
/// Gaussian to the covariate on the full sample and integrates it over the
/// event region; supported for a scalar covariate with interval events.
enum class MomentStrategy { empirical, gaussian_model };

const char* to_string(MomentStrategy s);

/// Where unconditional covariate moments come from when only an
/// event-restricted sample is available. Either the caller asserts them, or a
/// truncated-normal MLE recovers them from the restricted covariate column
/// (scalar covariate; the event interval in covariate units must be known).
struct MomentSource {
    enum class Kind { asserted, truncated_mle };
    Kind kind = Kind::asserted;
    Eigen::MatrixXd asserted_cov; // q x q over the covariate block
    double mle_lo = 0.0;          // event interval for the MLE route
    double mle_hi = 0.0;

    static MomentSource asserted(Eigen::MatrixXd cov);
    static MomentSource asserted_scalar(double variance);
    static MomentSource truncated_mle(double lo, double hi);
};

/// Copy of the sample keeping only the masked rows (columns and roles kept).
Sample select_rows(const Sample& sample, const std::vector<bool>& mask);

/// Column means and 1/(n-1) covariance, over all rows or a row subset.
Eigen::VectorXd column_mean(const Eigen::MatrixXd& m);
Eigen::VectorXd column_mean(const Eigen::MatrixXd& m, const std::vector<bool>& mask);
Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& m);
Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& m, const std::vector<bool>& mask);

/// Ordinary sample correlation. Throws UndefinedStatisticError on a constant
/// input.
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Least squares of one column on a covariate block, both centered first.
/// Throws SingularDesignError naming the dependent columns when the centered
/// design is rank deficient.
RegressionFit ols_fit(const Sample& sample, Eigen::Index response_col,
                      const std::vector<Eigen::Index>& covariate_cols);
RegressionFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const std::vector<std::string>& names = {});

/// Shift of the covariate covariance under the event:
/// cov(block_i, block_j | A) - cov(block_i, block_j). The event must select at
/// least 3 rows. event_mass is the selected fraction.
DeltaShift delta_shift(const Sample& sample, const EventSpec& event,
                       const std::vector<Eigen::Index>& block_i,
                       const std::vector<Eigen::Index>& block_j,
                       MomentStrategy strategy = MomentStrategy::empirical);

/// Conditional correlation of (X, Y) given the event, from the three
/// unconditional correlations and the normalized covariate variance shift
/// delta = var(Z|A)/var(Z) - 1. At delta = -1 this is the partial correlation
/// of X and Y given Z.
double ecc_population(const CorrelationParams& p);

/// Plug-in estimator of the event conditional correlation: full-sample
/// moments and regression slopes corrected by the event's covariate
/// covariance shift. Out-of-range values are clamped to [-1, 1] and flagged.
EccEstimate ecc_estimate(const Sample& sample, const EventSpec& event,
                         MomentStrategy strategy = MomentStrategy::empirical);

/// Baseline: ordinary sample correlation over the event rows only.
EccEstimate ecc_subsample(const Sample& sample, const EventSpec& event);

/// Recovers the unconditional correlation of (X, Y) from a sample in which
/// every row satisfies the conditioning event. Requires Z1 and Z2 to be the
/// same block. Conditional slopes and residual second moments are invariant
/// to covariate-measurable conditioning, so the unconditional moments are
/// reassembled from them plus the unconditional covariate moments supplied by
/// `source`.
EccEstimate implied_unconditional(const Sample& a_sample, const MomentSource& source);

/// Per-component standardized conditional correlations used by the inverse
/// transform's closed display: rho_cond scaled by
/// [1 + (var_cond/var_uncond - 1)(1 - rho_cond^2)]^{-1/2}. Exposed as a
/// diagnostic; throws DegenerateConditioningError when a bracket is not
/// positive.
Eigen::VectorXd r_vector(const Eigen::VectorXd& rho_cond, const Eigen::VectorXd& var_cond,
                         const Eigen::VectorXd& var_uncond);

/// Moves a conditional correlation from the conditioning event A to another
/// event A'. `conditional` holds the correlations under A (its delta field is
/// ignored); delta_tilde = var(Z|A')/var(Z|A) - 1. A' = whole space gives the
/// unconditional correlation.
double transport(const CorrelationParams& conditional, double delta_tilde);

/// Empirical gaps of the two working assumptions, plus the covariate
/// covariance shift scale that controls the induced bias.
/// a1_gap: |cov(eps_X, eps_Y | A) - cov(eps_X, eps_Y)|.
/// a2_gap: |cov(Z1 beta_X, eps_Y | A) + cov(Z2 beta_Y, eps_X | A)|.
/// bias_bound_scale: Frobenius norm of the covariate covariance shift.
struct AssumptionDiagnostics {
    double a1_gap;
    double a2_gap;
    double bias_bound_scale;
};
AssumptionDiagnostics assumption_diagnostics(const Sample& sample, const EventSpec& event);

/// Difference of full and conditional covariance matrices. The difference has
/// rank at most the covariate dimension, so singular values beyond it vanish;
/// effective_rank counts those above rel_threshold times the largest.
struct CovarianceShiftSummary {
    Eigen::MatrixXd delta; // Sigma - Sigma_A
    Eigen::VectorXd singular_values;
    int effective_rank;
};
CovarianceShiftSummary covariance_shift(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& sigma_a,
                                        double rel_threshold = 0.05);

} // namespace ecc
