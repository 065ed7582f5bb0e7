#pragma once

#include <Eigen/Dense>
#include <utility>

namespace ecc {

// Standard normal density, CDF, and inverse CDF (Wichura AS241, double
// precision). normal_ppf throws DegenerateConditioningError outside (0,1).
double normal_pdf(double z);
double normal_cdf(double z);
double normal_ppf(double p);

/// First two moments of N(mu, sigma^2) truncated to [lo, hi] (either bound
/// may be infinite). Uses the closed hazard-ratio forms; requires positive
/// mass on the interval.
struct TruncatedMoments {
    double mean;
    double var;
    double mass; // P(lo <= Z <= hi) under the untruncated law
};
TruncatedMoments truncated_normal_moments(double mu, double sigma, double lo, double hi);

/// Fixed-order Gauss-Legendre moments of N(mu, sigma^2) on a finite interval;
/// an independent route used to cross-check the closed forms.
TruncatedMoments truncated_normal_moments_quadrature(double mu, double sigma, double lo, double hi,
                                                     int points = 96);

/// Maximum-likelihood fit of a normal truncated to the known interval
/// [lo, hi], from observations inside it. Quasi-Newton (BFGS) on
/// (mu, log sigma), initialized at the subsample moments; converged when the
/// gradient norm drops below 1e-8, failing after 500 iterations.
///
/// Identifiability warning: data restricted to a narrow interior interval
/// carries almost no curvature information, so (mu, sigma) sit on a likelihood
/// ridge there; fits are only trustworthy for events retaining a tail.
struct TruncatedNormalFit {
    double mu;
    double sigma;
    int iterations;
    double grad_norm;
};
TruncatedNormalFit fit_truncated_normal(const Eigen::VectorXd& z, double lo, double hi,
                                        double grad_tol = 1e-8, int max_iter = 500);

} // namespace ecc
