#pragma once

#include "eventcorr/errors.hpp"

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace ecc {

/// Column roles over a numeric data matrix. X and Y are scalar; Z1 and Z2 are
/// covariate blocks and are allowed to share columns with each other or with
/// X/Y (the covariate "possibly containing (or equal to) X or Y").
struct Roles {
    Eigen::Index x = -1;
    Eigen::Index y = -1;
    std::vector<Eigen::Index> z1;
    std::vector<Eigen::Index> z2;
};

/// Observation matrix plus role assignment.
///
/// Invariants: n >= 3, roles refer to existing columns, Z1/Z2 non-empty and of
/// equal dimension when both used. Enforced by validate().
struct Sample {
    Eigen::MatrixXd data;             // n x d
    std::vector<std::string> columns; // one name per column; events resolve against these
    Roles roles;

    Eigen::Index n() const { return data.rows(); }
    Eigen::VectorXd x() const { return data.col(roles.x); }
    Eigen::VectorXd y() const { return data.col(roles.y); }
    Eigen::MatrixXd z1() const { return block(roles.z1); }
    Eigen::MatrixXd z2() const { return block(roles.z2); }
    Eigen::MatrixXd block(const std::vector<Eigen::Index>& cols) const {
        Eigen::MatrixXd out(data.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = data.col(cols[j]);
        return out;
    }
    void validate() const;

    /// Columns named "x","y","z" with Z1 = Z2 = {z}: the common case.
    static Sample xyz(Eigen::VectorXd x, Eigen::VectorXd y, Eigen::VectorXd z);
};

/// delta_A(Z_i, Z_j) = cov(Z_i, Z_j | A) - cov(Z_i, Z_j), plus the event mass.
struct DeltaShift {
    Eigen::MatrixXd delta;
    double event_mass = 1.0;
};

/// Least-squares fit of one response on a covariate block (centered data).
struct RegressionFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd residuals;
    bool centered = true;
};

enum class EstimateMethod { full_sample_corrected, subsample, population };

/// Point estimate with optional uncertainty and provenance.
struct EccEstimate {
    double rho = 0.0;
    std::optional<double> se;
    std::optional<std::pair<double, double>> ci;
    Eigen::Index n_total = 0;
    Eigen::Index n_event = 0;
    EstimateMethod method = EstimateMethod::full_sample_corrected;
    bool clamped = false; // raw value fell outside [-1,1] and was clamped
};

/// Scalar-covariate parameter bundle for the population formulas:
/// (rho_xy, rho_xz, rho_yz) correlations and the normalized conditional
/// variance shift delta = var(Z|A)/var(Z) - 1 >= -1.
struct CorrelationParams {
    double rho_xy;
    double rho_xz;
    double rho_yz;
    double delta;
};

/// Moment source for recovering unconditional covariate moments from an
/// event-restricted sample.
struct UnconditionalMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

const char* to_string(EstimateMethod m);

} // namespace ecc
