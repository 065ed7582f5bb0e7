#pragma once

#include "eventcorr/estimators.hpp"
#include "eventcorr/inference.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ecc {

/// Cross-sectional panel: one residual series per column, with conditioning
/// covariates alongside. Row t is one date.
struct Panel {
    Eigen::MatrixXd residuals;                // n x p
    std::vector<std::string> names;           // one per residual column
    Eigen::MatrixXd covariates;               // n x q
    std::vector<std::string> covariate_names; // one per covariate column
    std::vector<std::string> dates;           // empty, or one label per row

    Eigen::Index n() const { return residuals.rows(); }
    Eigen::Index p() const { return residuals.cols(); }
    Eigen::Index q() const { return covariates.cols(); }

    /// Rows consistent, no NaNs, p >= 3, q >= 1, names sized to columns.
    void validate() const;
};

/// Copy keeping only the masked rows.
Panel select_rows(const Panel& panel, const std::vector<bool>& mask);

enum class Regime { stable, crisis, counterfactual };
const char* to_string(Regime regime);

/// Partial-correlation network plus the conditioning repairs that were needed
/// to reach it. weights is symmetric with zero diagonal, entries in [-1, 1].
struct Network {
    Eigen::MatrixXd weights;
    Regime regime = Regime::stable;
    double clip_magnitude = 0.0; // spectral norm of the PSD eigenvalue clip
    double ridge = 0.0;          // diagonal ridge needed to invert, 0 if none
    int fallback_entries = 0;    // pairwise map failures replaced by raw values
};

struct CentralityStats {
    Eigen::VectorXd scores; // nonnegative under absolute weighting
    double mean = 0.0;
    double sd = 0.0; // 1/(p-1) normalization
};

enum class CentralityNorm { one, two };
enum class CentralityWeighting { absolute, signed_spectral };

/// Percentile summary of row-resampled centrality statistics. Draws are in
/// replicate order; failed rebuilds are dropped (and counted).
struct CentralityBootstrap {
    std::vector<double> mean_draws;
    std::vector<double> sd_draws;
    CI mean_ci;
    CI sd_ci;
    int failures = 0;
};

/// Partition by the designated covariate's empirical quantile: rows at or
/// above the threshold are crisis, the rest stable. Throws on an empty side
/// unless allow_empty.
std::pair<std::vector<bool>, std::vector<bool>> split_regimes(const Panel& panel,
                                                              Eigen::Index covariate_col = 0,
                                                              double quantile = 0.75,
                                                              bool allow_empty = false);

/// Ordinary correlation matrix of the residual columns over the masked rows.
Eigen::MatrixXd regime_correlation_matrix(const Panel& panel, const std::vector<bool>& rows);

/// Unconditional correlation matrix implied by a regime-restricted panel: the
/// pairwise inverse map with the full covariate block, applied entrywise,
/// then symmetrized and eigenvalue-clipped back to a correlation matrix.
/// Entries whose pairwise map fails fall back to the regime correlation;
/// more than 5% such entries fails the whole matrix.
Eigen::MatrixXd corrected_correlation_matrix(const Panel& panel, const std::vector<bool>& rows,
                                             const MomentSource& source,
                                             double* clip_magnitude = nullptr,
                                             int* fallback_entries = nullptr);

/// Precision-matrix transform: weights(i,j) = -P(i,j)/sqrt(P(i,i) P(j,j)).
/// A non-invertible input is retried with an escalating diagonal ridge
/// (1e-8 .. 1e-4 times the mean diagonal), recorded on the result.
Network partial_correlation_network(const Eigen::MatrixXd& correlation,
                                    Regime regime = Regime::stable);

/// Network of one regime: conditional correlations over the masked rows,
/// repaired if needed, then the precision transform.
Network regime_network(const Panel& panel, const std::vector<bool>& rows, Regime label);

/// Network the corrected (unconditional-implied) matrix induces.
Network corrected_network(const Panel& panel, const std::vector<bool>& rows,
                          const MomentSource& source, Regime label);

/// Covariate variance the counterfactual targets:
/// var(w|stable) + delta_scale * (var(w|crisis) - var(w|stable)).
double counterfactual_target_variance(const Panel& panel, const std::vector<bool>& stable_rows,
                                      const std::vector<bool>& crisis_rows,
                                      Eigen::Index covariate_col, double delta_scale);

/// Moves every pairwise stable-conditional correlation to the hypothetical
/// covariate variance level and builds the network that would hold there.
/// Pairwise failures fall back to the stable-conditional value, as in
/// corrected_correlation_matrix.
Network counterfactual_network(const Panel& panel, const std::vector<bool>& stable_rows,
                               Eigen::Index covariate_col, double target_variance);

/// counterfactual_network at the delta_scale parameterization of the target.
Network counterfactual_network(const Panel& panel, const std::vector<bool>& stable_rows,
                               const std::vector<bool>& crisis_rows, Eigen::Index covariate_col,
                               double delta_scale);

/// Leading eigenvector of the weight matrix (absolute values by default) by
/// power iteration from the uniform vector, tolerance 1e-10, at most 10^4
/// iterations. A zero matrix yields the uniform vector.
CentralityStats eigenvector_centrality(const Network& network,
                                       CentralityNorm norm = CentralityNorm::two,
                                       CentralityWeighting weighting = CentralityWeighting::absolute);

/// Resamples rows (with replacement, within the masked set), rebuilds the
/// network with `build`, and collects centrality mean/sd draws with
/// percentile intervals. Replicates use engines derived from (seed,
/// replicate); results do not depend on the thread count. Rebuild failures
/// are tolerated up to 10% of B.
CentralityBootstrap bootstrap_centrality(const Panel& panel, const std::vector<bool>& rows,
                                         const std::function<Network(const Panel&)>& build, int B,
                                         double level, std::uint64_t seed, unsigned threads = 0);

/// bootstrap_centrality for a plain regime network.
CentralityBootstrap bootstrap_centrality(const Panel& panel, const std::vector<bool>& rows,
                                         Regime label, int B, double level, std::uint64_t seed,
                                         unsigned threads = 0);

/// Synthetic one-factor panel: x_i = b_i f + sqrt(1 - b_i^2) e_i with
/// loadings b_i evenly spaced on [0.35, 0.8] and the factor f as the sole
/// covariate. Regimes split on f differ only through its conditional
/// variance. With contagion, rows in the upper covariate quantile get an
/// extra shared shock (x -> 0.55 x + 0.85 g), changing the loadings there.
struct PanelSpec {
    Eigen::Index n = 16000;
    Eigen::Index p = 8;
    double crisis_quantile = 0.75;
    bool contagion = false;
    std::uint64_t seed = 1;
};

Panel one_factor_panel(const PanelSpec& spec);

} // namespace ecc
