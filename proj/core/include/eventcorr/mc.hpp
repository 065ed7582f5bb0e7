#pragma once

#include "eventcorr/estimators.hpp"
#include "eventcorr/synth.hpp"

namespace ecc {

/// Small-sample error study across sample sizes. Two tasks:
///   ecc_curve: estimate the decile conditional-correlation curve on each
///     replicate; errors are measured against the per-band truth.
///   implied_unconditional: each decile band of a replicate becomes an
///     event-restricted sample from which the unconditional correlation is
///     recovered; errors are measured against the generator's rho_xy.
/// The "proposed" method is the corrected estimator; "subsample" is the naive
/// within-rows correlation.
struct StudySpec {
    enum class Task { ecc_curve, implied_unconditional };

    GenSpec::Family family = GenSpec::Family::gaussian_scale;
    double rho_xy = 0.0;
    double rho_xz = 0.0;
    double rho_yz = 0.0;
    double eta = 1.0;
    std::vector<Eigen::Index> sample_sizes;
    int replications = 200;
    Task task = Task::ecc_curve;
    bool run_proposed = true;
    bool run_subsample = true;
    MomentStrategy strategy = MomentStrategy::empirical;
    MomentSource::Kind implied_source = MomentSource::Kind::asserted;
    double band_width = 0.1;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    Eigen::Index oracle_draws = 10000000;
};

struct StudyCell {
    EstimateMethod method;
    Eigen::Index n;
    double rmse;
    int successes;
    int failures;
};

struct StudyResult {
    std::vector<StudyCell> cells; // ordered by sample size, proposed before subsample
    std::vector<double> oracle_values;
    double max_oracle_se;
    int failed_cells;
    int total_cells;
};

/// Runs the study. Replicates execute in parallel with engines derived from
/// (seed, replicate task); aggregation order is fixed, so the result does not
/// depend on the thread count. Throws when more than 5% of cells fail.
StudyResult run_study(const StudySpec& spec);

/// Least-squares slope of log(rmse) against log(n) for one method's cells.
double loglog_slope(const StudyResult& result, EstimateMethod method);

/// True covariate variance of a generator family (the value an asserting
/// caller should supply).
double family_z_variance(GenSpec::Family family, double eta);

} // namespace ecc
