#include "eventcorr/mc.hpp"

#include "eventcorr/rng.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace ecc {

double family_z_variance(GenSpec::Family family, double eta) {
    switch (family) {
    case GenSpec::Family::gaussian_scale: return eta;
    case GenSpec::Family::student_t:
        if (!(eta > 2.0)) throw DegenerateConditioningError("student-t variance needs eta > 2");
        return eta / (eta - 2.0);
    case GenSpec::Family::gaussian_chisq_mixture: return eta;
    }
    throw DegenerateConditioningError("unknown family");
}

namespace {

struct CellOutcome {
    std::optional<double> proposed_mse; // mean squared error over bands
    std::optional<double> subsample_mse;
};

} // namespace

StudyResult run_study(const StudySpec& spec) {
    if (spec.replications < 1) throw ParseError("study needs at least 1 replication");
    if (spec.sample_sizes.empty()) throw ParseError("study needs at least one sample size");
    for (std::size_t i = 1; i < spec.sample_sizes.size(); ++i)
        if (spec.sample_sizes[i] <= spec.sample_sizes[i - 1])
            throw ParseError("sample sizes must be strictly increasing");
    if (!spec.run_proposed && !spec.run_subsample) throw ParseError("study needs at least one method");

    GenSpec gen;
    gen.family = spec.family;
    gen.rho_xy = spec.rho_xy;
    gen.rho_xz = spec.rho_xz;
    gen.rho_yz = spec.rho_yz;
    gen.eta = spec.eta;

    // Per-band truth. The implied task recovers the unconditional value, so
    // its truth is rho_xy itself.
    std::vector<double> oracle;
    double max_oracle_se = 0.0;
    const auto bands = decile_sweep("z", spec.band_width);
    if (spec.task == StudySpec::Task::ecc_curve) {
        GenSpec oracle_gen = gen;
        oracle_gen.seed = derived_engine(spec.seed, 0xffffffffu)();
        for (const OracleValue& v : oracle_curve(oracle_gen, spec.band_width, spec.oracle_draws)) {
            oracle.push_back(v.value);
            max_oracle_se = std::max(max_oracle_se, v.se);
        }
    } else {
        oracle.assign(bands.size(), spec.rho_xy);
    }

    const auto n_sizes = spec.sample_sizes.size();
    const auto reps = static_cast<std::size_t>(spec.replications);
    std::vector<CellOutcome> outcomes(n_sizes * reps);

    parallel_for(outcomes.size(), spec.threads, [&](std::size_t task) {
        const std::size_t size_idx = task / reps;
        GenSpec g = gen;
        g.n = spec.sample_sizes[size_idx];
        g.seed = derived_engine(spec.seed, static_cast<std::uint64_t>(task))();
        const Sample s = generate(g);

        CellOutcome& out = outcomes[task];
        if (spec.run_proposed) {
            double sum = 0.0;
            bool ok = true;
            try {
                for (std::size_t b = 0; b < bands.size(); ++b) {
                    double est;
                    if (spec.task == StudySpec::Task::ecc_curve) {
                        est = ecc_estimate(s, bands[b].second, spec.strategy).rho;
                    } else {
                        const Sample a = select_rows(s, event_mask(s, bands[b].second));
                        MomentSource source = MomentSource::asserted_scalar(
                            family_z_variance(spec.family, spec.eta));
                        if (spec.implied_source == MomentSource::Kind::truncated_mle) {
                            const Eigen::VectorXd z = s.data.col(2);
                            const double lo_p = bands[b].second.upper - bands[b].second.width;
                            const double lo = lo_p <= 0.0 ? -std::numeric_limits<double>::infinity()
                                                          : quantile_type7(z, lo_p);
                            const double hi = bands[b].second.upper >= 1.0
                                                  ? std::numeric_limits<double>::infinity()
                                                  : quantile_type7(z, bands[b].second.upper);
                            source = MomentSource::truncated_mle(lo, hi);
                        }
                        est = implied_unconditional(a, source).rho;
                    }
                    const double e = est - oracle[b];
                    sum += e * e;
                }
            } catch (const Error&) {
                ok = false;
            }
            if (ok) out.proposed_mse = sum / static_cast<double>(bands.size());
        }
        if (spec.run_subsample) {
            double sum = 0.0;
            bool ok = true;
            try {
                for (std::size_t b = 0; b < bands.size(); ++b) {
                    const double est = ecc_subsample(s, bands[b].second).rho;
                    const double e = est - oracle[b];
                    sum += e * e;
                }
            } catch (const Error&) {
                ok = false;
            }
            if (ok) out.subsample_mse = sum / static_cast<double>(bands.size());
        }
    });

    StudyResult result;
    result.oracle_values = oracle;
    result.max_oracle_se = max_oracle_se;
    result.failed_cells = 0;
    result.total_cells = 0;

    for (std::size_t size_idx = 0; size_idx < n_sizes; ++size_idx) {
        auto aggregate = [&](EstimateMethod method, auto member) {
            double sum = 0.0;
            int successes = 0, failures = 0;
            for (std::size_t r = 0; r < reps; ++r) {
                const auto& mse = outcomes[size_idx * reps + r].*member;
                if (mse) {
                    sum += *mse;
                    ++successes;
                } else {
                    ++failures;
                }
            }
            result.failed_cells += failures;
            result.total_cells += static_cast<int>(reps);
            StudyCell cell;
            cell.method = method;
            cell.n = spec.sample_sizes[size_idx];
            cell.rmse = successes > 0 ? std::sqrt(sum / static_cast<double>(successes))
                                      : std::numeric_limits<double>::quiet_NaN();
            cell.successes = successes;
            cell.failures = failures;
            result.cells.push_back(cell);
        };
        if (spec.run_proposed) aggregate(EstimateMethod::full_sample_corrected, &CellOutcome::proposed_mse);
        if (spec.run_subsample) aggregate(EstimateMethod::subsample, &CellOutcome::subsample_mse);
    }

    if (result.total_cells > 0 &&
        result.failed_cells * 20 > result.total_cells) // > 5%
        throw Error("study failed: " + std::to_string(result.failed_cells) + " of " +
                    std::to_string(result.total_cells) + " cells failed (budget 5%)");
    return result;
}

double loglog_slope(const StudyResult& result, EstimateMethod method) {
    std::vector<double> lx, ly;
    for (const StudyCell& c : result.cells) {
        if (c.method != method || !(c.rmse > 0.0)) continue;
        lx.push_back(std::log(static_cast<double>(c.n)));
        ly.push_back(std::log(c.rmse));
    }
    if (lx.size() < 2) throw Error("log-log slope needs at least 2 cells");
    const auto n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

} // namespace ecc
