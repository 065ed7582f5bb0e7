#include "eventcorr/network.hpp"

#include "eventcorr/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <utility>

namespace ecc {

void Panel::validate() const {
    if (residuals.rows() != covariates.rows())
        throw DimensionMismatchError("residual and covariate row counts differ");
    if (residuals.rows() < 3) throw DimensionMismatchError("panel needs at least 3 rows");
    if (residuals.cols() < 3) throw DimensionMismatchError("panel needs at least 3 residual columns");
    if (covariates.cols() < 1) throw DimensionMismatchError("panel needs at least 1 covariate column");
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != residuals.cols())
        throw DimensionMismatchError("residual name count does not match column count");
    if (!covariate_names.empty() &&
        static_cast<Eigen::Index>(covariate_names.size()) != covariates.cols())
        throw DimensionMismatchError("covariate name count does not match column count");
    if (!dates.empty() && static_cast<Eigen::Index>(dates.size()) != residuals.rows())
        throw DimensionMismatchError("date count does not match row count");
    if (residuals.hasNaN() || covariates.hasNaN())
        throw DimensionMismatchError("panel contains missing values");
}

Panel select_rows(const Panel& panel, const std::vector<bool>& mask) {
    if (static_cast<Eigen::Index>(mask.size()) != panel.n())
        throw DimensionMismatchError("mask length does not match panel rows");
    Eigen::Index kept = 0;
    for (bool b : mask) kept += b ? 1 : 0;
    if (kept == 0) throw InsufficientEventSampleError("regime selects no rows", 0);
    Panel out;
    out.residuals.resize(kept, panel.residuals.cols());
    out.covariates.resize(kept, panel.covariates.cols());
    out.names = panel.names;
    out.covariate_names = panel.covariate_names;
    if (!panel.dates.empty()) out.dates.reserve(kept);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < panel.n(); ++i) {
        if (!mask[i]) continue;
        out.residuals.row(r) = panel.residuals.row(i);
        out.covariates.row(r) = panel.covariates.row(i);
        if (!panel.dates.empty()) out.dates.push_back(panel.dates[i]);
        ++r;
    }
    return out;
}

const char* to_string(Regime regime) {
    switch (regime) {
    case Regime::stable: return "stable";
    case Regime::crisis: return "crisis";
    case Regime::counterfactual: return "counterfactual";
    }
    return "unknown";
}

std::pair<std::vector<bool>, std::vector<bool>> split_regimes(const Panel& panel,
                                                              Eigen::Index covariate_col,
                                                              double quantile, bool allow_empty) {
    panel.validate();
    if (covariate_col < 0 || covariate_col >= panel.q())
        throw DimensionMismatchError("covariate column out of range");
    if (!(quantile >= 0.0 && quantile <= 1.0))
        throw DimensionMismatchError("regime quantile must lie in [0, 1]");
    const Eigen::VectorXd w = panel.covariates.col(covariate_col);
    const double threshold = quantile_type7(w, quantile);
    std::vector<bool> stable(w.size()), crisis(w.size());
    Eigen::Index n_crisis = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const bool hot = w(i) >= threshold;
        crisis[i] = hot;
        stable[i] = !hot;
        n_crisis += hot ? 1 : 0;
    }
    if (!allow_empty && (n_crisis == 0 || n_crisis == w.size()))
        throw InsufficientEventSampleError("a regime is empty at this quantile",
                                           static_cast<Eigen::Index>(n_crisis));
    return {std::move(stable), std::move(crisis)};
}

namespace {

Eigen::Index count_true(const std::vector<bool>& mask) {
    Eigen::Index k = 0;
    for (bool b : mask) k += b ? 1 : 0;
    return k;
}

// Covariance -> correlation; throws if a diagonal entry is not positive.
Eigen::MatrixXd correlation_from_covariance(const Eigen::MatrixXd& cov) {
    const Eigen::Index p = cov.rows();
    Eigen::VectorXd sd(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(cov(i, i) > 0.0))
            throw UndefinedStatisticError("a column is constant within the regime");
        sd(i) = std::sqrt(cov(i, i));
    }
    Eigen::MatrixXd cor = cov.array() / (sd * sd.transpose()).array();
    cor = ((cor + cor.transpose()) / 2.0).eval();
    cor.diagonal().setOnes();
    return cor;
}

// Symmetrize and clip negative eigenvalues to zero, then restore the unit
// diagonal. Inputs already PSD pass through unchanged so downstream identity
// checks see the exact entrywise values.
Eigen::MatrixXd repair_correlation(const Eigen::MatrixXd& m, double* clip_magnitude) {
    Eigen::MatrixXd sym = (m + m.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success)
        throw DegenerateConditioningError("eigendecomposition of the correlation matrix failed");
    const double lo = es.eigenvalues().minCoeff();
    if (clip_magnitude) *clip_magnitude = lo < 0.0 ? -lo : 0.0;
    if (lo >= 0.0) return sym;
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd fixed =
        es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
    Eigen::VectorXd d = fixed.diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i)
        if (!(d(i) > 0.0))
            throw DegenerateConditioningError("correlation repair collapsed a diagonal entry");
    Eigen::VectorXd s = d.cwiseSqrt();
    fixed = (fixed.array() / (s * s.transpose()).array()).matrix();
    fixed = ((fixed + fixed.transpose()) / 2.0).eval();
    fixed.diagonal().setOnes();
    return fixed;
}

// Applies fn over the strict upper triangle; failed entries fall back to
// `base` and are counted. More than 5% failures fails the whole matrix.
Eigen::MatrixXd pairwise_matrix(const Eigen::MatrixXd& base,
                                const std::function<double(Eigen::Index, Eigen::Index)>& fn,
                                int* fallback_entries) {
    const Eigen::Index p = base.rows();
    const Eigen::Index pairs = p * (p - 1) / 2;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> index(pairs);
    {
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < p; ++i)
            for (Eigen::Index j = i + 1; j < p; ++j) index[k++] = {i, j};
    }
    std::vector<double> value(pairs, 0.0);
    std::vector<char> failed(pairs, 0);
    parallel_for(static_cast<std::size_t>(pairs), effective_threads(0), [&](std::size_t k) {
        const auto [i, j] = index[k];
        try {
            value[k] = fn(i, j);
        } catch (const Error&) {
            value[k] = base(i, j);
            failed[k] = 1;
        }
    });
    int bad = 0;
    for (char f : failed) bad += f;
    if (fallback_entries) *fallback_entries = bad;
    if (static_cast<Eigen::Index>(bad) * 20 > pairs) {
        std::ostringstream os;
        os << "pairwise correction failed on " << bad << " of " << pairs << " entries";
        throw DegenerateConditioningError(os.str());
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(p, p);
    for (Eigen::Index k = 0; k < pairs; ++k) {
        const auto [i, j] = index[k];
        m(i, j) = m(j, i) = value[k];
    }
    return m;
}

} // namespace

Eigen::MatrixXd regime_correlation_matrix(const Panel& panel, const std::vector<bool>& rows) {
    panel.validate();
    if (count_true(rows) < 3)
        throw InsufficientEventSampleError("regime needs at least 3 rows", count_true(rows));
    return correlation_from_covariance(covariance_matrix(panel.residuals, rows));
}

Eigen::MatrixXd corrected_correlation_matrix(const Panel& panel, const std::vector<bool>& rows,
                                             const MomentSource& source, double* clip_magnitude,
                                             int* fallback_entries) {
    panel.validate();
    const Eigen::Index n_a = count_true(rows);
    if (n_a < panel.q() + 3)
        throw InsufficientEventSampleError("regime needs at least q + 3 rows", n_a);
    const Panel sub = select_rows(panel, rows);
    const Eigen::MatrixXd base = correlation_from_covariance(covariance_matrix(sub.residuals));
    const Eigen::Index q = sub.q();
    std::vector<Eigen::Index> zroles(q);
    for (Eigen::Index c = 0; c < q; ++c) zroles[c] = 2 + c;
    auto entry = [&](Eigen::Index i, Eigen::Index j) {
        Sample s;
        s.data.resize(sub.n(), 2 + q);
        s.data.col(0) = sub.residuals.col(i);
        s.data.col(1) = sub.residuals.col(j);
        s.data.rightCols(q) = sub.covariates;
        s.roles.x = 0;
        s.roles.y = 1;
        s.roles.z1 = zroles;
        s.roles.z2 = zroles;
        return implied_unconditional(s, source).rho;
    };
    const Eigen::MatrixXd raw = pairwise_matrix(base, entry, fallback_entries);
    return repair_correlation(raw, clip_magnitude);
}

Network partial_correlation_network(const Eigen::MatrixXd& correlation, Regime regime) {
    if (correlation.rows() != correlation.cols())
        throw DimensionMismatchError("correlation matrix must be square");
    if (correlation.rows() < 2)
        throw DimensionMismatchError("network needs at least 2 components");
    if (correlation.hasNaN())
        throw DegenerateConditioningError("correlation matrix contains NaN");
    const Eigen::Index p = correlation.rows();
    const Eigen::MatrixXd sym = (correlation + correlation.transpose()) / 2.0;
    const double scale = sym.diagonal().mean();
    Network net;
    net.regime = regime;
    Eigen::MatrixXd precision;
    bool solved = false;
    for (double r : {0.0, 1e-8, 1e-6, 1e-4}) {
        Eigen::MatrixXd shifted = sym;
        shifted.diagonal().array() += r * scale;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() != Eigen::Success) continue;
        precision = llt.solve(Eigen::MatrixXd::Identity(p, p));
        net.ridge = r * scale;
        solved = true;
        break;
    }
    if (!solved)
        throw SingularDesignError("correlation matrix is singular beyond ridge repair");
    Eigen::VectorXd d = precision.diagonal();
    for (Eigen::Index i = 0; i < p; ++i)
        if (!(d(i) > 0.0))
            throw DegenerateConditioningError("precision matrix has a nonpositive diagonal");
    Eigen::VectorXd s = d.cwiseSqrt();
    Eigen::MatrixXd w = (-precision.array() / (s * s.transpose()).array()).matrix();
    w = ((w + w.transpose()) / 2.0).eval();
    w = w.cwiseMax(-1.0).cwiseMin(1.0);
    w.diagonal().setZero();
    net.weights = std::move(w);
    return net;
}

Network regime_network(const Panel& panel, const std::vector<bool>& rows, Regime label) {
    double clip = 0.0;
    const Eigen::MatrixXd cor = repair_correlation(regime_correlation_matrix(panel, rows), &clip);
    Network net = partial_correlation_network(cor, label);
    net.clip_magnitude = clip;
    return net;
}

Network corrected_network(const Panel& panel, const std::vector<bool>& rows,
                          const MomentSource& source, Regime label) {
    double clip = 0.0;
    int fallback = 0;
    const Eigen::MatrixXd cor = corrected_correlation_matrix(panel, rows, source, &clip, &fallback);
    Network net = partial_correlation_network(cor, label);
    net.clip_magnitude = clip;
    net.fallback_entries = fallback;
    return net;
}

double counterfactual_target_variance(const Panel& panel, const std::vector<bool>& stable_rows,
                                      const std::vector<bool>& crisis_rows,
                                      Eigen::Index covariate_col, double delta_scale) {
    panel.validate();
    if (covariate_col < 0 || covariate_col >= panel.q())
        throw DimensionMismatchError("covariate column out of range");
    if (count_true(stable_rows) < 3 || count_true(crisis_rows) < 3)
        throw InsufficientEventSampleError("both regimes need at least 3 rows",
                                           std::min(count_true(stable_rows), count_true(crisis_rows)));
    const Eigen::MatrixXd col = panel.covariates.middleCols(covariate_col, 1);
    const double v_stable = covariance_matrix(col, stable_rows)(0, 0);
    const double v_crisis = covariance_matrix(col, crisis_rows)(0, 0);
    return v_stable + delta_scale * (v_crisis - v_stable);
}

Network counterfactual_network(const Panel& panel, const std::vector<bool>& stable_rows,
                               Eigen::Index covariate_col, double target_variance) {
    panel.validate();
    if (covariate_col < 0 || covariate_col >= panel.q())
        throw DimensionMismatchError("covariate column out of range");
    if (count_true(stable_rows) < 3)
        throw InsufficientEventSampleError("stable regime needs at least 3 rows",
                                           count_true(stable_rows));
    if (!(target_variance > 0.0))
        throw DegenerateConditioningError("target covariate variance must be positive");
    const Panel sub = select_rows(panel, stable_rows);
    const Eigen::Index p = sub.p();
    Eigen::MatrixXd joint(sub.n(), p + 1);
    joint.leftCols(p) = sub.residuals;
    joint.col(p) = sub.covariates.col(covariate_col);
    const Eigen::MatrixXd cov = covariance_matrix(joint);
    Eigen::VectorXd sd(p + 1);
    for (Eigen::Index i = 0; i <= p; ++i) {
        if (!(cov(i, i) > 0.0))
            throw UndefinedStatisticError("a column is constant within the stable regime");
        sd(i) = std::sqrt(cov(i, i));
    }
    const double delta_tilde = target_variance / cov(p, p) - 1.0;
    Eigen::VectorXd rho_w(p);
    for (Eigen::Index i = 0; i < p; ++i) rho_w(i) = cov(i, p) / (sd(i) * sd(p));
    Eigen::MatrixXd base(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j)
            base(i, j) = i == j ? 1.0 : cov(i, j) / (sd(i) * sd(j));
    auto entry = [&](Eigen::Index i, Eigen::Index j) {
        CorrelationParams pr;
        pr.rho_xy = base(i, j);
        pr.rho_xz = rho_w(i);
        pr.rho_yz = rho_w(j);
        return transport(pr, delta_tilde);
    };
    int fallback = 0;
    const Eigen::MatrixXd raw = pairwise_matrix(base, entry, &fallback);
    double clip = 0.0;
    const Eigen::MatrixXd cor = repair_correlation(raw, &clip);
    Network net = partial_correlation_network(cor, Regime::counterfactual);
    net.clip_magnitude = clip;
    net.fallback_entries = fallback;
    return net;
}

Network counterfactual_network(const Panel& panel, const std::vector<bool>& stable_rows,
                               const std::vector<bool>& crisis_rows, Eigen::Index covariate_col,
                               double delta_scale) {
    const double target =
        counterfactual_target_variance(panel, stable_rows, crisis_rows, covariate_col, delta_scale);
    return counterfactual_network(panel, stable_rows, covariate_col, target);
}

CentralityStats eigenvector_centrality(const Network& network, CentralityNorm norm,
                                       CentralityWeighting weighting) {
    const Eigen::Index p = network.weights.rows();
    if (p < 2 || network.weights.cols() != p)
        throw DimensionMismatchError("network weight matrix must be square, p >= 2");
    const Eigen::MatrixXd a = weighting == CentralityWeighting::absolute
                                  ? network.weights.cwiseAbs()
                                  : network.weights;
    const double denom = std::sqrt(static_cast<double>(p));
    Eigen::VectorXd v = Eigen::VectorXd::Constant(p, 1.0 / denom);
    if (a.cwiseAbs().maxCoeff() > 0.0) {
        constexpr int kMaxIters = 10000;
        constexpr double kTol = 1e-10;
        // Iterating a + shift*I leaves the eigenvectors untouched but makes the
        // iteration matrix positive semidefinite, so bipartite-style +/- lambda
        // pairs cannot lock the iteration into a period-two cycle.
        const double shift = a.cwiseAbs().rowwise().sum().maxCoeff();
        double diff = 0.0;
        bool converged = false;
        for (int it = 0; it < kMaxIters; ++it) {
            Eigen::VectorXd next = a * v + shift * v;
            const double nn = next.norm();
            if (!(nn > 0.0))
                throw OptimizationFailureError("power iteration collapsed to zero", it, 0.0);
            next /= nn;
            if (next.dot(v) < 0.0) next = -next;
            diff = (next - v).lpNorm<Eigen::Infinity>();
            v = std::move(next);
            if (diff <= kTol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw OptimizationFailureError("power iteration did not converge", kMaxIters, diff);
    }
    if (weighting == CentralityWeighting::absolute) {
        v = v.cwiseAbs();
    } else {
        Eigen::Index peak = 0;
        v.cwiseAbs().maxCoeff(&peak);
        if (v(peak) < 0.0) v = -v;
    }
    if (norm == CentralityNorm::one) {
        const double l1 = v.lpNorm<1>();
        if (l1 > 0.0) v /= l1;
    } else {
        const double l2 = v.norm();
        if (l2 > 0.0) v /= l2;
    }
    CentralityStats stats;
    stats.mean = v.mean();
    stats.sd = p > 1 ? std::sqrt((v.array() - stats.mean).square().sum() / double(p - 1)) : 0.0;
    stats.scores = std::move(v);
    return stats;
}

CentralityBootstrap bootstrap_centrality(const Panel& panel, const std::vector<bool>& rows,
                                         const std::function<Network(const Panel&)>& build, int B,
                                         double level, std::uint64_t seed, unsigned threads) {
    panel.validate();
    if (B < 100) throw DimensionMismatchError("bootstrap needs at least 100 replicates");
    if (!(level > 0.0 && level < 1.0))
        throw DimensionMismatchError("confidence level must lie in (0, 1)");
    std::vector<Eigen::Index> idx;
    idx.reserve(rows.size());
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(rows.size()); ++i)
        if (rows[i]) idx.push_back(i);
    const std::size_t m = idx.size();
    if (m < 3)
        throw InsufficientEventSampleError("regime needs at least 3 rows",
                                           static_cast<Eigen::Index>(m));
    std::vector<std::optional<std::pair<double, double>>> slots(B);
    parallel_for(static_cast<std::size_t>(B), effective_threads(threads), [&](std::size_t b) {
        auto eng = derived_engine(seed, b);
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        Panel boot;
        boot.residuals.resize(m, panel.residuals.cols());
        boot.covariates.resize(m, panel.covariates.cols());
        boot.names = panel.names;
        boot.covariate_names = panel.covariate_names;
        for (std::size_t r = 0; r < m; ++r) {
            const Eigen::Index src = idx[pick(eng)];
            boot.residuals.row(r) = panel.residuals.row(src);
            boot.covariates.row(r) = panel.covariates.row(src);
        }
        try {
            const CentralityStats cs = eigenvector_centrality(build(boot));
            slots[b] = std::make_pair(cs.mean, cs.sd);
        } catch (const Error&) {
            slots[b] = std::nullopt;
        }
    });
    CentralityBootstrap out;
    for (const auto& s : slots) {
        if (!s) {
            ++out.failures;
            continue;
        }
        out.mean_draws.push_back(s->first);
        out.sd_draws.push_back(s->second);
    }
    if (out.failures * 10 > B)
        throw UnstableBootstrapError("too many bootstrap rebuilds failed", out.failures, B);
    const double alpha = (1.0 - level) / 2.0;
    auto ci_of = [&](const std::vector<double>& draws) {
        Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(draws.data(),
                                                              static_cast<Eigen::Index>(draws.size()));
        CI ci;
        ci.level = level;
        ci.lo = quantile_type7(v, alpha);
        ci.hi = quantile_type7(v, 1.0 - alpha);
        ci.method = CI::Method::bootstrap_percentile;
        return ci;
    };
    out.mean_ci = ci_of(out.mean_draws);
    out.sd_ci = ci_of(out.sd_draws);
    return out;
}

CentralityBootstrap bootstrap_centrality(const Panel& panel, const std::vector<bool>& rows,
                                         Regime label, int B, double level, std::uint64_t seed,
                                         unsigned threads) {
    auto build = [label](const Panel& sub) {
        const std::vector<bool> all(static_cast<std::size_t>(sub.n()), true);
        return regime_network(sub, all, label);
    };
    return bootstrap_centrality(panel, rows, build, B, level, seed, threads);
}

Panel one_factor_panel(const PanelSpec& spec) {
    if (spec.n < 10) throw DimensionMismatchError("panel spec needs n >= 10");
    if (spec.p < 3) throw DimensionMismatchError("panel spec needs p >= 3");
    if (!(spec.crisis_quantile > 0.0 && spec.crisis_quantile < 1.0))
        throw DimensionMismatchError("crisis quantile must lie in (0, 1)");
    const Eigen::Index n = spec.n;
    const Eigen::Index p = spec.p;
    Eigen::VectorXd load(p);
    for (Eigen::Index i = 0; i < p; ++i)
        load(i) = 0.35 + (0.8 - 0.35) * double(i) / double(p - 1);
    const Eigen::VectorXd idio = (1.0 - load.array().square()).sqrt();
    auto eng = derived_engine(spec.seed, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Panel out;
    out.residuals.resize(n, p);
    out.covariates.resize(n, 1);
    Eigen::VectorXd shock(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double f = gauss(eng);
        out.covariates(t, 0) = f;
        for (Eigen::Index i = 0; i < p; ++i)
            out.residuals(t, i) = load(i) * f + idio(i) * gauss(eng);
        shock(t) = gauss(eng); // drawn every row so masks never shift the stream
    }
    if (spec.contagion) {
        const double thr = quantile_type7(out.covariates.col(0), spec.crisis_quantile);
        for (Eigen::Index t = 0; t < n; ++t)
            if (out.covariates(t, 0) >= thr)
                out.residuals.row(t) = 0.55 * out.residuals.row(t).array() + 0.85 * shock(t);
    }
    out.names.reserve(p);
    for (Eigen::Index i = 0; i < p; ++i) out.names.push_back("a" + std::to_string(i + 1));
    out.covariate_names = {"z"};
    out.dates.reserve(n);
    for (Eigen::Index t = 0; t < n; ++t) out.dates.push_back("t" + std::to_string(t));
    return out;
}

} // namespace ecc
