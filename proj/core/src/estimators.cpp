#include "eventcorr/estimators.hpp"

#include "eventcorr/truncnorm.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ecc {

void Sample::validate() const {
    if (data.rows() < 3) throw DimensionMismatchError("sample needs at least 3 rows");
    if (!columns.empty() && static_cast<Eigen::Index>(columns.size()) != data.cols())
        throw DimensionMismatchError("column name count does not match data width");
    auto in_range = [&](Eigen::Index c) { return c >= 0 && c < data.cols(); };
    if (!in_range(roles.x) || !in_range(roles.y))
        throw DimensionMismatchError("x and y roles must name existing columns");
    for (Eigen::Index c : roles.z1)
        if (!in_range(c)) throw DimensionMismatchError("z1 role names a missing column");
    for (Eigen::Index c : roles.z2)
        if (!in_range(c)) throw DimensionMismatchError("z2 role names a missing column");
    if (!roles.z1.empty() && !roles.z2.empty() && roles.z1.size() != roles.z2.size())
        throw DimensionMismatchError("z1 and z2 blocks must have equal dimension");
}

Sample Sample::xyz(Eigen::VectorXd x, Eigen::VectorXd y, Eigen::VectorXd z) {
    if (x.size() != y.size() || x.size() != z.size())
        throw DimensionMismatchError("x, y, z must have equal length");
    Sample s;
    s.data.resize(x.size(), 3);
    s.data.col(0) = std::move(x);
    s.data.col(1) = std::move(y);
    s.data.col(2) = std::move(z);
    s.columns = {"x", "y", "z"};
    s.roles.x = 0;
    s.roles.y = 1;
    s.roles.z1 = {2};
    s.roles.z2 = {2};
    return s;
}

const char* to_string(EstimateMethod m) {
    switch (m) {
    case EstimateMethod::full_sample_corrected: return "full-sample-corrected";
    case EstimateMethod::subsample: return "subsample";
    case EstimateMethod::population: return "population";
    }
    return "unknown";
}

const char* to_string(MomentStrategy s) {
    switch (s) {
    case MomentStrategy::empirical: return "empirical";
    case MomentStrategy::gaussian_model: return "gaussian-model";
    }
    return "unknown";
}

MomentSource MomentSource::asserted(Eigen::MatrixXd cov) {
    MomentSource s;
    s.kind = Kind::asserted;
    s.asserted_cov = std::move(cov);
    return s;
}

MomentSource MomentSource::asserted_scalar(double variance) {
    if (!(variance > 0.0)) throw DegenerateConditioningError("asserted variance must be positive");
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = variance;
    return asserted(std::move(m));
}

MomentSource MomentSource::truncated_mle(double lo, double hi) {
    if (!(lo < hi)) throw ParseError("truncated-mle interval requires lo < hi");
    MomentSource s;
    s.kind = Kind::truncated_mle;
    s.mle_lo = lo;
    s.mle_hi = hi;
    return s;
}

Sample select_rows(const Sample& sample, const std::vector<bool>& mask) {
    if (mask.size() != static_cast<std::size_t>(sample.n()))
        throw DimensionMismatchError("row mask length does not match the sample");
    const Eigen::Index count = count_mask(mask);
    Sample out;
    out.columns = sample.columns;
    out.roles = sample.roles;
    out.data.resize(count, sample.data.cols());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < sample.n(); ++i)
        if (mask[static_cast<std::size_t>(i)]) out.data.row(k++) = sample.data.row(i);
    return out;
}

Eigen::VectorXd column_mean(const Eigen::MatrixXd& m) {
    return m.colwise().mean();
}

Eigen::VectorXd column_mean(const Eigen::MatrixXd& m, const std::vector<bool>& mask) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m.cols());
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        sum += m.row(i).transpose();
        ++count;
    }
    if (count == 0) throw InsufficientEventSampleError("mean over empty row selection", 0);
    return sum / static_cast<double>(count);
}

Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& m) {
    if (m.rows() < 2) throw DegenerateConditioningError("covariance needs at least 2 rows");
    Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    return (c.transpose() * c) / (static_cast<double>(m.rows()) - 1.0);
}

Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& m, const std::vector<bool>& mask) {
    const Eigen::Index count = count_mask(mask);
    if (count < 2) throw InsufficientEventSampleError("covariance over fewer than 2 selected rows", count);
    Eigen::MatrixXd sel(count, m.cols());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (mask[static_cast<std::size_t>(i)]) sel.row(k++) = m.row(i);
    return covariance_matrix(sel);
}

double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw DimensionMismatchError("correlation inputs differ in length");
    if (x.size() < 2) throw DegenerateConditioningError("correlation needs at least 2 rows");
    const Eigen::VectorXd xc = x.array() - x.mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double sx = xc.squaredNorm();
    const double sy = yc.squaredNorm();
    if (!(sx > 0.0) || !(sy > 0.0)) throw UndefinedStatisticError("correlation of a constant column");
    return xc.dot(yc) / std::sqrt(sx * sy);
}

RegressionFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                      const std::vector<std::string>& names) {
    if (design.rows() != response.size()) throw DimensionMismatchError("design and response row counts differ");
    if (design.rows() < design.cols() + 1)
        throw SingularDesignError("fewer rows than covariates plus one");
    Eigen::MatrixXd zc = design.rowwise() - design.colwise().mean();
    Eigen::VectorXd yc = response.array() - response.mean();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(zc);
    qr.setThreshold(1e-10);
    if (qr.rank() < design.cols()) {
        // The pivots past the numerical rank identify the dependent columns.
        std::ostringstream msg;
        msg << "rank-deficient design (rank " << qr.rank() << " of " << design.cols() << "): columns";
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < design.cols(); ++k) {
            const Eigen::Index col = perm(k);
            msg << ' ';
            if (static_cast<std::size_t>(col) < names.size())
                msg << names[static_cast<std::size_t>(col)];
            else
                msg << col;
        }
        throw SingularDesignError(msg.str());
    }
    RegressionFit fit;
    fit.beta = qr.solve(yc);
    fit.residuals = yc - zc * fit.beta;
    fit.centered = true;
    return fit;
}

RegressionFit ols_fit(const Sample& sample, Eigen::Index response_col,
                      const std::vector<Eigen::Index>& covariate_cols) {
    sample.validate();
    std::vector<std::string> names;
    for (Eigen::Index c : covariate_cols)
        names.push_back(static_cast<std::size_t>(c) < sample.columns.size()
                            ? sample.columns[static_cast<std::size_t>(c)]
                            : std::to_string(c));
    return ols_fit(sample.block(covariate_cols), sample.data.col(response_col), names);
}

namespace {

// Conditional covariance of the selected columns under the event, either from
// the event rows or from a Gaussian fitted on the full sample and truncated
// to the event interval (scalar covariate).
Eigen::MatrixXd conditional_block_cov(const Sample& sample, const EventSpec& event,
                                      const std::vector<bool>& mask,
                                      const std::vector<Eigen::Index>& cols,
                                      MomentStrategy strategy) {
    if (strategy == MomentStrategy::empirical) return covariance_matrix(sample.block(cols), mask);

    if (cols.size() != 1)
        throw DegenerateConditioningError("gaussian-model moments support a scalar covariate only");
    if (event.kind == EventSpec::Kind::all) return covariance_matrix(sample.block(cols));
    const Eigen::VectorXd z = sample.data.col(cols[0]);
    const double mu = z.mean();
    const double sd = std::sqrt((z.array() - mu).square().sum() / (static_cast<double>(z.size()) - 1.0));
    if (!(sd > 0.0)) throw DegenerateConditioningError("gaussian-model moments: constant covariate");

    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    switch (event.kind) {
    case EventSpec::Kind::threshold_above:
        lo = event.threshold;
        break;
    case EventSpec::Kind::threshold_below:
        hi = event.threshold;
        break;
    case EventSpec::Kind::quantile_band:
        lo = quantile_type7(z, event.upper - event.width);
        hi = quantile_type7(z, event.upper);
        break;
    case EventSpec::Kind::rectangle: {
        if (event.bounds.size() != 1)
            throw DegenerateConditioningError("gaussian-model moments need a single-column event");
        lo = event.bounds[0].lo;
        hi = event.bounds[0].hi;
        break;
    }
    case EventSpec::Kind::all:
        break;
    }
    const TruncatedMoments tm = truncated_normal_moments(mu, sd, lo, hi);
    Eigen::MatrixXd out(1, 1);
    out(0, 0) = tm.var;
    return out;
}

} // namespace

DeltaShift delta_shift(const Sample& sample, const EventSpec& event,
                       const std::vector<Eigen::Index>& block_i,
                       const std::vector<Eigen::Index>& block_j,
                       MomentStrategy strategy) {
    sample.validate();
    const std::vector<bool> mask = event_mask(sample, event);
    const Eigen::Index n_event = count_mask(mask);
    if (n_event < 3)
        throw InsufficientEventSampleError("event '" + event.to_text() + "' selects only " +
                                               std::to_string(n_event) + " rows (minimum 3)",
                                           n_event);
    DeltaShift out;
    if (block_i == block_j) {
        const Eigen::MatrixXd uncond = covariance_matrix(sample.block(block_i));
        out.delta = conditional_block_cov(sample, event, mask, block_i, strategy) - uncond;
    } else {
        // Joint block, then the cross sub-block, so one row selection serves both.
        std::vector<Eigen::Index> joint(block_i);
        joint.insert(joint.end(), block_j.begin(), block_j.end());
        const auto q1 = static_cast<Eigen::Index>(block_i.size());
        const auto q2 = static_cast<Eigen::Index>(block_j.size());
        if (strategy == MomentStrategy::gaussian_model && (q1 != 1 || q2 != 1 || block_i != block_j))
            throw DegenerateConditioningError("gaussian-model moments support a scalar covariate only");
        const Eigen::MatrixXd uncond = covariance_matrix(sample.block(joint));
        const Eigen::MatrixXd cond = covariance_matrix(sample.block(joint), mask);
        out.delta = cond.block(0, q1, q1, q2) - uncond.block(0, q1, q1, q2);
    }
    out.event_mass = static_cast<double>(n_event) / static_cast<double>(sample.n());
    return out;
}

double ecc_population(const CorrelationParams& p) {
    const double dx = 1.0 + p.rho_xz * p.rho_xz * p.delta;
    const double dy = 1.0 + p.rho_yz * p.rho_yz * p.delta;
    if (!(dx > 0.0) || !(dy > 0.0))
        throw DegenerateConditioningError("conditional variance factor is not positive");
    return (p.rho_xy + p.rho_xz * p.rho_yz * p.delta) / std::sqrt(dx * dy);
}

namespace {

double clamp_rho(double raw, bool& clamped) {
    clamped = raw < -1.0 || raw > 1.0;
    return std::clamp(raw, -1.0, 1.0);
}

} // namespace

EccEstimate ecc_estimate(const Sample& sample, const EventSpec& event, MomentStrategy strategy) {
    sample.validate();
    if (sample.roles.z1.empty() || sample.roles.z2.empty())
        throw DimensionMismatchError("estimator needs z1 and z2 covariate blocks");

    const Eigen::VectorXd x = sample.x();
    const Eigen::VectorXd y = sample.y();
    const double n1 = static_cast<double>(sample.n()) - 1.0;
    const Eigen::VectorXd xc = x.array() - x.mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double cov_xy = xc.dot(yc) / n1;
    const double var_x = xc.squaredNorm() / n1;
    const double var_y = yc.squaredNorm() / n1;
    if (!(var_x > 0.0) || !(var_y > 0.0)) throw UndefinedStatisticError("x or y is constant");

    const RegressionFit bx = ols_fit(sample, sample.roles.x, sample.roles.z1);
    const RegressionFit by = ols_fit(sample, sample.roles.y, sample.roles.z2);

    const DeltaShift d11 = delta_shift(sample, event, sample.roles.z1, sample.roles.z1, strategy);
    const DeltaShift d22 = sample.roles.z1 == sample.roles.z2
                               ? d11
                               : delta_shift(sample, event, sample.roles.z2, sample.roles.z2, strategy);
    const DeltaShift d12 = sample.roles.z1 == sample.roles.z2
                               ? d11
                               : delta_shift(sample, event, sample.roles.z1, sample.roles.z2, strategy);

    const double num = cov_xy + bx.beta.dot(d12.delta * by.beta);
    const double denx = var_x + bx.beta.dot(d11.delta * bx.beta);
    const double deny = var_y + by.beta.dot(d22.delta * by.beta);
    if (!(denx > 0.0) || !(deny > 0.0))
        throw DegenerateConditioningError("corrected variance is not positive under this event");

    EccEstimate est;
    est.rho = clamp_rho(num / std::sqrt(denx * deny), est.clamped);
    est.n_total = sample.n();
    est.n_event = count_mask(event_mask(sample, event));
    est.method = EstimateMethod::full_sample_corrected;
    return est;
}

EccEstimate ecc_subsample(const Sample& sample, const EventSpec& event) {
    sample.validate();
    const std::vector<bool> mask = event_mask(sample, event);
    const Eigen::Index n_event = count_mask(mask);
    if (n_event < 3)
        throw InsufficientEventSampleError("event '" + event.to_text() + "' selects only " +
                                               std::to_string(n_event) + " rows (minimum 3)",
                                           n_event);
    Eigen::VectorXd xs(n_event), ys(n_event);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < sample.n(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        xs(k) = sample.data(i, sample.roles.x);
        ys(k) = sample.data(i, sample.roles.y);
        ++k;
    }
    EccEstimate est;
    est.rho = clamp_rho(pearson(xs, ys), est.clamped);
    est.n_total = sample.n();
    est.n_event = n_event;
    est.method = EstimateMethod::subsample;
    return est;
}

EccEstimate implied_unconditional(const Sample& a_sample, const MomentSource& source) {
    a_sample.validate();
    if (a_sample.roles.z1.empty() || a_sample.roles.z1 != a_sample.roles.z2)
        throw DimensionMismatchError("inverse transform requires z1 and z2 to be the same block");
    const std::vector<Eigen::Index>& zc = a_sample.roles.z1;
    const auto q = static_cast<Eigen::Index>(zc.size());

    // Conditional moments of (x, y, z-block) over the restricted sample.
    std::vector<Eigen::Index> cols{a_sample.roles.x, a_sample.roles.y};
    cols.insert(cols.end(), zc.begin(), zc.end());
    const Eigen::MatrixXd cov_a = covariance_matrix(a_sample.block(cols));
    const double var_x_a = cov_a(0, 0);
    const double var_y_a = cov_a(1, 1);
    const double cov_xy_a = cov_a(0, 1);
    const Eigen::VectorXd cov_zx_a = cov_a.block(2, 0, q, 1);
    const Eigen::VectorXd cov_zy_a = cov_a.block(2, 1, q, 1);
    const Eigen::MatrixXd sigma_z_a = cov_a.block(2, 2, q, q);
    if (!(var_x_a > 0.0) || !(var_y_a > 0.0)) throw UndefinedStatisticError("x or y is constant");

    Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma_z_a);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw SingularDesignError("conditional covariate covariance is singular");
    const Eigen::VectorXd beta_x = ldlt.solve(cov_zx_a);
    const Eigen::VectorXd beta_y = ldlt.solve(cov_zy_a);

    // Unconditional covariate covariance.
    Eigen::MatrixXd sigma_z;
    switch (source.kind) {
    case MomentSource::Kind::asserted:
        if (source.asserted_cov.rows() != q || source.asserted_cov.cols() != q)
            throw DimensionMismatchError("asserted covariate covariance has the wrong dimension");
        sigma_z = source.asserted_cov;
        break;
    case MomentSource::Kind::truncated_mle: {
        if (q != 1)
            throw DimensionMismatchError("truncated-mle moment recovery supports a scalar covariate");
        const TruncatedNormalFit fit =
            fit_truncated_normal(a_sample.data.col(zc[0]), source.mle_lo, source.mle_hi);
        sigma_z.resize(1, 1);
        sigma_z(0, 0) = fit.sigma * fit.sigma;
        break;
    }
    }

    // Slopes and residual second moments are unchanged by covariate-measurable
    // conditioning, so swapping the covariate covariance back to its
    // unconditional value reassembles the unconditional moments.
    const double cov_xy = beta_x.dot(sigma_z * beta_y) + (cov_xy_a - beta_x.dot(sigma_z_a * beta_y));
    const double var_x = beta_x.dot(sigma_z * beta_x) + (var_x_a - beta_x.dot(sigma_z_a * beta_x));
    const double var_y = beta_y.dot(sigma_z * beta_y) + (var_y_a - beta_y.dot(sigma_z_a * beta_y));
    if (!(var_x > 0.0) || !(var_y > 0.0))
        throw DegenerateConditioningError("reconstructed variance is not positive");

    EccEstimate est;
    est.rho = clamp_rho(cov_xy / std::sqrt(var_x * var_y), est.clamped);
    est.n_total = a_sample.n();
    est.n_event = a_sample.n();
    est.method = EstimateMethod::full_sample_corrected;
    return est;
}

Eigen::VectorXd r_vector(const Eigen::VectorXd& rho_cond, const Eigen::VectorXd& var_cond,
                         const Eigen::VectorXd& var_uncond) {
    if (rho_cond.size() != var_cond.size() || rho_cond.size() != var_uncond.size())
        throw DimensionMismatchError("r_vector inputs differ in length");
    Eigen::VectorXd out(rho_cond.size());
    for (Eigen::Index i = 0; i < rho_cond.size(); ++i) {
        if (!(var_uncond(i) > 0.0))
            throw DegenerateConditioningError("unconditional variance must be positive");
        const double bracket =
            1.0 + (var_cond(i) / var_uncond(i) - 1.0) * (1.0 - rho_cond(i) * rho_cond(i));
        if (!(bracket > 0.0))
            throw DegenerateConditioningError("standardization bracket is not positive");
        out(i) = rho_cond(i) / std::sqrt(bracket);
    }
    return out;
}

double transport(const CorrelationParams& conditional, double delta_tilde) {
    CorrelationParams p = conditional;
    p.delta = delta_tilde;
    return ecc_population(p);
}

AssumptionDiagnostics assumption_diagnostics(const Sample& sample, const EventSpec& event) {
    sample.validate();
    if (sample.roles.z1.empty() || sample.roles.z2.empty())
        throw DimensionMismatchError("diagnostics need z1 and z2 covariate blocks");
    const std::vector<bool> mask = event_mask(sample, event);
    const Eigen::Index n_event = count_mask(mask);
    if (n_event < 3)
        throw InsufficientEventSampleError("event '" + event.to_text() + "' selects only " +
                                               std::to_string(n_event) + " rows (minimum 3)",
                                           n_event);

    const RegressionFit bx = ols_fit(sample, sample.roles.x, sample.roles.z1);
    const RegressionFit by = ols_fit(sample, sample.roles.y, sample.roles.z2);
    const Eigen::MatrixXd z1c = sample.z1().rowwise() - sample.z1().colwise().mean();
    const Eigen::MatrixXd z2c = sample.z2().rowwise() - sample.z2().colwise().mean();
    const Eigen::VectorXd fit_x = z1c * bx.beta;
    const Eigen::VectorXd fit_y = z2c * by.beta;

    Eigen::MatrixXd series(sample.n(), 4);
    series.col(0) = bx.residuals;
    series.col(1) = by.residuals;
    series.col(2) = fit_x;
    series.col(3) = fit_y;
    const Eigen::MatrixXd cov_all = covariance_matrix(series);
    const Eigen::MatrixXd cov_evt = covariance_matrix(series, mask);

    AssumptionDiagnostics d;
    d.a1_gap = std::abs(cov_evt(0, 1) - cov_all(0, 1));
    d.a2_gap = std::abs(cov_evt(2, 1) + cov_evt(3, 0));

    std::vector<Eigen::Index> joint(sample.roles.z1);
    joint.insert(joint.end(), sample.roles.z2.begin(), sample.roles.z2.end());
    const Eigen::MatrixXd zj = sample.block(joint);
    const auto q1 = static_cast<Eigen::Index>(sample.roles.z1.size());
    const auto q2 = static_cast<Eigen::Index>(sample.roles.z2.size());
    const Eigen::MatrixXd shift = covariance_matrix(zj, mask).block(0, q1, q1, q2) -
                                  covariance_matrix(zj).block(0, q1, q1, q2);
    d.bias_bound_scale = shift.norm();
    return d;
}

CovarianceShiftSummary covariance_shift(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& sigma_a,
                                        double rel_threshold) {
    if (sigma.rows() != sigma.cols() || sigma_a.rows() != sigma_a.cols() ||
        sigma.rows() != sigma_a.rows())
        throw DimensionMismatchError("covariance matrices must be square and of equal dimension");
    CovarianceShiftSummary out;
    out.delta = sigma - sigma_a;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.delta);
    out.singular_values = svd.singularValues();
    out.effective_rank = 0;
    if (out.singular_values.size() > 0) {
        const double top = out.singular_values(0);
        for (Eigen::Index i = 0; i < out.singular_values.size(); ++i)
            if (out.singular_values(i) > rel_threshold * top && out.singular_values(i) > 0.0)
                ++out.effective_rank;
    }
    return out;
}

} // namespace ecc
