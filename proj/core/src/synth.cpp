#include "eventcorr/synth.hpp"

#include "eventcorr/estimators.hpp"
#include "eventcorr/rng.hpp"
#include "eventcorr/truncnorm.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <random>

namespace ecc {

const char* to_string(GenSpec::Family f) {
    switch (f) {
    case GenSpec::Family::gaussian_scale: return "gaussian-scale";
    case GenSpec::Family::student_t: return "student-t";
    case GenSpec::Family::gaussian_chisq_mixture: return "gaussian-chisq-mixture";
    }
    return "unknown";
}

GenSpec::Family family_from_string(const std::string& name) {
    if (name == "gaussian-scale") return GenSpec::Family::gaussian_scale;
    if (name == "student-t") return GenSpec::Family::student_t;
    if (name == "gaussian-chisq-mixture") return GenSpec::Family::gaussian_chisq_mixture;
    throw ParseError("unknown family '" + name + "'");
}

namespace {

Eigen::Matrix3d cholesky_of_theta(const GenSpec& spec) {
    Eigen::Matrix3d corr;
    corr << 1.0, spec.rho_xy, spec.rho_xz, spec.rho_xy, 1.0, spec.rho_yz, spec.rho_xz, spec.rho_yz, 1.0;
    Eigen::LLT<Eigen::Matrix3d> llt(corr);
    if (llt.info() != Eigen::Success)
        throw DegenerateConditioningError("theta does not form a positive definite correlation matrix");
    return llt.matrixL();
}

} // namespace

Sample generate(const GenSpec& spec) {
    if (spec.n < 1) throw DimensionMismatchError("generator needs n >= 1");
    if (!(spec.eta > 0.0)) throw DegenerateConditioningError("eta must be positive");
    if (spec.family == GenSpec::Family::student_t && !(spec.eta > 2.0))
        throw DegenerateConditioningError("student-t needs eta > 2 for finite second moments");
    const Eigen::Matrix3d L = cholesky_of_theta(spec);

    auto eng = derived_engine(spec.seed, 0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::chi_squared_distribution<double> chisq(spec.eta);
    const double sqrt_eta = std::sqrt(spec.eta);

    Eigen::MatrixXd data(spec.n, 3);
    Eigen::Vector3d g;
    for (Eigen::Index i = 0; i < spec.n; ++i) {
        g << gauss(eng), gauss(eng), gauss(eng);
        Eigen::Vector3d row = L * g;
        switch (spec.family) {
        case GenSpec::Family::gaussian_scale:
            row *= sqrt_eta;
            break;
        case GenSpec::Family::student_t:
            row *= std::sqrt(spec.eta / chisq(eng));
            break;
        case GenSpec::Family::gaussian_chisq_mixture:
            row *= std::sqrt(chisq(eng));
            break;
        }
        data.row(i) = row.transpose();
    }

    Sample s;
    s.data = std::move(data);
    s.columns = {"x", "y", "z"};
    s.roles.x = 0;
    s.roles.y = 1;
    s.roles.z1 = {2};
    s.roles.z2 = {2};
    return s;
}

namespace {

// Interval of the event in z units under the exact Gaussian route, or nullopt
// when the event is not an interval on z.
struct ZInterval {
    double lo, hi;
};

std::optional<ZInterval> z_interval_gaussian(const GenSpec& spec, const EventSpec& event) {
    const double scale = std::sqrt(spec.eta); // z marginal is N(0, eta)
    const double inf = std::numeric_limits<double>::infinity();
    switch (event.kind) {
    case EventSpec::Kind::threshold_above:
        if (event.column != "z") return std::nullopt;
        return ZInterval{event.threshold, inf};
    case EventSpec::Kind::threshold_below:
        if (event.column != "z") return std::nullopt;
        return ZInterval{-inf, event.threshold};
    case EventSpec::Kind::quantile_band: {
        if (event.column != "z") return std::nullopt;
        const double lo_p = event.upper - event.width;
        const double lo = lo_p <= 0.0 ? -inf : scale * normal_ppf(lo_p);
        const double hi = event.upper >= 1.0 ? inf : scale * normal_ppf(event.upper);
        return ZInterval{lo, hi};
    }
    case EventSpec::Kind::rectangle:
        if (event.bounds.size() != 1 || event.bounds[0].column != "z") return std::nullopt;
        return ZInterval{event.bounds[0].lo, event.bounds[0].hi};
    case EventSpec::Kind::all:
        return ZInterval{-inf, inf};
    }
    return std::nullopt;
}

OracleValue oracle_from_mask(const Sample& s, const std::vector<bool>& mask, Eigen::Index draws) {
    const Eigen::Index n_event = count_mask(mask);
    if (n_event < static_cast<Eigen::Index>(1e-4 * static_cast<double>(draws)))
        throw OracleUnstableError("event mass below 1e-4: " + std::to_string(n_event) + " of " +
                                  std::to_string(draws) + " oracle draws");
    Eigen::VectorXd xs(n_event), ys(n_event);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < s.n(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        xs(k) = s.data(i, 0);
        ys(k) = s.data(i, 1);
        ++k;
    }
    const double rho = pearson(xs, ys);
    // First-order sd of a sample correlation; approximate for heavy tails.
    const double se = (1.0 - rho * rho) / std::sqrt(static_cast<double>(n_event));
    return OracleValue{rho, se};
}

} // namespace

OracleValue oracle_ecc(const GenSpec& spec, const EventSpec& event, Eigen::Index draws) {
    if (spec.family == GenSpec::Family::gaussian_scale) {
        if (const auto zi = z_interval_gaussian(spec, event)) {
            if (std::isinf(zi->lo) && std::isinf(zi->hi))
                return OracleValue{spec.rho_xy, 0.0};
            const TruncatedMoments tm =
                truncated_normal_moments(0.0, std::sqrt(spec.eta), zi->lo, zi->hi);
            if (tm.mass < 1e-4)
                throw OracleUnstableError("event mass below 1e-4 under the Gaussian model");
            const double delta = tm.var / spec.eta - 1.0;
            return OracleValue{ecc_population({spec.rho_xy, spec.rho_xz, spec.rho_yz, delta}), 0.0};
        }
    }
    GenSpec big = spec;
    big.n = draws;
    const Sample s = generate(big);
    return oracle_from_mask(s, event_mask(s, event), draws);
}

std::vector<OracleValue> oracle_curve(const GenSpec& spec, double width, Eigen::Index draws) {
    const auto bands = decile_sweep("z", width);
    std::vector<OracleValue> out;
    out.reserve(bands.size());
    if (spec.family == GenSpec::Family::gaussian_scale) {
        for (const auto& [i, event] : bands) out.push_back(oracle_ecc(spec, event, draws));
        return out;
    }
    GenSpec big = spec;
    big.n = draws;
    const Sample s = generate(big);
    for (const auto& [i, event] : bands) out.push_back(oracle_from_mask(s, event_mask(s, event), draws));
    return out;
}

} // namespace ecc
