#pragma once

#include "eventcorr/events.hpp"
#include "eventcorr/types.hpp"

#include <cstdint>

namespace ecc {

/// Seeded trivariate generator. theta = (rho_xy, rho_xz, rho_yz) is the
/// correlation of the underlying Gaussian; eta parameterizes the family:
///   gaussian_scale         common variance eta
///   student_t              eta degrees of freedom (eta > 2), one chi-square
///                          scale draw per row shared across (x, y, z)
///   gaussian_chisq_mixture per-row variance drawn from chi-square(eta)
struct GenSpec {
    enum class Family { gaussian_scale, student_t, gaussian_chisq_mixture };
    Family family = Family::gaussian_scale;
    double rho_xy = 0.0;
    double rho_xz = 0.0;
    double rho_yz = 0.0;
    double eta = 1.0;
    Eigen::Index n = 0;
    std::uint64_t seed = 0;
};

const char* to_string(GenSpec::Family f);
GenSpec::Family family_from_string(const std::string& name);

/// n i.i.d. rows of (x, y, z), deterministic given the seed. Throws
/// DegenerateConditioningError when theta is not a valid correlation matrix.
Sample generate(const GenSpec& spec);

/// Ground-truth conditional correlation under the event, with the standard
/// error of the truth evaluation itself.
struct OracleValue {
    double value;
    double se; // 0 for the exact route
};

/// Gaussian family with an interval event on z: exact via truncated-normal
/// moments (se = 0). Anything else: Monte Carlo over `draws` fresh rows drawn
/// from spec.seed, with se approximated by (1 - rho^2)/sqrt(n_event). Events
/// with mass below 1e-4 raise OracleUnstableError.
OracleValue oracle_ecc(const GenSpec& spec, const EventSpec& event, Eigen::Index draws = 10000000);

/// All bands of a decile sweep evaluated from one draw set; much cheaper than
/// calling oracle_ecc per band for the Monte Carlo families.
std::vector<OracleValue> oracle_curve(const GenSpec& spec, double width = 0.1,
                                      Eigen::Index draws = 10000000);

} // namespace ecc
