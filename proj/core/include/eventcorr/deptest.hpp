#pragma once

#include "eventcorr/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ecc {

/// One dependence test on an event-restricted (x, y) sample.
struct TestResult {
    enum class Test { ecc_implied, pearson, spearman, kendall, hoeffding };
    Test test;
    double statistic = 0.0;
    double p_value = 1.0;
    bool failed = false; // statistic undefined on this data; see error
    std::string error;
};

const char* to_string(TestResult::Test t);

/// Average (mid) ranks, 1-based.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& v);

/// Rank correlation: ordinary correlation of the mid ranks.
double spearman_rho(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Concordance statistic from pair orderings, computed by merge-sort
/// inversion counting in O(n log n). Continuous inputs assumed (ties are not
/// adjusted for).
double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Rank statistic sensitive to any dependence, from joint bivariate ranks,
/// in O(n log n). Continuous inputs assumed; needs n >= 5. Values lie in
/// [-0.5, 1], near 0 under independence.
double hoeffding_d(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Runs the five tests on a sample whose rows all satisfy the conditioning
/// event: the implied-unconditional correlation (with the asserted
/// unconditional covariate variance), plus ordinary, rank, concordance, and
/// joint-rank statistics. Two-sided p-values come from B_perm permutations of
/// y holding (x, z) fixed, so the null keeps the selection structure intact.
/// A constant column marks the affected tests failed; the others still run.
std::vector<TestResult> run_tests(const Sample& a_sample, double asserted_sigma2_z,
                                  int B_perm = 2000, std::uint64_t seed = 0, unsigned threads = 0);

} // namespace ecc
