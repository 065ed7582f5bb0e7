#include "eventcorr/deptest.hpp"

#include "eventcorr/estimators.hpp"
#include "eventcorr/rng.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>

namespace ecc {

const char* to_string(TestResult::Test t) {
    switch (t) {
    case TestResult::Test::ecc_implied: return "ecc-implied";
    case TestResult::Test::pearson: return "pearson";
    case TestResult::Test::spearman: return "spearman";
    case TestResult::Test::kendall: return "kendall";
    case TestResult::Test::hoeffding: return "hoeffding";
    }
    return "unknown";
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
    Eigen::VectorXd ranks(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && v(order[static_cast<std::size_t>(j + 1)]) ==
                                v(order[static_cast<std::size_t>(i)]))
            ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) ranks(order[static_cast<std::size_t>(k)]) = mid;
        i = j + 1;
    }
    return ranks;
}

double spearman_rho(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

namespace {

// Inversions in v, counting strict descents; v is consumed as scratch.
std::uint64_t count_inversions(std::vector<double>& v, std::vector<double>& buf) {
    const std::size_t n = v.size();
    std::uint64_t inv = 0;
    for (std::size_t width = 1; width < n; width *= 2) {
        for (std::size_t lo = 0; lo + width < n; lo += 2 * width) {
            const std::size_t mid = lo + width;
            const std::size_t hi = std::min(lo + 2 * width, n);
            std::size_t a = lo, b = mid, k = lo;
            while (a < mid && b < hi) {
                if (v[b] < v[a]) {
                    inv += mid - a;
                    buf[k++] = v[b++];
                } else {
                    buf[k++] = v[a++];
                }
            }
            while (a < mid) buf[k++] = v[a++];
            while (b < hi) buf[k++] = v[b++];
            std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
                      buf.begin() + static_cast<std::ptrdiff_t>(hi),
                      v.begin() + static_cast<std::ptrdiff_t>(lo));
        }
    }
    return inv;
}

struct Fenwick {
    std::vector<int> tree;
    explicit Fenwick(std::size_t n) : tree(n + 1, 0) {}
    void add(std::size_t i) {
        for (; i < tree.size(); i += i & (~i + 1)) ++tree[i];
    }
    int prefix(std::size_t i) const {
        int s = 0;
        for (; i > 0; i -= i & (~i + 1)) s += tree[i];
        return s;
    }
    void clear() { std::fill(tree.begin(), tree.end(), 0); }
};

// Ordinal ranks 1..n; ties broken by row order. Continuous inputs assumed.
std::vector<int> ordinal_ranks(const Eigen::VectorXd& v) {
    const auto n = static_cast<std::size_t>(v.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v(static_cast<Eigen::Index>(a)) < v(static_cast<Eigen::Index>(b)); });
    std::vector<int> ranks(n);
    for (std::size_t k = 0; k < n; ++k) ranks[order[k]] = static_cast<int>(k) + 1;
    return ranks;
}

// s_in_xorder[k] = y-rank of the row holding x-rank k+1. Fenwick counts, for
// each point, the points below-left of it; the three rank sums follow.
double hoeffding_from_xordered(const std::vector<int>& s_in_xorder, Fenwick& fen) {
    const std::size_t n = s_in_xorder.size();
    long double d1 = 0.0L, d2 = 0.0L, d3 = 0.0L;
    fen.clear();
    for (std::size_t k = 0; k < n; ++k) {
        const int r = static_cast<int>(k) + 1;
        const int s = s_in_xorder[k];
        const auto c = static_cast<long double>(fen.prefix(static_cast<std::size_t>(s - 1)));
        d1 += c * (c - 1.0L);
        d2 += static_cast<long double>(r - 1) * (r - 2) * (s - 1) * (s - 2);
        d3 += static_cast<long double>(r - 2) * (s - 2) * c;
        fen.add(static_cast<std::size_t>(s));
    }
    const auto nn = static_cast<long double>(n);
    const long double num =
        30.0L * ((nn - 2) * (nn - 3) * d1 + d2 - 2 * (nn - 2) * d3);
    const long double den = nn * (nn - 1) * (nn - 2) * (nn - 3) * (nn - 4);
    return static_cast<double>(num / den);
}

} // namespace

double kendall_tau(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw DimensionMismatchError("inputs differ in length");
    const auto n = static_cast<std::size_t>(x.size());
    if (n < 2) throw DegenerateConditioningError("concordance needs at least 2 rows");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x(static_cast<Eigen::Index>(a)) < x(static_cast<Eigen::Index>(b)); });
    std::vector<double> seq(n), buf(n);
    for (std::size_t k = 0; k < n; ++k) seq[k] = y(static_cast<Eigen::Index>(order[k]));
    const std::uint64_t inv = count_inversions(seq, buf);
    const double pairs = 0.5 * static_cast<double>(n) * (static_cast<double>(n) - 1.0);
    return 1.0 - 2.0 * static_cast<double>(inv) / pairs;
}

double hoeffding_d(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw DimensionMismatchError("inputs differ in length");
    const auto n = static_cast<std::size_t>(x.size());
    if (n < 5) throw DegenerateConditioningError("joint-rank statistic needs at least 5 rows");
    const std::vector<int> sy = ordinal_ranks(y);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x(static_cast<Eigen::Index>(a)) < x(static_cast<Eigen::Index>(b)); });
    std::vector<int> s_in_xorder(n);
    for (std::size_t k = 0; k < n; ++k) s_in_xorder[k] = sy[order[k]];
    Fenwick fen(n);
    return hoeffding_from_xordered(s_in_xorder, fen);
}

namespace {

// Implied unconditional correlation for a scalar covariate, organized so the
// permuted re-evaluations reuse every y-independent quantity.
struct ImpliedScalarStat {
    double n1;
    Eigen::VectorXd xc, zc;
    double var_x_a, var_z_a, beta_x, sigma2_z, vx_uncond;
    bool valid = false;
    std::string why;

    ImpliedScalarStat(const Eigen::VectorXd& x, const Eigen::VectorXd& z, double sigma2) {
        const auto n = static_cast<double>(x.size());
        n1 = n - 1.0;
        xc = x.array() - x.mean();
        zc = z.array() - z.mean();
        var_x_a = xc.squaredNorm() / n1;
        var_z_a = zc.squaredNorm() / n1;
        sigma2_z = sigma2;
        if (!(var_x_a > 0.0)) {
            why = "x is constant";
            return;
        }
        if (!(var_z_a > 0.0)) {
            why = "covariate is constant";
            return;
        }
        if (!(sigma2 > 0.0)) {
            why = "asserted covariate variance must be positive";
            return;
        }
        beta_x = (zc.dot(xc) / n1) / var_z_a;
        vx_uncond = beta_x * beta_x * sigma2_z + (var_x_a - beta_x * beta_x * var_z_a);
        if (!(vx_uncond > 0.0)) {
            why = "reconstructed x variance is not positive";
            return;
        }
        valid = true;
    }

    // yc must be centered. Returns NaN when the permuted draw degenerates.
    double operator()(const Eigen::VectorXd& yc) const {
        const double var_y_a = yc.squaredNorm() / n1;
        if (!(var_y_a > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        const double beta_y = (zc.dot(yc) / n1) / var_z_a;
        const double cov_xy_a = xc.dot(yc) / n1;
        const double cxy = beta_x * beta_y * sigma2_z + (cov_xy_a - beta_x * beta_y * var_z_a);
        const double vy = beta_y * beta_y * sigma2_z + (var_y_a - beta_y * beta_y * var_z_a);
        if (!(vy > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        return std::clamp(cxy / std::sqrt(vx_uncond * vy), -1.0, 1.0);
    }
};

} // namespace

std::vector<TestResult> run_tests(const Sample& a_sample, double asserted_sigma2_z, int B_perm,
                                  std::uint64_t seed, unsigned threads) {
    a_sample.validate();
    const Eigen::Index n = a_sample.n();
    if (n < 20) throw Error("dependence tests need at least 20 rows");
    if (B_perm < 1) throw ParseError("permutation count must be positive");

    const Eigen::VectorXd x = a_sample.x();
    const Eigen::VectorXd y = a_sample.y();
    const bool have_z = a_sample.roles.z1.size() == 1;
    const Eigen::VectorXd z = have_z ? Eigen::VectorXd(a_sample.data.col(a_sample.roles.z1[0]))
                                     : Eigen::VectorXd();

    constexpr int kTests = 5;
    std::vector<TestResult> results(kTests);
    results[0].test = TestResult::Test::ecc_implied;
    results[1].test = TestResult::Test::pearson;
    results[2].test = TestResult::Test::spearman;
    results[3].test = TestResult::Test::kendall;
    results[4].test = TestResult::Test::hoeffding;

    const Eigen::VectorXd xc = x.array() - x.mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double sx = xc.norm();
    const double sy = yc.norm();
    const bool x_ok = sx > 0.0;
    const bool y_ok = sy > 0.0;
    auto mark_failed = [&](int idx, const std::string& why) {
        results[idx].failed = true;
        results[idx].error = why;
        results[idx].statistic = std::numeric_limits<double>::quiet_NaN();
        results[idx].p_value = std::numeric_limits<double>::quiet_NaN();
    };
    if (!x_ok || !y_ok) {
        const std::string why = std::string(!x_ok ? "x" : "y") + " is constant";
        for (int t = 1; t < kTests; ++t) mark_failed(t, why);
    }

    // Rank machinery shared by the permutations: permuting y permutes its
    // rank vectors identically.
    const Eigen::VectorXd rank_x = average_ranks(x);
    const Eigen::VectorXd rank_y = average_ranks(y);
    const Eigen::VectorXd rxc = rank_x.array() - rank_x.mean();
    Eigen::VectorXd ryc = rank_y.array() - rank_y.mean();
    const double srx = rxc.norm();
    const double sry = ryc.norm();
    if (!results[2].failed && (!(srx > 0.0) || !(sry > 0.0)))
        mark_failed(2, "ranks are constant");

    const std::vector<int> ord_y = ordinal_ranks(y);
    std::vector<std::size_t> x_order(static_cast<std::size_t>(n));
    std::iota(x_order.begin(), x_order.end(), 0);
    std::stable_sort(x_order.begin(), x_order.end(), [&](std::size_t a, std::size_t b) {
        return x(static_cast<Eigen::Index>(a)) < x(static_cast<Eigen::Index>(b));
    });

    ImpliedScalarStat implied(x, have_z ? z : Eigen::VectorXd::Zero(n), asserted_sigma2_z);
    if (!have_z) {
        mark_failed(0, "no scalar covariate column");
    } else if (!implied.valid) {
        mark_failed(0, implied.why);
    } else {
        const double stat = implied(yc);
        if (std::isnan(stat)) {
            mark_failed(0, "implied statistic degenerates on this sample");
        } else {
            results[0].statistic = stat;
        }
    }
    if (!results[1].failed) results[1].statistic = xc.dot(yc) / (sx * sy);
    if (!results[2].failed) results[2].statistic = rxc.dot(ryc) / (srx * sry);
    if (!results[3].failed) results[3].statistic = kendall_tau(x, y);
    if (!results[4].failed) {
        if (n < 5)
            mark_failed(4, "joint-rank statistic needs at least 5 rows");
        else
            results[4].statistic = hoeffding_d(x, y);
    }

    std::array<bool, kTests> active{};
    for (int t = 0; t < kTests; ++t) active[static_cast<std::size_t>(t)] = !results[t].failed;

    // Two-sided permutation p-values: P = (1 + #{|T_pi| >= |T_obs|})/(B + 1).
    // A degenerate permuted statistic counts as an exceedance, which can only
    // push p upward.
    std::vector<std::array<std::uint8_t, kTests>> exceed(static_cast<std::size_t>(B_perm));
    parallel_for(static_cast<std::size_t>(B_perm), threads, [&](std::size_t b) {
        auto eng = derived_engine(seed, static_cast<std::uint64_t>(b) + 1);
        std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), eng);

        Eigen::VectorXd yp(n), ypc(n), rypc(n);
        std::vector<int> ord_yp(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index src = perm[static_cast<std::size_t>(i)];
            yp(i) = y(src);
            ypc(i) = yc(src);
            rypc(i) = ryc(src);
            ord_yp[static_cast<std::size_t>(i)] = ord_y[static_cast<std::size_t>(src)];
        }

        auto& flags = exceed[b];
        flags.fill(0);
        if (active[0]) {
            const double t = implied(ypc);
            flags[0] = std::isnan(t) || std::abs(t) >= std::abs(results[0].statistic) ? 1 : 0;
        }
        if (active[1])
            flags[1] = std::abs(xc.dot(ypc) / (sx * sy)) >= std::abs(results[1].statistic) ? 1 : 0;
        if (active[2])
            flags[2] = std::abs(rxc.dot(rypc) / (srx * sry)) >= std::abs(results[2].statistic) ? 1 : 0;
        if (active[3]) {
            std::vector<double> seq(static_cast<std::size_t>(n)), buf(static_cast<std::size_t>(n));
            for (std::size_t k = 0; k < x_order.size(); ++k)
                seq[k] = yp(static_cast<Eigen::Index>(x_order[k]));
            const std::uint64_t inv = count_inversions(seq, buf);
            const double pairs = 0.5 * static_cast<double>(n) * (static_cast<double>(n) - 1.0);
            const double tau = 1.0 - 2.0 * static_cast<double>(inv) / pairs;
            flags[3] = std::abs(tau) >= std::abs(results[3].statistic) ? 1 : 0;
        }
        if (active[4]) {
            std::vector<int> s_in_xorder(static_cast<std::size_t>(n));
            for (std::size_t k = 0; k < x_order.size(); ++k) s_in_xorder[k] = ord_yp[x_order[k]];
            Fenwick fen(static_cast<std::size_t>(n));
            const double d = hoeffding_from_xordered(s_in_xorder, fen);
            flags[4] = std::abs(d) >= std::abs(results[4].statistic) ? 1 : 0;
        }
    });

    for (int t = 0; t < kTests; ++t) {
        if (results[t].failed) continue;
        std::uint64_t count = 0;
        for (const auto& flags : exceed) count += flags[static_cast<std::size_t>(t)];
        results[t].p_value =
            (1.0 + static_cast<double>(count)) / (static_cast<double>(B_perm) + 1.0);
    }
    return results;
}

} // namespace ecc
