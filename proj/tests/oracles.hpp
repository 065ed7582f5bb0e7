#pragma once

// Reference implementations used only by the tests. Each is written from the
// defining formula, independently of the library code paths it checks:
// quadrature instead of closed forms, bisection instead of rational
// approximations, O(n^2) pair counting instead of the fast rank algorithms.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

inline double simpson(const std::function<double(double)>& f, double lo, double hi,
                      int intervals = 20000) {
    if (intervals % 2 != 0) ++intervals;
    const double h = (hi - lo) / intervals;
    double sum = f(lo) + f(hi);
    for (int k = 1; k < intervals; ++k) sum += f(lo + h * k) * (k % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Inverse CDF by bisection; accuracy limited only by the CDF itself.
inline double normal_ppf(double p) {
    if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("p outside (0,1)");
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct TruncMoments {
    double mean;
    double var;
    double mass;
};

// Moments of N(mu, sigma^2) on [lo, hi] by quadrature; infinite bounds are
// clipped at 12 standard deviations, beyond which the density carries no
// double-precision mass.
inline TruncMoments trunc_moments(double mu, double sigma, double lo, double hi) {
    const double a = std::isinf(lo) ? mu - 12.0 * sigma : lo;
    const double b = std::isinf(hi) ? mu + 12.0 * sigma : hi;
    auto dens = [&](double z) { return normal_pdf((z - mu) / sigma) / sigma; };
    const double mass = simpson(dens, a, b);
    const double m1 = simpson([&](double z) { return z * dens(z); }, a, b) / mass;
    const double m2 = simpson([&](double z) { return z * z * dens(z); }, a, b) / mass;
    return {m1, m2 - m1 * m1, mass};
}

inline double partial_corr(double rxy, double rxz, double ryz) {
    return (rxy - rxz * ryz) / std::sqrt((1.0 - rxz * rxz) * (1.0 - ryz * ryz));
}

// Conditional correlation of (X, Y) given Z in [zlo, zhi] for a trivariate
// Gaussian with unit variances, via the residual decomposition
// X = rxz Z + ex, Y = ryz Z + ey with cov(ex, ey) = rxy - rxz ryz: a
// Zth-interval event changes only the variance of Z.
inline double gaussian_interval_ecc(double rxy, double rxz, double ryz, double zlo, double zhi) {
    const double vz = trunc_moments(0.0, 1.0, zlo, zhi).var;
    const double cxy = rxz * ryz * vz + (rxy - rxz * ryz);
    const double vx = rxz * rxz * vz + (1.0 - rxz * rxz);
    const double vy = ryz * ryz * vz + (1.0 - ryz * ryz);
    return cxy / std::sqrt(vx * vy);
}

// Ten decile-band values of the conditional-correlation curve for the unit
// variance Gaussian model; band edges are population quantiles.
inline std::vector<double> gaussian_decile_curve(double rxy, double rxz, double ryz) {
    std::vector<double> out;
    for (int i = 1; i <= 10; ++i) {
        const double lo =
            i == 1 ? -std::numeric_limits<double>::infinity() : normal_ppf((i - 1) / 10.0);
        const double hi =
            i == 10 ? std::numeric_limits<double>::infinity() : normal_ppf(i / 10.0);
        out.push_back(gaussian_interval_ecc(rxy, rxz, ryz, lo, hi));
    }
    return out;
}

// Central finite-difference gradient.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h_scale = 1e-5) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = h_scale * std::max(1.0, std::abs(x(k)));
        Eigen::VectorXd hi = x, lo = x;
        hi(k) += h;
        lo(k) -= h;
        g(k) = (f(hi) - f(lo)) / (2.0 * h);
    }
    return g;
}

inline double pearson_brute(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double mx = x.mean(), my = y.mean();
    double sxy = 0, sxx = 0, syy = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        sxy += (x(i) - mx) * (y(i) - my);
        sxx += (x(i) - mx) * (x(i) - mx);
        syy += (y(i) - my) * (y(i) - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

// Mid ranks by pairwise counting, O(n^2); `ties` counts i itself.
inline Eigen::VectorXd ranks_brute(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double below = 0, ties = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            below += v(j) < v(i) ? 1.0 : 0.0;
            ties += v(j) == v(i) ? 1.0 : 0.0;
        }
        r(i) = below + 0.5 * (ties + 1.0);
    }
    return r;
}

inline double spearman_brute(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return pearson_brute(ranks_brute(x), ranks_brute(y));
}

// Concordant-minus-discordant pair fraction, O(n^2); continuous data assumed.
inline double kendall_brute(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.size();
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double prod = (x(i) - x(j)) * (y(i) - y(j));
            s += prod > 0 ? 1.0 : (prod < 0 ? -1.0 : 0.0);
        }
    return s / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

// Classic joint-rank D statistic from marginal ranks and below-left counts,
// O(n^2); continuous data assumed (strict ranks).
inline double hoeffding_brute(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.size();
    double d1 = 0, d2 = 0, d3 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double R = 1, S = 1, c = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            R += x(j) < x(i) ? 1.0 : 0.0;
            S += y(j) < y(i) ? 1.0 : 0.0;
            c += (x(j) < x(i) && y(j) < y(i)) ? 1.0 : 0.0;
        }
        d1 += c * (c - 1);
        d2 += (R - 1) * (R - 2) * (S - 1) * (S - 2);
        d3 += (R - 2) * (S - 2) * c;
    }
    const double nn = static_cast<double>(n);
    return 30.0 * ((nn - 2) * (nn - 3) * d1 + d2 - 2 * (nn - 2) * d3) /
           (nn * (nn - 1) * (nn - 2) * (nn - 3) * (nn - 4));
}

inline double equicorr_partial(int p, double rho) { return rho / (1.0 + (p - 2) * rho); }

// Least-squares line fitted to f over the grid points: (intercept, slope).
inline std::pair<double, double> best_line(const std::function<double(double)>& f,
                                           const Eigen::VectorXd& grid) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        sx += grid(i);
        sy += f(grid(i));
        sxx += grid(i) * grid(i);
        sxy += grid(i) * f(grid(i));
    }
    const double slope = (sxy - sx * sy / n) / (sxx - sx * sx / n);
    return {sy / n - slope * sx / n, slope};
}

} // namespace oracle
