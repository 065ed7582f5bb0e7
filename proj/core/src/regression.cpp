#include "eventcorr/regression.hpp"

#include <algorithm>
#include <cmath>

namespace ecc {

namespace {

struct Segment {
    double lo, hi;
    Eigen::Index count;
};

bool in_segment(double v, const Segment& s, bool last) {
    return v >= s.lo && (last ? v <= s.hi : v < s.hi);
}

} // namespace

PiecewiseAffineFit fit_piecewise(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n_bins,
                                 Eigen::Index min_occupancy) {
    if (x.size() != y.size()) throw DimensionMismatchError("x and y differ in length");
    if (n_bins < 2) throw ParseError("piecewise fit needs at least 2 bins");
    if (min_occupancy < 2) throw ParseError("minimum bin occupancy must be at least 2");
    const Eigen::Index n = x.size();
    if (n < 2 * min_occupancy)
        throw InsufficientEventSampleError("too few rows for 2 occupied bins", n);
    const double lo = x.minCoeff();
    const double hi = x.maxCoeff();
    if (!(lo < hi)) throw DegenerateConditioningError("x is constant, no bins to form");

    // Equal-width segments; interior boundaries are closed-left/open-right.
    const double w = (hi - lo) / static_cast<double>(n_bins);
    std::vector<Segment> segs;
    for (int j = 0; j < n_bins; ++j)
        segs.push_back({lo + w * j, j + 1 == n_bins ? hi : lo + w * (j + 1), 0});
    for (Eigen::Index i = 0; i < n; ++i) {
        auto idx = static_cast<std::size_t>((x(i) - lo) / w);
        if (idx >= segs.size()) idx = segs.size() - 1;
        // Guard against floating point placing a value just left of its edge.
        while (idx > 0 && x(i) < segs[idx].lo) --idx;
        while (idx + 1 < segs.size() && x(i) >= segs[idx].hi) ++idx;
        ++segs[idx].count;
    }

    int merges = 0;
    std::size_t j = 0;
    while (j < segs.size()) {
        if (segs[j].count >= min_occupancy) {
            ++j;
            continue;
        }
        if (segs.size() == 2)
            throw Error("bin merging would collapse the fit below 2 bins");
        if (j + 1 < segs.size()) {
            segs[j + 1].lo = segs[j].lo;
            segs[j + 1].count += segs[j].count;
            segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(j));
        } else {
            segs[j - 1].hi = segs[j].hi;
            segs[j - 1].count += segs[j].count;
            segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(j));
            j = segs.size() - 1; // recheck the grown last bin
        }
        ++merges;
    }

    // Full-sample moments feeding the per-bin corrected correlation.
    const double mx = x.mean();
    const double my = y.mean();
    const double n1 = static_cast<double>(n) - 1.0;
    const Eigen::VectorXd xc = x.array() - mx;
    const Eigen::VectorXd yc = y.array() - my;
    const double var_x = xc.squaredNorm() / n1;
    const double var_y = yc.squaredNorm() / n1;
    const double cov_xy = xc.dot(yc) / n1;
    if (!(var_x > 0.0)) throw DegenerateConditioningError("x is constant");
    const double beta_yx = cov_xy / var_x;

    PiecewiseAffineFit fit;
    fit.requested_bins = n_bins;
    fit.merges = merges;
    for (std::size_t s = 0; s < segs.size(); ++s) {
        const bool last = s + 1 == segs.size();
        double sx = 0.0, sy = 0.0;
        Eigen::Index cnt = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!in_segment(x(i), segs[s], last)) continue;
            sx += x(i);
            sy += y(i);
            ++cnt;
        }
        const double bmx = sx / static_cast<double>(cnt);
        const double bmy = sy / static_cast<double>(cnt);
        double vx = 0.0, vy = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!in_segment(x(i), segs[s], last)) continue;
            vx += (x(i) - bmx) * (x(i) - bmx);
            vy += (y(i) - bmy) * (y(i) - bmy);
        }
        vx /= static_cast<double>(cnt) - 1.0;
        vy /= static_cast<double>(cnt) - 1.0;
        if (!(vx > 0.0)) throw DegenerateConditioningError("x is constant within a bin");

        // Corrected correlation with the covariate equal to x: the x slope on
        // itself is 1, so the shift enters the numerator through beta_yx and
        // replaces var(x) by its conditional value in the denominator. A
        // constant y degenerates to a flat piece through the bin mean.
        double rho = 0.0;
        if (var_y > 0.0) {
            const double delta = vx - var_x;
            const double num = cov_xy + beta_yx * delta;
            const double deny = var_y + beta_yx * beta_yx * delta;
            if (!(deny > 0.0))
                throw DegenerateConditioningError("corrected y variance is not positive");
            rho = std::clamp(num / std::sqrt(vx * deny), -1.0, 1.0);
        }

        PiecewiseAffineFit::Bin bin;
        bin.lo = segs[s].lo;
        bin.hi = segs[s].hi;
        bin.mean_x = bmx;
        bin.mean_y = bmy;
        bin.rho = rho;
        bin.slope = vy > 0.0 ? rho * std::sqrt(vy / vx) : 0.0;
        bin.count = cnt;
        fit.bins.push_back(bin);
    }
    return fit;
}

double predict(const PiecewiseAffineFit& fit, double x, bool* extrapolated) {
    if (fit.bins.empty()) throw Error("empty fit");
    if (extrapolated) *extrapolated = false;
    std::size_t idx = fit.bins.size() - 1;
    if (x < fit.bins.front().lo) {
        idx = 0;
        if (extrapolated) *extrapolated = true;
    } else if (x > fit.bins.back().hi) {
        if (extrapolated) *extrapolated = true;
    } else {
        for (std::size_t s = 0; s < fit.bins.size(); ++s) {
            const bool last = s + 1 == fit.bins.size();
            if (x >= fit.bins[s].lo && (last ? x <= fit.bins[s].hi : x < fit.bins[s].hi)) {
                idx = s;
                break;
            }
        }
    }
    const auto& b = fit.bins[idx];
    return b.mean_y + b.slope * (x - b.mean_x);
}

double fit_rmse(const PiecewiseAffineFit& fit, const std::function<double(double)>& truth,
                const Eigen::VectorXd& grid) {
    if (grid.size() == 0) throw DimensionMismatchError("empty evaluation grid");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double e = predict(fit, grid(i)) - truth(grid(i));
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(grid.size()));
}

} // namespace ecc
