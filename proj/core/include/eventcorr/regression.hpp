#pragma once

#include "eventcorr/types.hpp"

#include <functional>

namespace ecc {

/// Piecewise-affine regression of y on x. The x range is cut into equal-width
/// bins; within each bin the corrected conditional correlation (with the
/// covariate equal to x itself) supplies the slope, and the affine piece is
/// anchored at the bin's conditional means.
struct PiecewiseAffineFit {
    struct Bin {
        double lo;
        double hi; // [lo, hi) except the last bin, which is closed
        double mean_x;
        double mean_y;
        double rho;   // conditional correlation within the bin
        double slope; // rho * sd(y | bin) / sd(x | bin)
        Eigen::Index count;
    };
    std::vector<Bin> bins;
    int requested_bins = 0;
    int merges = 0; // under-occupied bins folded into a neighbor
};

/// Bins with fewer than min_occupancy rows are merged rightward (the last bin
/// merges leftward) until every retained bin meets the minimum. Throws when
/// merging would leave fewer than 2 bins.
PiecewiseAffineFit fit_piecewise(const Eigen::VectorXd& x, const Eigen::VectorXd& y, int n_bins,
                                 Eigen::Index min_occupancy = 10);

/// Evaluates the fitted function. Points outside the fitted range extend the
/// nearest bin's affine piece; `extrapolated` reports when that happened.
double predict(const PiecewiseAffineFit& fit, double x, bool* extrapolated = nullptr);

/// Root mean squared deviation from `truth` over the grid points.
double fit_rmse(const PiecewiseAffineFit& fit, const std::function<double(double)>& truth,
                const Eigen::VectorXd& grid);

} // namespace ecc
