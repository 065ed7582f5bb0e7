#pragma once

#include "eventcorr/types.hpp"

#include <limits>
#include <string>
#include <vector>

namespace ecc {

/// Declarative event over covariate columns.
///
/// Canonical text forms (CLI): `gt:Z:1.5`, `lt:Z:0`, `band:Z:0.4:0.1`,
/// `rect:Z1:-1:1,Z2:0:2`, `all`. Column names refer to the input header.
struct EventSpec {
    enum class Kind { all, threshold_above, threshold_below, quantile_band, rectangle };

    struct ColumnBounds {
        std::string column;
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
    };

    Kind kind = Kind::all;
    std::string column;       // threshold / band target
    double threshold = 0.0;   // threshold kinds
    double upper = 1.0;       // band upper quantile i, 0 < i <= 1
    double width = 0.1;       // band width, 0 < width <= i
    std::vector<ColumnBounds> bounds; // rectangle

    static EventSpec all();
    static EventSpec above(std::string column, double z);
    static EventSpec below(std::string column, double z);
    static EventSpec band(std::string column, double upper, double width = 0.1);
    static EventSpec rect(std::vector<ColumnBounds> bounds);

    /// Parses the canonical text form. Throws ParseError on malformed input.
    static EventSpec parse(const std::string& text);
    std::string to_text() const;
};

/// Type-7 interpolated quantile of a column (the widespread default).
double quantile_type7(const Eigen::VectorXd& values, double p);

/// Row membership of the event. Quantile bands use empirical quantiles of the
/// full column passed here. Bands are closed-left/open-right except the final
/// band (upper == 1), which is closed, so a decile sweep partitions exactly.
/// Throws InsufficientEventSampleError when nothing is selected.
std::vector<bool> event_mask(const Eigen::MatrixXd& data,
                             const std::vector<std::string>& columns,
                             const EventSpec& event);

/// Overload resolving the event against the sample's own column names.
std::vector<bool> event_mask(const Sample& sample, const EventSpec& event);

/// Bands i in {width, 2*width, ..., 1} (ten for width 0.1).
std::vector<std::pair<double, EventSpec>> decile_sweep(const std::string& column, double width = 0.1);

Eigen::Index count_mask(const std::vector<bool>& mask);

} // namespace ecc
