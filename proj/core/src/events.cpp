#include "eventcorr/events.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ecc {

EventSpec EventSpec::all() {
    return EventSpec{};
}

EventSpec EventSpec::above(std::string column, double z) {
    EventSpec e;
    e.kind = Kind::threshold_above;
    e.column = std::move(column);
    e.threshold = z;
    return e;
}

EventSpec EventSpec::below(std::string column, double z) {
    EventSpec e;
    e.kind = Kind::threshold_below;
    e.column = std::move(column);
    e.threshold = z;
    return e;
}

EventSpec EventSpec::band(std::string column, double upper, double width) {
    if (!(upper > 0.0 && upper <= 1.0) || !(width > 0.0 && width <= upper))
        throw ParseError("quantile band requires 0 < i <= 1 and 0 < width <= i");
    EventSpec e;
    e.kind = Kind::quantile_band;
    e.column = std::move(column);
    e.upper = upper;
    e.width = width;
    return e;
}

EventSpec EventSpec::rect(std::vector<ColumnBounds> bounds) {
    if (bounds.empty()) throw ParseError("rectangle event needs at least one column");
    for (const auto& b : bounds)
        if (!(b.lo < b.hi)) throw ParseError("rectangle bounds must satisfy lo < hi on " + b.column);
    EventSpec e;
    e.kind = Kind::rectangle;
    e.bounds = std::move(bounds);
    return e;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_num(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("event spec: bad " + what + " '" + s + "'");
    }
}

} // namespace

EventSpec EventSpec::parse(const std::string& text) {
    if (text == "all") return all();
    auto parts = split(text, ':');
    if (parts.size() == 3 && parts[0] == "gt") return above(parts[1], parse_num(parts[2], "threshold"));
    if (parts.size() == 3 && parts[0] == "lt") return below(parts[1], parse_num(parts[2], "threshold"));
    if (parts.size() == 4 && parts[0] == "band")
        return band(parts[1], parse_num(parts[2], "band upper quantile"), parse_num(parts[3], "band width"));
    if (parts[0] == "rect") {
        std::string rest = text.substr(5);
        std::vector<ColumnBounds> bounds;
        for (const auto& item : split(rest, ',')) {
            auto f = split(item, ':');
            if (f.size() != 3) throw ParseError("rectangle entry '" + item + "' must be col:lo:hi");
            bounds.push_back({f[0], parse_num(f[1], "lower bound"), parse_num(f[2], "upper bound")});
        }
        return rect(std::move(bounds));
    }
    throw ParseError("unrecognized event spec '" + text + "'");
}

std::string EventSpec::to_text() const {
    std::ostringstream out;
    switch (kind) {
    case Kind::all:
        return "all";
    case Kind::threshold_above:
        out << "gt:" << column << ':' << threshold;
        return out.str();
    case Kind::threshold_below:
        out << "lt:" << column << ':' << threshold;
        return out.str();
    case Kind::quantile_band:
        out << "band:" << column << ':' << upper << ':' << width;
        return out.str();
    case Kind::rectangle: {
        out << "rect:";
        for (std::size_t i = 0; i < bounds.size(); ++i) {
            if (i) out << ',';
            out << bounds[i].column << ':' << bounds[i].lo << ':' << bounds[i].hi;
        }
        return out.str();
    }
    }
    return "all";
}

double quantile_type7(const Eigen::VectorXd& values, double p) {
    const Eigen::Index n = values.size();
    if (n == 0) throw DegenerateConditioningError("quantile of empty vector");
    std::vector<double> v(values.data(), values.data() + n);
    std::sort(v.begin(), v.end());
    if (p <= 0.0) return v.front();
    if (p >= 1.0) return v.back();
    const double h = (static_cast<double>(n) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - std::floor(h);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

namespace {

Eigen::Index find_column(const std::vector<std::string>& columns, const std::string& name) {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<Eigen::Index>(i);
    throw ParseError("event references unknown column '" + name + "'");
}

} // namespace

std::vector<bool> event_mask(const Eigen::MatrixXd& data,
                             const std::vector<std::string>& columns,
                             const EventSpec& event) {
    const Eigen::Index n = data.rows();
    std::vector<bool> mask(static_cast<std::size_t>(n), true);
    switch (event.kind) {
    case EventSpec::Kind::all:
        break;
    case EventSpec::Kind::threshold_above: {
        auto c = data.col(find_column(columns, event.column));
        for (Eigen::Index i = 0; i < n; ++i) mask[static_cast<std::size_t>(i)] = c(i) > event.threshold;
        break;
    }
    case EventSpec::Kind::threshold_below: {
        auto c = data.col(find_column(columns, event.column));
        for (Eigen::Index i = 0; i < n; ++i) mask[static_cast<std::size_t>(i)] = c(i) < event.threshold;
        break;
    }
    case EventSpec::Kind::quantile_band: {
        Eigen::VectorXd c = data.col(find_column(columns, event.column));
        const double lo = quantile_type7(c, event.upper - event.width);
        const double hi = quantile_type7(c, event.upper);
        const bool final_band = event.upper >= 1.0 - 1e-12;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double z = c(i);
            mask[static_cast<std::size_t>(i)] = final_band ? (z >= lo && z <= hi) : (z >= lo && z < hi);
        }
        break;
    }
    case EventSpec::Kind::rectangle: {
        for (const auto& b : event.bounds) {
            auto c = data.col(find_column(columns, b.column));
            for (Eigen::Index i = 0; i < n; ++i) {
                auto idx = static_cast<std::size_t>(i);
                mask[idx] = mask[idx] && c(i) >= b.lo && c(i) <= b.hi;
            }
        }
        break;
    }
    }
    if (count_mask(mask) == 0)
        throw InsufficientEventSampleError("event '" + event.to_text() + "' selects no rows", 0);
    return mask;
}

std::vector<bool> event_mask(const Sample& sample, const EventSpec& event) {
    return event_mask(sample.data, sample.columns, event);
}

std::vector<std::pair<double, EventSpec>> decile_sweep(const std::string& column, double width) {
    if (!(width > 0.0 && width <= 1.0)) throw ParseError("sweep width must lie in (0,1]");
    std::vector<std::pair<double, EventSpec>> out;
    const int k = static_cast<int>(std::llround(1.0 / width));
    for (int i = 1; i <= k; ++i) {
        const double upper = std::min(1.0, i * width);
        out.emplace_back(upper, EventSpec::band(column, upper, width));
    }
    return out;
}

Eigen::Index count_mask(const std::vector<bool>& mask) {
    Eigen::Index c = 0;
    for (bool b : mask) c += b ? 1 : 0;
    return c;
}

} // namespace ecc
