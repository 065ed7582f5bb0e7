#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace ecc {

/// Column-labeled numeric table. Non-numeric columns (dates) are kept as
/// strings in `labels` keyed by column name; every other column is numeric.
struct Table {
    std::vector<std::string> columns;              // numeric column names, in file order
    Eigen::MatrixXd data;                          // rows x numeric columns
    std::vector<std::string> label_column;         // optional leading text column values
    std::string label_name;                        // its header name, empty if absent

    Eigen::Index rows() const { return data.rows(); }
    Eigen::Index cols() const { return data.cols(); }
    Eigen::Index column_index(const std::string& name) const;  // -1 if missing
};

/// Reads a comma-separated file: mandatory header row, `.` decimals, UTF-8.
/// A single leading non-numeric column (for example an ISO date) is accepted
/// and preserved as the label column. Any other non-numeric cell raises
/// ParseError with its 1-based line number.
Table read_csv(const std::string& path);
Table read_csv_text(const std::string& text, const std::string& origin = "<memory>");

/// Writes with 9 significant digits.
void write_csv(const std::string& path, const Table& table);
std::string to_csv_text(const Table& table);

/// Formats one number with 9 significant digits (CLI output contract).
std::string format_number(double value);

} // namespace ecc
