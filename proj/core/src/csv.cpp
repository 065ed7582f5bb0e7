#include "eventcorr/csv.hpp"

#include "eventcorr/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ecc {

Eigen::Index Table::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<Eigen::Index>(i);
    return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
    const std::string t = trim(cell);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

} // namespace

Table read_csv_text(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(origin + ": empty input, header row required", 1);
    auto header = split_line(line);
    for (auto& h : header) h = trim(h);
    if (header.empty() || header[0].empty())
        throw ParseError(origin + ": malformed header", 1);

    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    bool has_label_col = false;
    bool decided_label = false;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != header.size())
            throw ParseError(origin + ": line " + std::to_string(lineno) + " has " +
                                 std::to_string(cells.size()) + " fields, header has " +
                                 std::to_string(header.size()),
                             lineno);
        if (!decided_label) {
            double tmp;
            has_label_col = !parse_double(cells[0], tmp);
            decided_label = true;
        }
        std::size_t start = has_label_col ? 1 : 0;
        if (has_label_col) labels.push_back(trim(cells[0]));
        std::vector<double> row(cells.size() - start);
        for (std::size_t c = start; c < cells.size(); ++c) {
            if (!parse_double(cells[c], row[c - start]))
                throw ParseError(origin + ": line " + std::to_string(lineno) +
                                     ", column '" + header[c] + "': not a number: '" +
                                     trim(cells[c]) + "'",
                                 lineno);
        }
        rows.push_back(std::move(row));
    }

    Table t;
    std::size_t start = has_label_col ? 1 : 0;
    t.columns.assign(header.begin() + start, header.end());
    if (has_label_col) {
        t.label_name = header[0];
        t.label_column = std::move(labels);
    }
    t.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < t.columns.size(); ++c)
            t.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return t;
}

Table read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return read_csv_text(ss.str(), path);
}

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

std::string to_csv_text(const Table& table) {
    std::ostringstream out;
    bool first = true;
    if (!table.label_name.empty()) {
        out << table.label_name;
        first = false;
    }
    for (const auto& c : table.columns) {
        if (!first) out << ',';
        out << c;
        first = false;
    }
    out << '\n';
    for (Eigen::Index r = 0; r < table.rows(); ++r) {
        first = true;
        if (!table.label_name.empty()) {
            out << (static_cast<std::size_t>(r) < table.label_column.size() ? table.label_column[r] : "");
            first = false;
        }
        for (Eigen::Index c = 0; c < table.cols(); ++c) {
            if (!first) out << ',';
            out << format_number(table.data(r, c));
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

void write_csv(const std::string& path, const Table& table) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open '" + path + "' for writing");
    f << to_csv_text(table);
}

} // namespace ecc
