#pragma once

// Matrix CSV codec: optional header row, optional leading label column,
// comma-separated decimals, row-major. Numbers are written with 17 significant
// digits so a write/read cycle reproduces every double exactly.

#include "alsi/core.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace alsi {

struct CsvTable {
    std::vector<std::string> header;      // empty when the file has no header row
    std::vector<std::string> row_labels;  // empty when the file has no label column
    Matrix values;
};

struct CsvLayout {
    bool header = true;
    bool row_labels = true;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        auto field = trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (field.size() >= 2 && field.front() == '"' && field.back() == '"') field = field.substr(1, field.size() - 2);
        out.emplace_back(field);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

/// Parses one decimal cell; `where` is used in the error message.
inline double parse_double(std::string_view cell, const std::string& where) {
    cell = detail::trim(cell);
    double v = 0.0;
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw ParseError("non-numeric cell \"" + std::string(cell) + "\" at " + where);
    return v;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline CsvTable read_csv(std::istream& in, CsvLayout layout, const std::string& source = "<stream>") {
    CsvTable t;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    bool have_width = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_fields(line);
        if (layout.header && t.header.empty() && line_no == 1) {
            t.header = std::move(fields);
            width = t.header.size();
            have_width = true;
            continue;
        }
        if (!have_width) {
            width = fields.size();
            have_width = true;
        }
        if (fields.size() != width)
            throw ParseError(source + ": ragged row at line " + std::to_string(line_no) + " (" +
                             std::to_string(fields.size()) + " fields, expected " + std::to_string(width) + ")");
        std::size_t first = 0;
        if (layout.row_labels) {
            t.row_labels.push_back(fields[0]);
            first = 1;
        }
        std::vector<double> row;
        row.reserve(fields.size() - first);
        for (std::size_t c = first; c < fields.size(); ++c)
            row.push_back(parse_double(fields[c], source + " line " + std::to_string(line_no) + ", column " +
                                                      std::to_string(c + 1)));
        rows.push_back(std::move(row));
    }
    const std::size_t cols = have_width ? width - (layout.row_labels ? 1 : 0) : 0;
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

inline CsvTable read_csv_file(const std::string& path, CsvLayout layout) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read_csv(in, layout, path);
}

inline void write_csv(std::ostream& out, const CsvTable& t) {
    if (!t.header.empty()) {
        for (std::size_t j = 0; j < t.header.size(); ++j) out << (j ? "," : "") << t.header[j];
        out << '\n';
    }
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
        bool first = true;
        if (!t.row_labels.empty()) {
            out << t.row_labels[static_cast<std::size_t>(i)];
            first = false;
        }
        for (Eigen::Index j = 0; j < t.values.cols(); ++j) {
            out << (first ? "" : ",") << format_double(t.values(i, j));
            first = false;
        }
        out << '\n';
    }
}

inline void write_csv_file(const std::string& path, const CsvTable& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_csv(out, t);
    if (!out) throw IoError("write failed for " + path);
}

/// Square matrix keyed by item ids: header "id,<ids...>", one labelled row per item.
inline void write_labeled_square(const std::string& path, const std::vector<std::string>& ids, const Matrix& m) {
    CsvTable t;
    t.header.push_back("id");
    t.header.insert(t.header.end(), ids.begin(), ids.end());
    t.row_labels = ids;
    t.values = m;
    write_csv_file(path, t);
}

}  // namespace alsi
