#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "clop/errors.hpp"

namespace clop::io {

// Shortest decimal form that round-trips the exact double. Keeps every CSV
// and JSON artifact byte-stable across runs of the same build.
inline std::string fmt_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string fmt_size(std::size_t v) { return std::to_string(v); }

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Rows are built cell by cell; every double goes through fmt_double.
class CsvBuilder {
  public:
    explicit CsvBuilder(const std::vector<std::string>& header) {
        append_row_strings(header);
        n_cols_ = header.size();
    }
    CsvBuilder& cell(double v) { return cell_str(fmt_double(v)); }
    CsvBuilder& cell(std::size_t v) { return cell_str(fmt_size(v)); }
    CsvBuilder& cell(const std::string& v) { return cell_str(v); }
    void end_row() {
        if (cells_in_row_ != n_cols_)
            throw Error("csv row has " + std::to_string(cells_in_row_) + " cells, expected " +
                        std::to_string(n_cols_));
        text_ += '\n';
        cells_in_row_ = 0;
    }
    const std::string& str() const {
        if (cells_in_row_ != 0) throw Error("csv row not ended");
        return text_;
    }

  private:
    CsvBuilder& cell_str(const std::string& v) {
        if (cells_in_row_ != 0) text_ += ',';
        text_ += v;
        ++cells_in_row_;
        return *this;
    }
    void append_row_strings(const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i != 0) text_ += ',';
            text_ += row[i];
        }
        text_ += '\n';
    }
    std::string text_;
    std::size_t n_cols_ = 0;
    std::size_t cells_in_row_ = 0;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

// Strict numeric CSV: every data cell must parse fully as a double.
inline CsvTable parse_csv(const std::string& text, const std::string& origin) {
    CsvTable t;
    std::istringstream lines(text);
    std::string line;
    bool first = true;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            t.header = cells;
            first = false;
            continue;
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const std::string& c : cells) {
            double v = 0.0;
            auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc() || res.ptr != c.data() + c.size())
                throw UsageError(origin + ": non-numeric cell '" + c + "'");
            row.push_back(v);
        }
        if (row.size() != t.header.size())
            throw UsageError(origin + ": row with " + std::to_string(row.size()) +
                             " cells under a " + std::to_string(t.header.size()) +
                             "-column header");
        t.rows.push_back(std::move(row));
    }
    if (first) throw UsageError(origin + ": empty file");
    return t;
}

} // namespace clop::io
