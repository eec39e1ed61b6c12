#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "agridrive/errors.hpp"

namespace agridrive::csv {

// Shortest representation that round-trips a double exactly. All tabular
// output goes through this so that re-parsing a file reproduces bit-identical
// values (the trace replay tests depend on it).
inline std::string format(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    return line;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw IoError("csv: no column named '" + name + "'");
    }
};

inline void write_table(std::ostream& os, const Table& t) {
    os << join(t.header) << '\n';
    for (const auto& row : t.rows) {
        std::vector<std::string> cells;
        cells.reserve(row.size());
        for (double v : row) cells.push_back(format(v));
        os << join(cells) << '\n';
    }
}

inline void write_table_file(const std::string& path, const Table& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    write_table(f, t);
    if (!f) throw IoError("write failed: " + path);
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

inline Table read_table(std::istream& is) {
    Table t;
    std::string line;
    if (!std::getline(is, line)) throw IoError("csv: empty input");
    t.header = split_line(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto cells = split_line(line);
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(std::strtod(c.c_str(), nullptr));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline Table read_table_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for reading: " + path);
    return read_table(f);
}

}  // namespace agridrive::csv
