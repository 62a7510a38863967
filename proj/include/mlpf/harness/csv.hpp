#pragma once

// Self-describing CSV: a "# schema=<name>/<version>" line, a header row, then
// data rows. Doubles are written with 17 significant digits so that a table
// written and parsed back compares equal.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mlpf::csv {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view s) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::invalid_argument("csv: not a number: '" + std::string(s) + "'");
    return v;
}

inline long long parse_int(std::string_view s) {
    long long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::invalid_argument("csv: not an integer: '" + std::string(s) + "'");
    return v;
}

struct Table {
    std::string schema;  // e.g. "mlpf.summary/1"
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::invalid_argument("csv: no column '" + std::string(name) + "'");
    }
};

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.emplace_back(line.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline void write(std::ostream& os, const Table& t) {
    os << "# schema=" << t.schema << '\n';
    for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
    os << '\n';
    for (const auto& r : t.rows) {
        if (r.size() != t.header.size()) throw std::logic_error("csv: row width mismatch");
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i].find_first_of(",\n") != std::string::npos)
                throw std::invalid_argument("csv: field contains a separator");
            os << (i ? "," : "") << r[i];
        }
        os << '\n';
    }
}

inline void write_file(const std::filesystem::path& p, const Table& t) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    write(os, t);
    if (!os) throw std::runtime_error("write failed: " + p.string());
}

inline Table read(std::istream& is) {
    Table t;
    std::string line;
    if (!std::getline(is, line) || line.rfind("# schema=", 0) != 0)
        throw std::invalid_argument("csv: missing schema line");
    t.schema = line.substr(9);
    if (!std::getline(is, line)) throw std::invalid_argument("csv: missing header row");
    t.header = split(line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto r = split(line);
        if (r.size() != t.header.size())
            throw std::invalid_argument("csv: row has " + std::to_string(r.size()) +
                                        " fields, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(r));
    }
    return t;
}

inline Table read_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    return read(is);
}

}  // namespace mlpf::csv
