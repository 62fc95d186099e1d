#pragma once

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace resint {

/// Shortest-exact decimal rendering is not required; 17 significant digits
/// round-trip any finite double bit-exactly through strtod.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Row-oriented table with '#'-prefixed metadata comment lines above a
/// header row, and optional trailer comments after the data rows.  This is
/// the on-disk format of every dataset the tool emits.
struct CsvTable {
    std::vector<std::string> comments;  ///< without the leading "# "
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> trailer_comments;
};

inline void write_csv(std::ostream& out, const CsvTable& table) {
    for (const auto& c : table.comments) out << "# " << c << '\n';
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out << ',';
        out << table.header[i];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << format_double(row[i]);
        }
        out << '\n';
    }
    for (const auto& c : table.trailer_comments) out << "# " << c << '\n';
}

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline double parse_double(const std::string& field) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin)
        throw std::invalid_argument("csv: unparsable numeric field '" + field + "'");
    return v;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::size_t start = 1;
            if (start < line.size() && line[start] == ' ') ++start;
            table.comments.push_back(line.substr(start));
            continue;
        }
        if (!have_header) {
            table.header = detail::split(line, ',');
            have_header = true;
            continue;
        }
        const auto fields = detail::split(line, ',');
        if (fields.size() != table.header.size())
            throw std::invalid_argument("csv: row width differs from header");
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) row.push_back(detail::parse_double(f));
        table.rows.push_back(std::move(row));
    }
    if (!have_header) throw std::invalid_argument("csv: missing header row");
    return table;
}

inline CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    return parse_csv(in);
}

}  // namespace resint
