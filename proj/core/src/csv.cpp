#include "regmem/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "regmem/config.hpp"
#include "regmem/errors.hpp"

#ifndef REGMEM_VERSION
#define REGMEM_VERSION "0.0.0"
#endif

namespace regmem {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

const char* version_string() { return REGMEM_VERSION; }

std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_csv_header(std::ostream& out, const std::string& command, std::uint64_t config_hash,
                      const std::vector<std::string>& extra) {
    out << "# regmem " << version_string() << "\n";
    out << "# command: " << command << "\n";
    out << "# config_hash: " << hex64(config_hash) << "\n";
    for (const auto& e : extra) out << "# " << e << "\n";
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << cells[i];
    }
    out << '\n';
}

void write_csv_row(std::ostream& out, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out << ',';
        out << format_double(values[i]);
    }
    out << '\n';
}

NumericTable parse_numeric_csv(std::istream& in, const std::string& name) {
    NumericTable t;
    std::string line;
    int lineno = 0;
    bool first = true;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        const auto cells = split(s);
        std::vector<double> row;
        bool numeric = true;
        std::size_t bad = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            try {
                row.push_back(parse_double(cells[c], ""));
            } catch (const ConfigError&) {
                numeric = false;
                bad = c;
                break;
            }
        }
        if (!numeric) {
            if (first) {
                t.header = cells;
                width = cells.size();
                first = false;
                continue;
            }
            throw ParseError(name + ": row " + std::to_string(lineno) + ", column " +
                             std::to_string(bad + 1) + ": '" + cells[bad] + "' is not a number");
        }
        if (width == 0) width = row.size();
        if (row.size() != width)
            throw ParseError(name + ": row " + std::to_string(lineno) + " has " +
                             std::to_string(row.size()) + " columns, expected " +
                             std::to_string(width));
        first = false;
        t.rows.push_back(std::move(row));
    }
    if (t.rows.empty()) throw ParseError(name + ": no data rows");
    return t;
}

NumericTable read_numeric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return parse_numeric_csv(in, path);
}

void write_file(const std::string& path, const std::string& content, bool force) {
    namespace fs = std::filesystem;
    if (fs::exists(path) && !force)
        throw OutputExists("refusing to overwrite '" + path + "' (use --force)");
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write '" + path + "'");
    out << content;
    if (!out) throw InvalidArgument("write to '" + path + "' failed");
}

}  // namespace regmem
