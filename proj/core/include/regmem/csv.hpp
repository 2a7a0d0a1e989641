#pragma once

// Comma-separated output with `#` comment headers, and a strict numeric
// matrix reader for weights, states and input vectors.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace regmem {

const char* version_string();

/// Standard comment header: tool version, config hash, command, extra lines.
void write_csv_header(std::ostream& out, const std::string& command, std::uint64_t config_hash,
                      const std::vector<std::string>& extra = {});

/// Joins cells with commas; doubles in shortest round-trip form.
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);
void write_csv_row(std::ostream& out, const std::vector<double>& values);

struct NumericTable {
    std::vector<std::string> header;          ///< empty when the file had none
    std::vector<std::vector<double>> rows;
};

/// Reads a numeric CSV. `#` lines and blank lines are skipped; a first
/// non-numeric row is taken as the header. Throws ParseError naming the row
/// and column of the first bad cell or ragged row.
NumericTable read_numeric_csv(const std::string& path);
NumericTable parse_numeric_csv(std::istream& in, const std::string& name);

/// Writes `content` to `path`, refusing to replace an existing file unless
/// `force`. Throws OutputExists or InvalidArgument.
void write_file(const std::string& path, const std::string& content, bool force);

std::string hex64(std::uint64_t v);

}  // namespace regmem
