#pragma once

// Plain-text exchange formats. CSV: header row, '.' decimals, LF endings,
// shortest round-trip number formatting. Networks as JSON objects
// {d, N, t, eps, metric?, W (row-major), b}.

#include "hopfcole/core.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace hopfcole::io {

/// Shortest decimal that parses back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);

/// Strict parse of a whole field; throws Error on trailing characters.
double parse_double(const std::string& field);

/// Columns y_0 .. y_{d-1}, g.
void write_support_csv(std::ostream& out, const core::SupportSet& support);
core::SupportSet read_support_csv(std::istream& in);
void save_support_csv(const std::filesystem::path& path, const core::SupportSet& support);
core::SupportSet load_support_csv(const std::filesystem::path& path);

nlohmann::json network_to_json(const core::HJNetwork& net);
core::HJNetwork network_from_json(const nlohmann::json& j);

using Cell = std::variant<std::monostate, double, long long, std::string>;

/// Rectangular table written as CSV; empty cells for std::monostate.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    void add_row(std::vector<Cell> row);
};

void write_csv(std::ostream& out, const Table& table);

} // namespace hopfcole::io
