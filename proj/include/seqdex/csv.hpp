#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace seqdex {

/// A numeric table: a header row and a dense body.
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

/// Parses comma-separated numeric data with a mandatory header line. Blank
/// lines are skipped. Throws std::runtime_error with the offending line number
/// on ragged rows or non-numeric cells.
CsvTable parse_csv(std::string_view text);

/// Shortest representation that parses back to the same double.
std::string format_double(double value);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

}  // namespace seqdex
