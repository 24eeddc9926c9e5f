#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cdstack {

// Comma-separated UTF-8 text, one header row, optional leading '#' comment
// lines (used to embed run provenance). No quoting or escaping: values in
// this pipeline are plain numbers and identifiers.
struct CsvTable {
    std::vector<std::string> comments;  // without the leading '#'
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column_index(const std::string& name) const;  // npos when absent
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// strict double parse; throws DataError naming row/column on failure
double parse_cell(const std::string& cell, std::size_t row, const std::string& col_name);

std::string format_double(double v);  // shortest round-trip

}  // namespace cdstack
