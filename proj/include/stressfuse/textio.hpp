#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stressfuse {

/// 17 significant digits: enough to reproduce any double exactly on reload.
std::string format_double17(double value);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

bool try_parse_double(std::string_view text, double& out);

/// Strict parse; `context` names the offending location in the error.
double parse_double(std::string_view text, std::string_view context);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Comma-delimited, first row is the header. Handles double-quoted cells
/// with "" escapes and tolerates trailing \r.
CsvTable read_csv(const std::filesystem::path& path);

/// Same grammar, from in-memory text; `context` names the source in errors.
CsvTable read_csv_text(std::string_view text, std::string_view context);

std::vector<std::string> split_csv_line(const std::string& line);

/// Wraps the cell in quotes when it needs them (comma, quote, newline).
std::string csv_quote(const std::string& cell);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

} // namespace stressfuse
