#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tag2cred::io {

using json = nlohmann::json;

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);
bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);

std::vector<std::string> split_lines(std::string_view text);

/// Calls `fn` for each non-blank line of a JSONL file; `line_no` is 1-based.
void for_each_jsonl(const std::string& path,
                    const std::function<void(const json&, std::size_t line_no)>& fn);
std::string to_jsonl(const std::vector<json>& rows);

// RFC 4180 CSV.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

/// Shortest round-trip decimal rendering of a double.
std::string fmt_double(double v);
/// Fixed-precision rendering for report tables.
std::string fmt_fixed(double v, int digits);

}  // namespace tag2cred::io
