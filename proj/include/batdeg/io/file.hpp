#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace batdeg::io {

/// Whole file as bytes; RuntimeError naming the path when unreadable.
std::string read_file(const std::filesystem::path& path);

/// Writes to `path.tmp` then renames over `path`, so readers see either the
/// old or the new contents, never a prefix.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Splits one CSV line on commas. No quoting: none of the formats need it.
std::vector<std::string> split_csv_line(std::string_view line);

/// Strict decimal parse of a whole field; "NaN" (any case) maps to NaN.
/// Throws ValidationError naming `what` on failure.
double parse_double(std::string_view field, std::string_view what);

/// Shortest text that reads back to the same double; NaN prints as "NaN".
std::string format_double(double v);

} // namespace batdeg::io
