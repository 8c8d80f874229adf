#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace grapher::io {

/// Opens `path` for reading; throws MissingInputError if it cannot be opened.
std::ifstream open_input(const std::filesystem::path& path);

/// Calls `fn(line_number, line)` for every line, 1-based, with a trailing '\r' stripped.
/// Blank lines are skipped.
void for_each_line(std::istream& in,
                   const std::function<void(std::size_t, std::string_view)>& fn);

/// Parses one JSONL line, turning nlohmann errors into ParseError.
nlohmann::json parse_json_line(std::string_view line, const std::string& source,
                               std::size_t line_number);

/// Writes via a sibling temporary file and renames over `path`.
void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

std::string read_file(const std::filesystem::path& path);

/// Hex SHA-256 of a byte string / of a file's content.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace grapher::io
