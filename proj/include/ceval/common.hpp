#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ceval {

/// Base for every error the harness raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs or configuration violate a documented contract. Maps to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A raw dataset label has no entry in the dataset's label map.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Filesystem failures (unreadable input, unwritable output).
class IoError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Splits into lines on LF, dropping a trailing CR from each line.
std::vector<std::string> split_lines(std::string_view text);

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);
std::string to_lower(std::string_view s);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// ISO-8601 UTC, second resolution.
std::string format_utc(std::int64_t unix_seconds);
std::int64_t now_unix_seconds();

/// Half-away-from-zero rounding to `digits` decimals, as printed in report tables.
double round_to(double value, int digits);

/// Fixed-point formatting, e.g. format_fixed(0.75971, 4) == "0.7597".
std::string format_fixed(double value, int digits);

}  // namespace ceval
