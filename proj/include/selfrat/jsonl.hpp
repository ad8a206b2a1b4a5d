#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "selfrat/label.hpp"

namespace selfrat {

using Json = nlohmann::ordered_json;

/// A record that failed to parse or validate. `line` is 1-based; 0 means
/// the error is not tied to a line.
class SchemaError : public Error {
 public:
  SchemaError(const std::filesystem::path& file, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Calls `fn(record, line_number)` for every non-blank line. Lines that are
/// not a JSON object raise SchemaError with the line number.
void for_each_jsonl(const std::filesystem::path& file,
                    const std::function<void(const Json&, std::size_t)>& fn);

Json read_json_file(const std::filesystem::path& file);

/// Writes to a sibling temp file, then renames over `file`.
void write_text_atomic(const std::filesystem::path& file, std::string_view content);
void write_jsonl(const std::filesystem::path& file, const std::vector<Json>& records);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& file);

// Field accessors that throw SchemaError naming the field.
std::string required_string(const Json& record, std::string_view key,
                            const std::filesystem::path& file, std::size_t line);
std::optional<std::string> optional_string(const Json& record, std::string_view key,
                                           const std::filesystem::path& file, std::size_t line);
double required_number(const Json& record, std::string_view key,
                       const std::filesystem::path& file, std::size_t line);

}  // namespace selfrat
