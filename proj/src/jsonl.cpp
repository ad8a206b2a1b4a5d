#include "selfrat/jsonl.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace selfrat {

namespace fs = std::filesystem;

namespace {

std::string locate(const fs::path& file, std::size_t line) {
  std::string where = file.string();
  if (line > 0) where += ":" + std::to_string(line);
  return where;
}

std::string hex(const unsigned char* data, unsigned int len) {
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(data[i]);
  return out.str();
}

}  // namespace

SchemaError::SchemaError(const fs::path& file, std::size_t line, const std::string& what)
    : Error(locate(file, line) + ": " + what), line_(line) {}

void for_each_jsonl(const fs::path& file, const std::function<void(const Json&, std::size_t)>& fn) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open '" + file.string() + "'");
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json record;
    try {
      record = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw SchemaError(file, line, std::string("malformed record: ") + e.what());
    }
    if (!record.is_object()) throw SchemaError(file, line, "record is not an object");
    fn(record, line);
  }
}

Json read_json_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open '" + file.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(file, 0, std::string("malformed document: ") + e.what());
  }
}

void write_text_atomic(const fs::path& file, std::string_view content) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, file);
}

void write_jsonl(const fs::path& file, const std::vector<Json>& records) {
  std::string text;
  for (const auto& r : records) {
    text += r.dump();
    text += '\n';
  }
  write_text_atomic(file, text);
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  return hex(md.data(), len);
}

std::string sha256_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot open '" + file.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

std::string required_string(const Json& record, std::string_view key, const fs::path& file,
                            std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) throw SchemaError(file, line, "missing field \"" + std::string(key) + "\"");
  if (!it->is_string()) throw SchemaError(file, line, "field \"" + std::string(key) + "\" is not a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const Json& record, std::string_view key,
                                           const fs::path& file, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(file, line, "field \"" + std::string(key) + "\" is not a string");
  return it->get<std::string>();
}

double required_number(const Json& record, std::string_view key, const fs::path& file,
                       std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) throw SchemaError(file, line, "missing field \"" + std::string(key) + "\"");
  if (!it->is_number()) throw SchemaError(file, line, "field \"" + std::string(key) + "\" is not a number");
  return it->get<double>();
}

}  // namespace selfrat
