#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace l2g {

// Ordered key=value lines. Blank lines and lines starting with '#' are
// ignored on read.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& origin);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);

// Typed field access collecting problems instead of throwing, so a caller
// can report every bad field at once.
class FieldReader {
 public:
  explicit FieldReader(const KeyValues& kv) : kv_(kv) {}

  void read(const std::string& key, int& out);
  void read(const std::string& key, std::uint64_t& out);
  void read(const std::string& key, double& out);
  void read(const std::string& key, bool& out);
  void read(const std::string& key, std::string& out);
  void read(const std::string& key, std::vector<int>& out);
  void read(const std::string& key, std::vector<double>& out);

  void fail(const std::string& message) { errors_.push_back(message); }
  const std::vector<std::string>& errors() const { return errors_; }
  // Keys present in the input that no read() asked for.
  std::vector<std::string> unused_keys() const;

 private:
  const std::string* find(const std::string& key);

  const KeyValues& kv_;
  std::vector<std::string> used_;
  std::vector<std::string> errors_;
};

std::string format_double(double v);
std::string join_ints(const std::vector<int>& v);
std::string join_doubles(const std::vector<double>& v);

}  // namespace l2g
