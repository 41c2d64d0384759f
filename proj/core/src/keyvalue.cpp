#include "l2g/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "l2g/error.hpp"

namespace l2g {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

}  // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << format_key_values(kv);
  if (!os) throw IoError("write failed: " + path.string());
}

std::string format_double(double v) {
  // Shortest representation that round-trips.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

const std::string* FieldReader::find(const std::string& key) {
  auto it = kv_.find(key);
  if (it == kv_.end()) return nullptr;
  used_.push_back(key);
  return &it->second;
}

std::vector<std::string> FieldReader::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv_)
    if (std::find(used_.begin(), used_.end(), k) == used_.end()) out.push_back(k);
  return out;
}

namespace {

template <typename T>
bool parse_number(const std::string& s, T& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

void FieldReader::read(const std::string& key, int& out) {
  if (const auto* v = find(key); v && !parse_number(*v, out))
    fail(key + ": expected integer, got '" + *v + "'");
}

void FieldReader::read(const std::string& key, std::uint64_t& out) {
  if (const auto* v = find(key); v && !parse_number(*v, out))
    fail(key + ": expected unsigned integer, got '" + *v + "'");
}

void FieldReader::read(const std::string& key, double& out) {
  if (const auto* v = find(key); v && !parse_number(*v, out))
    fail(key + ": expected number, got '" + *v + "'");
}

void FieldReader::read(const std::string& key, bool& out) {
  const auto* v = find(key);
  if (!v) return;
  if (*v == "true" || *v == "1") {
    out = true;
  } else if (*v == "false" || *v == "0") {
    out = false;
  } else {
    fail(key + ": expected true/false, got '" + *v + "'");
  }
}

void FieldReader::read(const std::string& key, std::string& out) {
  if (const auto* v = find(key)) out = *v;
}

void FieldReader::read(const std::string& key, std::vector<int>& out) {
  const auto* v = find(key);
  if (!v) return;
  std::vector<int> parsed;
  for (const auto& part : split(*v, ',')) {
    int x = 0;
    if (!parse_number(part, x)) {
      fail(key + ": expected comma-separated integers, got '" + *v + "'");
      return;
    }
    parsed.push_back(x);
  }
  out = std::move(parsed);
}

void FieldReader::read(const std::string& key, std::vector<double>& out) {
  const auto* v = find(key);
  if (!v) return;
  std::vector<double> parsed;
  for (const auto& part : split(*v, ',')) {
    double x = 0;
    if (!parse_number(part, x)) {
      fail(key + ": expected comma-separated numbers, got '" + *v + "'");
      return;
    }
    parsed.push_back(x);
  }
  out = std::move(parsed);
}

}  // namespace l2g
