// Hierarchical key-value config files: `section.key = value` lines, `#`
// comments. Values are scalars or space-separated lists. The canonical form
// (sorted keys) feeds the config hash that stage artifacts embed.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "regain/checkpoint.hpp"
#include "regain/numerics.hpp"

namespace regain {

class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_text(const std::string& text) {
    KvConfig c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config: missing '=' on line " + std::to_string(lineno));
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string val = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw std::invalid_argument("config: empty key on line " + std::to_string(lineno));
      c.kv_[key] = val;
    }
    return c;
  }

  static KvConfig parse_file(const std::filesystem::path& path) {
    return parse_text(read_text(path));
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  void set(const std::string& key, const std::string& val) { kv_[key] = val; }

  std::string str(const std::string& key, const std::string& def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : it->second;
  }

  std::string str_req(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw std::invalid_argument("config: missing required key " + key);
    return it->second;
  }

  double f64(const std::string& key, double def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : std::stod(it->second);
  }

  long i64(const std::string& key, long def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : std::stol(it->second);
  }

  std::uint64_t u64(const std::string& key, std::uint64_t def) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? def : std::stoull(it->second);
  }

  bool flag(const std::string& key, bool def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
  }

  Vector vecd(const std::string& key, const Vector& def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    Vector out;
    std::istringstream ss(it->second);
    double v;
    while (ss >> v) out.push_back(v);
    return out;
  }

  std::vector<std::uint64_t> vecu(const std::string& key,
                                  const std::vector<std::uint64_t>& def) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return def;
    std::vector<std::uint64_t> out;
    std::istringstream ss(it->second);
    std::uint64_t v;
    while (ss >> v) out.push_back(v);
    return out;
  }

  std::string canonical() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
    return os.str();
  }

  // FNV-1a over the canonical text
  std::uint64_t hash() const {
    const std::string text = canonical();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::string hash_hex() const {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace regain
