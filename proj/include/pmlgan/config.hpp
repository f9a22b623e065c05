#pragma once

// Minimal `key = value` configuration files: one assignment per line,
// '#' starts a comment, blank lines ignored. Typed accessors record which
// keys were consumed so callers can reject unknown ones.

#include <map>
#include <set>
#include <string>
#include <vector>

namespace pmlgan::config {

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text,
                             const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list of numbers.
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<double> get_double_list(
      const std::string& key, const std::vector<double>& fallback) const;

  // Keys present in the file that no accessor has consumed.
  std::vector<std::string> unused_keys() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;

  const std::string* find(const std::string& key) const;
  [[noreturn]] void missing(const std::string& key) const;
};

}  // namespace pmlgan::config
