#include "pmlgan/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pmlgan::config {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto begin = s.find_first_not_of(ws);
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

double to_double(const std::string& key, const std::string& raw) {
  std::size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(raw, &consumed);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' is not a number: '" +
                             raw + "'");
  }
  if (consumed != raw.size())
    throw std::runtime_error("config: key '" + key +
                             "' has trailing characters: '" + raw + "'");
  return value;
}

long long to_int(const std::string& key, const std::string& raw) {
  std::size_t consumed = 0;
  long long value = 0;
  try {
    value = std::stoll(raw, &consumed);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key +
                             "' is not an integer: '" + raw + "'");
  }
  if (consumed != raw.size())
    throw std::runtime_error("config: key '" + key +
                             "' has trailing characters: '" + raw + "'");
  return value;
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_string(text.str(), path);
}

Config Config::parse_string(const std::string& text,
                            const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": empty key");
    if (!cfg.values_.emplace(key, value).second)
      throw std::runtime_error(origin + ":" + std::to_string(line_no) +
                               ": duplicate key '" + key + "'");
  }
  return cfg;
}

bool Config::has(const std::string& key) const {
  return values_.count(key) != 0;
}

const std::string* Config::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

void Config::missing(const std::string& key) const {
  throw std::runtime_error(origin_ + ": missing required key '" + key + "'");
}

std::string Config::get_string(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) missing(key);
  return *v;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double Config::get_double(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) missing(key);
  return to_double(key, *v);
}

double Config::get_double(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  return v ? to_double(key, *v) : fallback;
}

long long Config::get_int(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) missing(key);
  return to_int(key, *v);
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const std::string* v = find(key);
  return v ? to_int(key, *v) : fallback;
}

std::size_t Config::get_size(const std::string& key,
                             std::size_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  long long value = to_int(key, *v);
  if (value < 0)
    throw std::runtime_error("config: key '" + key +
                             "' must be non-negative");
  return static_cast<std::size_t>(value);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1") return true;
  if (*v == "false" || *v == "0") return false;
  throw std::runtime_error("config: key '" + key +
                           "' must be true, false, 1, or 0; got '" + *v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  const std::string* v = find(key);
  if (!v) missing(key);
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    auto pos = v->find(',', start);
    std::string piece = trim(v->substr(
        start, pos == std::string::npos ? std::string::npos : pos - start));
    if (piece.empty())
      throw std::runtime_error("config: key '" + key +
                               "' has an empty list element");
    out.push_back(to_double(key, piece));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

std::vector<double> Config::get_double_list(
    const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  return get_double_list(key);
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) out.push_back(key);
  }
  return out;
}

}  // namespace pmlgan::config
