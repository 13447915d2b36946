#include "lfc/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lfc/error.hpp"

namespace lfc {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-')) {
      return false;
    }
  }
  return true;
}

double to_double(const std::string& key, std::string text) {
  text = trim(text);
  if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("config key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  Config cfg;
  cfg.source_ = source;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (!valid_key(key)) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": invalid key '" + key + "'");
    }
    cfg.values_[key] = trim(std::string_view(line).substr(eq + 1));
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void Config::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  if (!valid_key(key)) throw ConfigError("invalid override key '" + key + "'");
  set(key, trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const double v = to_double(key, it->second);
  if (std::isnan(v)) throw ConfigError("config key '" + key + "' is NaN");
  return v;
}

int Config::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  int v = 0;
  const auto& s = it->second;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': '" + s + "' is not an integer");
  }
  return v;
}

std::uint64_t Config::get_seed(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': '" + s + "' is not a non-negative integer");
  }
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& s = it->second;
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config key '" + key + "': '" + s + "' is not a boolean");
}

std::vector<double> Config::get_list(const std::string& key,
                                     const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& s = it->second;
  if (s.find(':') != std::string::npos) {
    const auto parts = split(s, ':');
    if (parts.size() != 3) throw ConfigError("config key '" + key + "': range needs start:stop:step");
    const double start = to_double(key, parts[0]);
    const double stop = to_double(key, parts[1]);
    const double stride = to_double(key, parts[2]);
    if (!(stride > 0.0) || stop < start) {
      throw ConfigError("config key '" + key + "': empty or malformed range");
    }
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((stop - start) / stride + 1e-9));
    // Rounded to 12 decimals so 0.1:2.0:0.1 yields 0.3, not 0.30000000000000004.
    for (long i = 0; i <= n; ++i) {
      out.push_back(std::round((start + i * stride) * 1e12) / 1e12);
    }
    return out;
  }
  std::vector<double> out;
  for (const auto& item : split(s, ',')) {
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      const std::vector<int>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  for (const auto& item : split(it->second, ',')) {
    int v = 0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw ConfigError("config key '" + key + "': '" + item + "' is not an integer");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::pair<double, double>> Config::get_pairs(
    const std::string& key, const std::vector<std::pair<double, double>>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::pair<double, double>> out;
  const std::string& s = it->second;
  if (trim(s).empty() || trim(s) == "none") return out;
  std::size_t pos = 0;
  while (true) {
    const auto open = s.find('(', pos);
    if (open == std::string::npos) break;
    const auto close = s.find(')', open);
    if (close == std::string::npos) throw ConfigError("config key '" + key + "': unbalanced '('");
    const auto parts = split(s.substr(open + 1, close - open - 1), ',');
    if (parts.size() != 2) throw ConfigError("config key '" + key + "': pairs need two entries");
    out.emplace_back(to_double(key, parts[0]), to_double(key, parts[1]));
    pos = close + 1;
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': expected (time, level) pairs");
  return out;
}

void Config::check_known(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace lfc
