#pragma once

// Flat key/value configuration with dotted keys:
//
//   # comment
//   plant.t_g = 0.10
//   scenario.steps = (4, -0.03), (12, 0.03)
//   tune.kp = 0.1:2.0:0.1          # inclusive range start:stop:step
//
// Later assignments (and command-line overrides) replace earlier ones.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lfc {

class Config {
 public:
  static Config parse(std::string_view text, const std::string& source = "<string>");
  static Config load(const std::filesystem::path& path);

  // "key=value" override; throws ConfigError when malformed.
  void apply_override(std::string_view assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  std::vector<std::pair<double, double>> get_pairs(
      const std::string& key, const std::vector<std::pair<double, double>>& fallback) const;

  // Throws ConfigError naming the first key not in `known`.
  void check_known(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::string source_;
};

}  // namespace lfc
