#pragma once

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace mixres::cli {

/// Raised for malformed or invalid configuration; maps to exit code 1.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Loads .toml (flat tables, scalar values, single-line arrays) or .json.
nlohmann::json load_config_file(const std::filesystem::path& path);

/// Parses the TOML subset used by the config files: # comments,
/// [section] tables one level deep, key = value with strings, booleans,
/// integers, floats and single-line scalar arrays.
nlohmann::json parse_toml(const std::string& text);

/// Unknown keys are hard errors.
void check_known_keys(const nlohmann::json& obj,
                      const std::set<std::string>& allowed,
                      const std::string& context);

double get_double(const nlohmann::json& obj, const std::string& key,
                  double fallback);
int get_int(const nlohmann::json& obj, const std::string& key, int fallback);
bool get_bool(const nlohmann::json& obj, const std::string& key, bool fallback);
std::string get_string(const nlohmann::json& obj, const std::string& key,
                       const std::string& fallback);
std::vector<int> get_int_list(const nlohmann::json& obj, const std::string& key,
                              const std::vector<int>& fallback);
std::vector<std::uint64_t> get_u64_list(const nlohmann::json& obj,
                                        const std::string& key,
                                        const std::vector<std::uint64_t>& fallback);
std::vector<double> get_double_list(const nlohmann::json& obj,
                                    const std::string& key,
                                    const std::vector<double>& fallback);

}  // namespace mixres::cli
