#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <nlohmann/json.hpp>

namespace mixres::cli {

inline constexpr const char* kVersion = "mixres 0.1.0";

struct GlobalOptions {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed_override;
};

int cmd_simulate_bounds(const nlohmann::json& cfg, const GlobalOptions& opts);
int cmd_tightness(const nlohmann::json& cfg, const GlobalOptions& opts);
int cmd_toy(const nlohmann::json& cfg, const GlobalOptions& opts);
int cmd_train(const nlohmann::json& cfg, const GlobalOptions& opts);
int cmd_storage(int s, int t, double r, const GlobalOptions& opts);

/// Full CLI entry point; returns the process exit code (0 ok, 1 config
/// error, 2 runtime error).
int run_main(int argc, char** argv);

}  // namespace mixres::cli
