#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fairsignal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Values gathered from flags; environment variables fill any that are unset.
struct CommonOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> steps;
  std::optional<double> beta;
  std::optional<std::string> out_dir;
};

struct EvalOptions {
  CommonOptions common;
  std::optional<std::string> checkpoint;
  bool baseline = false;
};

struct ParetoOptions {
  CommonOptions common;
  std::vector<std::string> agents;  // "BETA=PATH"
};

/// Each command returns the manifest it wrote to <out>/manifest.json.
nlohmann::json cmd_train(const CommonOptions& options, std::ostream& log);
nlohmann::json cmd_eval(const EvalOptions& options, std::ostream& log);
nlohmann::json cmd_pareto(const ParetoOptions& options, std::ostream& log);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

/// Full command-line entry point; maps failures onto the exit-code contract.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fairsignal::cli
