#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "softgfn/config.hpp"

namespace softgfn {

std::string version_string();

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool skipped = false;  // enumeration cap exceeded
  double seconds = 0.0;
};

struct VerifyOptions {
  std::size_t random_policies = 10;
  std::size_t random_logits = 5;
  std::uint64_t trajectory_cap = 5'000'000;
  std::uint64_t seed = 0;
};

/// Exact-oracle checks on the configured (enumerable) environment.
std::vector<CheckResult> run_verify(const RunConfig& cfg, const VerifyOptions& opt = {});
nlohmann::json to_json(const std::vector<CheckResult>& checks);

struct RunResult {
  std::filesystem::path dir;
  nlohmann::json summary;
};

/// Output root: $SOFTGFN_OUTPUT_ROOT when set, cfg.run.output otherwise.
std::filesystem::path output_root(const RunConfig& cfg);
std::filesystem::path run_directory(const RunConfig& cfg, std::uint64_t seed);

/// One training run. Writes config.ini, config.json, seed, version, metrics.csv,
/// summary.json and a parameter checkpoint into `dir`.
RunResult train_run(const RunConfig& cfg, std::uint64_t seed, const std::filesystem::path& dir);

/// Tabular checkpoint holding the oracle Q* (lambda = 1) for the configured environment.
void write_optimal_checkpoint(const RunConfig& cfg, const std::filesystem::path& dir);

/// Recomputes exact TV / L1 and Monte-Carlo estimates for a saved run directory.
/// Throws std::runtime_error when the checkpoint is missing.
nlohmann::json eval_checkpoint(const std::filesystem::path& dir, std::uint64_t seed = 0);

}  // namespace softgfn
