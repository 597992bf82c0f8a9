#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "softgfn/baselines.hpp"
#include "softgfn/dag.hpp"
#include "softgfn/envs.hpp"
#include "softgfn/mlp.hpp"
#include "softgfn/soft_dqn.hpp"

namespace softgfn {

/// Invalid or unknown configuration content.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnvSection {
  std::string kind = "hypergrid";  // hypergrid | bitseq
  int H = 8;
  int D = 2;
  double R0 = 1e-3;
  double R1 = 0.5;
  double R2 = 2.0;
  int n = 12;
  int k = 3;
  int num_modes = 4;
  double reward_exponent = 2.0;
  std::uint64_t modes_seed = 0;
  std::string modes_file;  // empty = generate from modes_seed
  int mode_delta = 0;      // 0 = n / 4

  bool operator==(const EnvSection&) const = default;
};

struct MethodSection {
  std::string name = "mdqn";  // mdqn | softdqn | softdqn-simple | tb | db
  std::vector<std::size_t> hidden{256, 256};
  std::string activation = "leaky-relu";
  double lr = 1e-3;
  std::size_t per_update = 16;
  std::size_t batch = 256;
  double epsilon = 0.0;
  double tau = 0.25;
  std::size_t target_period = 1;
  std::size_t buffer_capacity = 100'000;
  double per_alpha = 0.5;
  double per_beta = 0.0;
  double munchausen_alpha = 0.15;
  double l0 = -100.0;
  double terminal_loss_weight = 1.0;
  bool dueling = false;
  double logz_lr = 0.1;

  bool operator==(const MethodSection&) const = default;
};

struct RunSection {
  std::uint64_t budget = 200'000;  // trajectories
  std::vector<std::uint64_t> seeds{0};
  std::string output = "runs";
  std::uint64_t eval_every = 2'000;
  std::size_t window = 200'000;
  std::size_t mc_samples = 10;
  std::size_t test_set = 256;          // bitseq Spearman test strings
  std::uint64_t exact_state_cap = 1'000'000;  // exact evaluation only below this many states
  bool timing = false;  // write wall time into the CSV (breaks byte-identical reruns)

  bool operator==(const RunSection&) const = default;
};

struct RunConfig {
  EnvSection env;
  MethodSection method;
  RunSection run;

  bool operator==(const RunConfig&) const = default;

  /// Defaults for an environment preset (hypergrid | hypergrid-hard | bitseq) and method.
  static RunConfig preset(const std::string& env_preset, const std::string& method);

  void validate() const;
  nlohmann::json to_json() const;
  std::string to_ini() const;
  /// FNV-1a of the canonical JSON without the run output directory and seeds.
  std::string hash() const;
};

/// Sectioned JSON object {env:{...}, method:{...}, run:{...}} from either
/// JSON text or `[section]` / `key = value` text.
nlohmann::json parse_config_text(const std::string& text);
/// Resolve a sectioned object: preset defaults for its env kind and method,
/// then every given key. Unknown sections or keys throw ConfigError.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& file);

std::unique_ptr<Environment> make_environment(const RunConfig& cfg);
/// Mode set of a bit-sequence config (read from file or generated).
std::vector<std::string> config_modes(const EnvSection& env);

bool is_q_method(const std::string& name);
SoftDqnConfig soft_dqn_config(const RunConfig& cfg);
BaselineConfig baseline_config(const RunConfig& cfg);
MlpSpec hidden_spec(const RunConfig& cfg, std::uint64_t seed);

}  // namespace softgfn
