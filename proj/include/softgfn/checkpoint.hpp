#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

namespace softgfn {

struct Checkpoint {
  nlohmann::json metadata;  // layer shapes, seed, model kind, extra scalars
  std::vector<double> params;
};

/// Writes `<stem>.bin` (little-endian float64 array) and `<stem>.json` (metadata sidecar).
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt, const std::string& stem = "params");
Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::string& stem = "params");

}  // namespace softgfn
