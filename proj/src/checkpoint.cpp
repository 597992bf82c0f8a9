#include "softgfn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace softgfn {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt, const std::string& stem) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream bin(dir / (stem + ".bin"), std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write checkpoint in " + dir.string());
    bin.write(reinterpret_cast<const char*>(ckpt.params.data()),
              static_cast<std::streamsize>(ckpt.params.size() * sizeof(double)));
  }
  nlohmann::json meta = ckpt.metadata;
  meta["num_params"] = ckpt.params.size();
  meta["dtype"] = "float64-le";
  std::ofstream js(dir / (stem + ".json"));
  js << meta.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir, const std::string& stem) {
  const auto bin_path = dir / (stem + ".bin");
  const auto json_path = dir / (stem + ".json");
  std::ifstream js(json_path);
  std::ifstream bin(bin_path, std::ios::binary);
  if (!js || !bin) throw std::runtime_error("missing checkpoint files in " + dir.string());
  Checkpoint ckpt;
  ckpt.metadata = nlohmann::json::parse(js);
  const auto n = ckpt.metadata.at("num_params").get<std::size_t>();
  const auto bytes = std::filesystem::file_size(bin_path);
  if (bytes != n * sizeof(double))
    throw std::runtime_error("checkpoint size mismatch: expected " + std::to_string(n) + " parameters");
  ckpt.params.resize(n);
  bin.read(reinterpret_cast<char*>(ckpt.params.data()), static_cast<std::streamsize>(bytes));
  return ckpt;
}

}  // namespace softgfn
