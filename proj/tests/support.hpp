#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mrsynth/networks.hpp"
#include "mrsynth/phantom.hpp"
#include "mrsynth/tensor_dataset.hpp"

namespace mrsynth::testkit {

// Small enough for millisecond forward passes.
inline NetConfig tiny_net() {
  NetConfig cfg;
  cfg.latent_dim = 8;
  cfg.base_resolution = 4;
  cfg.final_resolution = 16;
  cfg.channels_per_stage = {{4, 8}, {8, 8}, {16, 4}};
  cfg.condition_dim = 5;
  cfg.ac_backbone = AcBackbone::kSmallConv;
  cfg.ac_width = 4;
  return cfg;
}

inline TensorDataset phantom_tensors(std::size_t count, int side, std::uint64_t seed) {
  auto spec = PhantomSpec::defaults(side);
  ConditionSpace space;
  return make_tensor_dataset(generate_phantom_dataset(spec, space, count, seed), space, side);
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mrsynth-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mrsynth::testkit
