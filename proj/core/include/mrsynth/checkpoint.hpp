#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "mrsynth/conddata.hpp"
#include "mrsynth/losses.hpp"
#include "mrsynth/networks.hpp"
#include "mrsynth/training.hpp"

namespace mrsynth {

// Checkpoint layout (torch archive, zip container):
//   format          string  "mrsynth-checkpoint"
//   format_version  int     kCheckpointFormatVersion
//   meta            string  JSON: net, space, train, loss, schedule, trainer
//   generator, critic, ac   nested module archives
//   generator_opt, critic_opt, rng_state, data_order   only when trainer state is present
inline constexpr std::int64_t kCheckpointFormatVersion = 1;
inline constexpr const char* kCheckpointFormat = "mrsynth-checkpoint";

struct CheckpointMeta {
  std::int64_t format_version = kCheckpointFormatVersion;
  NetConfig net;
  ConditionSpace space;
  TrainConfig train;
  GanLossConfig loss;
  std::vector<ProgressivePhase> schedule;
  std::optional<TrainerState> trainer;

  /// Generator updates performed so far (0 without trainer state).
  std::int64_t step() const { return trainer ? trainer->generator_steps : 0; }
};

void to_json(nlohmann::json& j, const CheckpointMeta& m);
void from_json(const nlohmann::json& j, CheckpointMeta& m);

/// Optimizer moments and sampling state of an interrupted run.
struct TrainingBlobs {
  torch::optim::Adam* generator_opt = nullptr;
  torch::optim::Adam* critic_opt = nullptr;
  torch::Tensor rng_state;
  torch::Tensor data_order;
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, Generator& generator,
                     Critic& critic, AuxClassifier& ac, const TrainingBlobs* blobs = nullptr);

/// Reads only the header. Throws Error(kVersion) for another format version
/// and Error(kCorrupt) for anything that is not a readable checkpoint.
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

struct LoadedModel {
  CheckpointMeta meta;
  Generator generator{nullptr};
  Critic critic{nullptr};
  AuxClassifier ac{nullptr};
  std::string sha256;
};

/// Builds the networks described by the checkpoint and loads their weights.
LoadedModel load_checkpoint(const std::filesystem::path& path);

/// Loads weights into existing networks (and optimizers / sampling state when
/// `blobs` is given). Throws Error(kConfig) when the stored NetConfig differs.
CheckpointMeta restore_checkpoint(const std::filesystem::path& path, Generator& generator, Critic& critic,
                                  AuxClassifier& ac, TrainingBlobs* blobs = nullptr);

}  // namespace mrsynth
