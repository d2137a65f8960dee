#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>
#include "mrsynth/conddata.hpp"
#include "mrsynth/losses.hpp"
#include "mrsynth/networks.hpp"
#include "mrsynth/training.hpp"

namespace mrsynth {

/// Everything a training run is parameterized by.
struct RunConfig {
  ConditionSpace space;
  NetConfig net;
  TrainConfig train;
  GanLossConfig loss;
  AugmentConfig augment;

  static RunConfig desk();
  static RunConfig paper();
};

// Key-value run configuration. One `section.key = value` per line, '#' starts
// a comment. Keys missing from the file keep the value of `base`; unknown
// keys are an error. Lists are whitespace separated, channel maps are
// `res:channels` pairs:
//
//   net.final_resolution = 64
//   net.channels = 4:64 8:64 16:32 32:16 64:8
//   train.gan_betas = 0.9 0.99
//   space.orientations = coronal sagittal axial
RunConfig parse_run_config(const std::string& text, const RunConfig& base = RunConfig::desk());
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = RunConfig::desk());
std::string format_run_config(const RunConfig& cfg);

void to_json(nlohmann::json& j, const NetConfig& c);
void from_json(const nlohmann::json& j, NetConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const GanLossConfig& c);
void from_json(const nlohmann::json& j, GanLossConfig& c);
void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);
void to_json(nlohmann::json& j, const AdaptiveWeightState& s);
void from_json(const nlohmann::json& j, AdaptiveWeightState& s);
void to_json(nlohmann::json& j, const ProgressivePhase& p);
void from_json(const nlohmann::json& j, ProgressivePhase& p);
void to_json(nlohmann::json& j, const TrainerState& s);
void from_json(const nlohmann::json& j, TrainerState& s);

}  // namespace mrsynth
