#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "mrsynth/losses.hpp"

namespace mrsynth {

/// One generator step of GAN training; serialized as one JSON object per line.
struct TelemetryRecord {
  std::int64_t step = 0;
  std::int64_t images_seen = 0;
  int resolution = 0;
  std::string mode;
  double alpha = 1.0;
  double critic_loss = 0.0;
  double wasserstein = 0.0;
  double gradient_penalty = 0.0;
  double generator_adv = 0.0;
  double generator_total = 0.0;
  ConditionLosses gen_parts;
  ConditionLosses real_parts;
  PerCondition<double> gamma;
  bool conditioning_active = false;
};

void to_json(nlohmann::json& j, const TelemetryRecord& r);
void from_json(const nlohmann::json& j, TelemetryRecord& r);

/// Append-only line-delimited JSON log. A default-constructed log discards.
class TelemetryLog {
 public:
  TelemetryLog() = default;
  explicit TelemetryLog(const std::filesystem::path& path, bool append = false);

  void append(const TelemetryRecord& record);
  bool enabled() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

std::vector<TelemetryRecord> read_telemetry(const std::filesystem::path& path);

}  // namespace mrsynth
