#include "mrsynth/telemetry.hpp"

#include <limits>

#include "mrsynth/error.hpp"

namespace mrsynth {

namespace {

nlohmann::json per_condition(const PerCondition<double>& v) {
  return {{"iop", v.iop}, {"te", v.te}, {"tr", v.tr}};
}

// Non-finite values are written as null.
double number(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

PerCondition<double> per_condition(const nlohmann::json& j) {
  return {number(j.at("iop")), number(j.at("te")), number(j.at("tr"))};
}

}  // namespace

void to_json(nlohmann::json& j, const TelemetryRecord& r) {
  j = nlohmann::json{{"step", r.step},
                     {"images_seen", r.images_seen},
                     {"resolution", r.resolution},
                     {"mode", r.mode},
                     {"alpha", r.alpha},
                     {"critic_loss", r.critic_loss},
                     {"wasserstein", r.wasserstein},
                     {"gradient_penalty", r.gradient_penalty},
                     {"generator_adv", r.generator_adv},
                     {"generator_total", r.generator_total},
                     {"gen_parts", per_condition(r.gen_parts)},
                     {"real_parts", per_condition(r.real_parts)},
                     {"gamma", per_condition(r.gamma)},
                     {"conditioning_active", r.conditioning_active}};
}

void from_json(const nlohmann::json& j, TelemetryRecord& r) {
  r.step = j.at("step").get<std::int64_t>();
  r.images_seen = j.at("images_seen").get<std::int64_t>();
  r.resolution = j.at("resolution").get<int>();
  r.mode = j.at("mode").get<std::string>();
  r.alpha = number(j.at("alpha"));
  r.critic_loss = number(j.at("critic_loss"));
  r.wasserstein = number(j.at("wasserstein"));
  r.gradient_penalty = number(j.at("gradient_penalty"));
  r.generator_adv = number(j.at("generator_adv"));
  r.generator_total = number(j.at("generator_total"));
  r.gen_parts = per_condition(j.at("gen_parts"));
  r.real_parts = per_condition(j.at("real_parts"));
  r.gamma = per_condition(j.at("gamma"));
  r.conditioning_active = j.at("conditioning_active").get<bool>();
}

TelemetryLog::TelemetryLog(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::kIo, "cannot open telemetry log " + path.string());
}

void TelemetryLog::append(const TelemetryRecord& record) {
  if (!out_.is_open()) return;
  // NaN/inf are not JSON; nlohmann writes them as null.
  out_ << nlohmann::json(record).dump() << '\n';
  out_.flush();
}

std::vector<TelemetryRecord> read_telemetry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open telemetry log " + path.string());
  std::vector<TelemetryRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<TelemetryRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + " line " + std::to_string(out.size() + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mrsynth
