#include "mrsynth/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mrsynth/error.hpp"

namespace mrsynth {

RunConfig RunConfig::desk() {
  RunConfig cfg;
  cfg.net = NetConfig::desk(cfg.space);
  cfg.train = TrainConfig::desk();
  return cfg;
}

RunConfig RunConfig::paper() {
  RunConfig cfg;
  cfg.net = NetConfig::paper(cfg.space);
  cfg.train = TrainConfig::paper();
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorCode::kConfig, key + ": '" + v + "' is not a number", key);
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorCode::kConfig, key + ": '" + v + "' is not an integer", key);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::kConfig, key + ": '" + v + "' is not a boolean", key);
}

std::pair<double, double> to_pair(const std::string& key, const std::string& v) {
  const auto w = words(v);
  if (w.size() != 2) throw Error(ErrorCode::kConfig, key + " needs two numbers", key);
  return {to_double(key, w[0]), to_double(key, w[1])};
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"space.tr", [](RunConfig& c, const std::string& k, const std::string& v) {
         auto [lo, hi] = to_pair(k, v);
         c.space = ConditionSpace({lo, hi}, c.space.te_range(), c.space.orientations());
       }},
      {"space.te", [](RunConfig& c, const std::string& k, const std::string& v) {
         auto [lo, hi] = to_pair(k, v);
         c.space = ConditionSpace(c.space.tr_range(), {lo, hi}, c.space.orientations());
       }},
      {"space.orientations", [](RunConfig& c, const std::string&, const std::string& v) {
         c.space = ConditionSpace(c.space.tr_range(), c.space.te_range(), words(v));
       }},
      {"net.latent_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.net.latent_dim = static_cast<int>(to_int(k, v)); }},
      {"net.base_resolution", [](RunConfig& c, const std::string& k, const std::string& v) { c.net.base_resolution = static_cast<int>(to_int(k, v)); }},
      {"net.final_resolution", [](RunConfig& c, const std::string& k, const std::string& v) { c.net.final_resolution = static_cast<int>(to_int(k, v)); }},
      {"net.channels", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.net.channels_per_stage.clear();
         for (const auto& pair : words(v)) {
           const auto colon = pair.find(':');
           if (colon == std::string::npos) throw Error(ErrorCode::kConfig, k + ": expected res:channels", k);
           c.net.channels_per_stage[static_cast<int>(to_int(k, pair.substr(0, colon)))] =
               static_cast<int>(to_int(k, pair.substr(colon + 1)));
         }
       }},
      {"net.ac_backbone", [](RunConfig& c, const std::string&, const std::string& v) { c.net.ac_backbone = ac_backbone_from_string(v); }},
      {"net.ac_width", [](RunConfig& c, const std::string& k, const std::string& v) { c.net.ac_width = static_cast<int>(to_int(k, v)); }},
      {"net.pixel_norm", [](RunConfig& c, const std::string& k, const std::string& v) { c.net.pixel_norm = to_bool(k, v); }},
      {"train.gan_batch", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.gan_batch = to_int(k, v); }},
      {"train.ac_batch", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.ac_batch = to_int(k, v); }},
      {"train.gan_lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.gan_lr = to_double(k, v); }},
      {"train.ac_lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.ac_lr = to_double(k, v); }},
      {"train.gan_betas", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.gan_betas = to_pair(k, v); }},
      {"train.ac_betas", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.ac_betas = to_pair(k, v); }},
      {"train.images_per_phase", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.images_per_phase = to_int(k, v); }},
      {"train.total_images", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.total_images = to_int(k, v); }},
      {"train.critic_steps_per_gen_step", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.critic_steps_per_gen_step = static_cast<int>(to_int(k, v)); }},
      {"train.ac_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.ac_epochs = static_cast<int>(to_int(k, v)); }},
      {"train.ac_select_best", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.ac_select_best = to_bool(k, v); }},
      {"train.max_nonfinite_steps", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.max_nonfinite_steps = static_cast<int>(to_int(k, v)); }},
      {"train.gamma_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.gamma_rate = to_double(k, v); }},
      {"train.gamma_ceiling", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.gamma_ceiling = to_double(k, v); }},
      {"train.gamma_e_hat", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.gamma_e_hat = to_double(k, v); }},
      {"train.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"loss.lambda_gp", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.lambda_gp = to_double(k, v); }},
      {"loss.lambda_iop", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.lambda_iop = to_double(k, v); }},
      {"loss.lambda_te", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.lambda_te = to_double(k, v); }},
      {"loss.lambda_tr", [](RunConfig& c, const std::string& k, const std::string& v) { c.loss.lambda_tr = to_double(k, v); }},
      {"augment.horizontal_flip", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.horizontal_flip = to_bool(k, v); }},
      {"augment.max_shift_px", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.max_shift_px = static_cast<int>(to_int(k, v)); }},
      {"augment.max_rotation_deg", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.max_rotation_deg = to_double(k, v); }},
      {"augment.intensity_jitter", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment.intensity_jitter = to_double(k, v); }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const RunConfig& base) {
  RunConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": expected key = value", line);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end())
      throw Error(ErrorCode::kConfig, "line " + std::to_string(lineno) + ": unknown key " + key, key);
    it->second(cfg, key, value);
  }
  cfg.net.condition_dim = static_cast<int>(cfg.space.condition_dim());
  cfg.net.validate();
  cfg.train.validate();
  cfg.loss.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), base);
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& w : v) s += (s.empty() ? "" : " ") + w;
    return s;
  };
  out << "space.tr = " << c.space.tr_range().min << ' ' << c.space.tr_range().max << '\n'
      << "space.te = " << c.space.te_range().min << ' ' << c.space.te_range().max << '\n'
      << "space.orientations = " << join(c.space.orientations()) << '\n'
      << "net.latent_dim = " << c.net.latent_dim << '\n'
      << "net.base_resolution = " << c.net.base_resolution << '\n'
      << "net.final_resolution = " << c.net.final_resolution << '\n'
      << "net.channels =";
  for (const auto& [res, ch] : c.net.channels_per_stage) out << ' ' << res << ':' << ch;
  out << '\n'
      << "net.ac_backbone = " << to_string(c.net.ac_backbone) << '\n'
      << "net.ac_width = " << c.net.ac_width << '\n'
      << "net.pixel_norm = " << (c.net.pixel_norm ? "true" : "false") << '\n'
      << "train.gan_batch = " << c.train.gan_batch << '\n'
      << "train.ac_batch = " << c.train.ac_batch << '\n'
      << "train.gan_lr = " << c.train.gan_lr << '\n'
      << "train.ac_lr = " << c.train.ac_lr << '\n'
      << "train.gan_betas = " << c.train.gan_betas.first << ' ' << c.train.gan_betas.second << '\n'
      << "train.ac_betas = " << c.train.ac_betas.first << ' ' << c.train.ac_betas.second << '\n'
      << "train.images_per_phase = " << c.train.images_per_phase << '\n'
      << "train.total_images = " << c.train.total_images << '\n'
      << "train.critic_steps_per_gen_step = " << c.train.critic_steps_per_gen_step << '\n'
      << "train.ac_epochs = " << c.train.ac_epochs << '\n'
      << "train.ac_select_best = " << (c.train.ac_select_best ? "true" : "false") << '\n'
      << "train.max_nonfinite_steps = " << c.train.max_nonfinite_steps << '\n'
      << "train.gamma_rate = " << c.train.gamma_rate << '\n'
      << "train.gamma_ceiling = " << c.train.gamma_ceiling << '\n'
      << "train.gamma_e_hat = " << c.train.gamma_e_hat << '\n'
      << "train.seed = " << c.train.seed << '\n'
      << "loss.lambda_gp = " << c.loss.lambda_gp << '\n'
      << "loss.lambda_iop = " << c.loss.lambda_iop << '\n'
      << "loss.lambda_te = " << c.loss.lambda_te << '\n'
      << "loss.lambda_tr = " << c.loss.lambda_tr << '\n'
      << "augment.horizontal_flip = " << (c.augment.horizontal_flip ? "true" : "false") << '\n'
      << "augment.max_shift_px = " << c.augment.max_shift_px << '\n'
      << "augment.max_rotation_deg = " << c.augment.max_rotation_deg << '\n'
      << "augment.intensity_jitter = " << c.augment.intensity_jitter << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON

void to_json(nlohmann::json& j, const NetConfig& c) {
  nlohmann::json channels = nlohmann::json::object();
  for (const auto& [res, ch] : c.channels_per_stage) channels[std::to_string(res)] = ch;
  j = {{"latent_dim", c.latent_dim},       {"base_resolution", c.base_resolution},
       {"final_resolution", c.final_resolution}, {"channels_per_stage", channels},
       {"condition_dim", c.condition_dim}, {"ac_backbone", to_string(c.ac_backbone)},
       {"ac_width", c.ac_width},           {"pixel_norm", c.pixel_norm}};
}

void from_json(const nlohmann::json& j, NetConfig& c) {
  c.latent_dim = j.at("latent_dim").get<int>();
  c.base_resolution = j.at("base_resolution").get<int>();
  c.final_resolution = j.at("final_resolution").get<int>();
  c.channels_per_stage.clear();
  for (const auto& [res, ch] : j.at("channels_per_stage").items()) c.channels_per_stage[std::stoi(res)] = ch.get<int>();
  c.condition_dim = j.at("condition_dim").get<int>();
  c.ac_backbone = ac_backbone_from_string(j.at("ac_backbone").get<std::string>());
  c.ac_width = j.at("ac_width").get<int>();
  c.pixel_norm = j.at("pixel_norm").get<bool>();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"gan_batch", c.gan_batch},
       {"ac_batch", c.ac_batch},
       {"gan_lr", c.gan_lr},
       {"ac_lr", c.ac_lr},
       {"gan_betas", {c.gan_betas.first, c.gan_betas.second}},
       {"ac_betas", {c.ac_betas.first, c.ac_betas.second}},
       {"images_per_phase", c.images_per_phase},
       {"total_images", c.total_images},
       {"critic_steps_per_gen_step", c.critic_steps_per_gen_step},
       {"ac_epochs", c.ac_epochs},
       {"ac_select_best", c.ac_select_best},
       {"max_nonfinite_steps", c.max_nonfinite_steps},
       {"gamma_rate", c.gamma_rate},
       {"gamma_ceiling", c.gamma_ceiling},
       {"gamma_e_hat", c.gamma_e_hat},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.gan_batch = j.at("gan_batch").get<std::int64_t>();
  c.ac_batch = j.at("ac_batch").get<std::int64_t>();
  c.gan_lr = j.at("gan_lr").get<double>();
  c.ac_lr = j.at("ac_lr").get<double>();
  c.gan_betas = {j.at("gan_betas")[0].get<double>(), j.at("gan_betas")[1].get<double>()};
  c.ac_betas = {j.at("ac_betas")[0].get<double>(), j.at("ac_betas")[1].get<double>()};
  c.images_per_phase = j.at("images_per_phase").get<std::int64_t>();
  c.total_images = j.at("total_images").get<std::int64_t>();
  c.critic_steps_per_gen_step = j.at("critic_steps_per_gen_step").get<int>();
  c.ac_epochs = j.at("ac_epochs").get<int>();
  c.ac_select_best = j.value("ac_select_best", true);
  c.max_nonfinite_steps = j.at("max_nonfinite_steps").get<int>();
  c.gamma_rate = j.at("gamma_rate").get<double>();
  c.gamma_ceiling = j.at("gamma_ceiling").get<double>();
  c.gamma_e_hat = j.at("gamma_e_hat").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

void to_json(nlohmann::json& j, const GanLossConfig& c) {
  j = {{"lambda_gp", c.lambda_gp}, {"lambda_iop", c.lambda_iop}, {"lambda_te", c.lambda_te}, {"lambda_tr", c.lambda_tr}};
}

void from_json(const nlohmann::json& j, GanLossConfig& c) {
  c.lambda_gp = j.at("lambda_gp").get<double>();
  c.lambda_iop = j.at("lambda_iop").get<double>();
  c.lambda_te = j.at("lambda_te").get<double>();
  c.lambda_tr = j.at("lambda_tr").get<double>();
}

void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = {{"horizontal_flip", c.horizontal_flip},
       {"max_shift_px", c.max_shift_px},
       {"max_rotation_deg", c.max_rotation_deg},
       {"intensity_jitter", c.intensity_jitter}};
}

void from_json(const nlohmann::json& j, AugmentConfig& c) {
  c.horizontal_flip = j.at("horizontal_flip").get<bool>();
  c.max_shift_px = j.at("max_shift_px").get<int>();
  c.max_rotation_deg = j.at("max_rotation_deg").get<double>();
  c.intensity_jitter = j.at("intensity_jitter").get<double>();
}

namespace {

nlohmann::json triple(const PerCondition<double>& v) { return {{"iop", v.iop}, {"te", v.te}, {"tr", v.tr}}; }
PerCondition<double> triple(const nlohmann::json& j) {
  return {j.at("iop").get<double>(), j.at("te").get<double>(), j.at("tr").get<double>()};
}

}  // namespace

void to_json(nlohmann::json& j, const AdaptiveWeightState& s) {
  j = {{"gamma", triple(s.gamma)}, {"r", s.r}, {"tau", triple(s.tau)}, {"e_hat", s.e_hat}};
}

void from_json(const nlohmann::json& j, AdaptiveWeightState& s) {
  s.gamma = triple(j.at("gamma"));
  s.r = j.at("r").get<double>();
  s.tau = triple(j.at("tau"));
  s.e_hat = j.at("e_hat").get<double>();
}

void to_json(nlohmann::json& j, const ProgressivePhase& p) {
  j = {{"resolution", p.resolution},
       {"mode", p.mode == FadeMode::kFade ? "fade" : "stabilize"},
       {"image_budget", p.image_budget}};
}

void from_json(const nlohmann::json& j, ProgressivePhase& p) {
  p.resolution = j.at("resolution").get<int>();
  p.mode = j.at("mode").get<std::string>() == "fade" ? FadeMode::kFade : FadeMode::kStabilize;
  p.image_budget = j.at("image_budget").get<std::int64_t>();
}

void to_json(nlohmann::json& j, const TrainerState& s) {
  j = {{"phase_index", s.phase_index},
       {"images_in_phase", s.images_in_phase},
       {"images_total", s.images_total},
       {"critic_steps", s.critic_steps},
       {"generator_steps", s.generator_steps},
       {"data_cursor", s.data_cursor},
       {"nonfinite_streak", s.nonfinite_streak},
       {"weights", s.weights},
       {"images_per_phase_consumed", s.images_per_phase_consumed}};
}

void from_json(const nlohmann::json& j, TrainerState& s) {
  s.phase_index = j.at("phase_index").get<std::size_t>();
  s.images_in_phase = j.at("images_in_phase").get<std::int64_t>();
  s.images_total = j.at("images_total").get<std::int64_t>();
  s.critic_steps = j.at("critic_steps").get<std::int64_t>();
  s.generator_steps = j.at("generator_steps").get<std::int64_t>();
  s.data_cursor = j.at("data_cursor").get<std::int64_t>();
  s.nonfinite_streak = j.at("nonfinite_streak").get<int>();
  s.weights = j.at("weights").get<AdaptiveWeightState>();
  s.images_per_phase_consumed = j.at("images_per_phase_consumed").get<std::vector<std::int64_t>>();
}

}  // namespace mrsynth
