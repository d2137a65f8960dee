#include "mrsynth/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mrsynth/checkpoint.hpp"
#include "mrsynth/error.hpp"

namespace mrsynth {

namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

const char* mode_name(FadeMode m) { return m == FadeMode::kFade ? "fade" : "stabilize"; }

}  // namespace

std::vector<ProgressivePhase> make_schedule(int base_resolution, int final_resolution,
                                            std::int64_t images_per_phase) {
  if (!power_of_two(base_resolution) || !power_of_two(final_resolution))
    throw Error(ErrorCode::kConfig, "resolutions must be powers of two", "resolution");
  if (base_resolution > final_resolution)
    throw Error(ErrorCode::kConfig, "base resolution exceeds final resolution", "base_resolution");
  if (images_per_phase <= 0) throw Error(ErrorCode::kConfig, "images_per_phase must be positive", "images_per_phase");
  std::vector<ProgressivePhase> out{{base_resolution, FadeMode::kStabilize, images_per_phase}};
  for (int r = base_resolution * 2; r <= final_resolution; r *= 2) {
    out.push_back({r, FadeMode::kFade, images_per_phase});
    out.push_back({r, FadeMode::kStabilize, images_per_phase});
  }
  return out;
}

std::int64_t schedule_budget(const std::vector<ProgressivePhase>& schedule) {
  std::int64_t total = 0;
  for (const auto& p : schedule) total += p.image_budget;
  return total;
}

FadeState fade_state_at(const ProgressivePhase& phase, std::int64_t images_into_phase) {
  if (phase.mode == FadeMode::kStabilize) return FadeState::stable(phase.resolution);
  const double alpha = std::clamp(static_cast<double>(images_into_phase) / static_cast<double>(phase.image_budget), 0.0, 1.0);
  return FadeState::fading(phase.resolution, alpha);
}

TrainConfig TrainConfig::paper() { return {}; }

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.images_per_phase = 2'000;
  c.total_images = 60'000;
  c.ac_epochs = 30;
  c.gamma_rate = 1.0;
  return c;
}

void TrainConfig::validate() const {
  auto positive = [](bool ok, const char* field) {
    if (!ok) throw Error(ErrorCode::kConfig, std::string(field) + " must be positive", field);
  };
  positive(gan_batch > 0, "gan_batch");
  positive(ac_batch > 0, "ac_batch");
  positive(gan_lr > 0, "gan_lr");
  positive(ac_lr > 0, "ac_lr");
  positive(images_per_phase > 0, "images_per_phase");
  positive(total_images > 0, "total_images");
  positive(critic_steps_per_gen_step > 0, "critic_steps_per_gen_step");
  positive(max_nonfinite_steps > 0, "max_nonfinite_steps");
  positive(gamma_rate > 0, "gamma_rate");
  positive(gamma_ceiling > 0, "gamma_ceiling");
  positive(gamma_e_hat > 0, "gamma_e_hat");
  if (ac_epochs < 0) throw Error(ErrorCode::kConfig, "ac_epochs must be non-negative", "ac_epochs");
  auto beta_ok = [](const std::pair<double, double>& b) {
    return b.first >= 0 && b.first < 1 && b.second >= 0 && b.second < 1;
  };
  if (!beta_ok(gan_betas)) throw Error(ErrorCode::kConfig, "betas must lie in [0, 1)", "gan_betas");
  if (!beta_ok(ac_betas)) throw Error(ErrorCode::kConfig, "betas must lie in [0, 1)", "ac_betas");
}

torch::Tensor augment_batch(const torch::Tensor& images, const AugmentConfig& cfg, at::Generator& rng) {
  if (images.dim() != 4) throw Error(ErrorCode::kShape, "augment_batch expects [N, C, H, W]");
  const auto n = images.size(0);
  if (n == 0) return images;
  auto opts = images.options();
  auto flip = torch::ones({n}, opts);
  if (cfg.horizontal_flip) flip = torch::where(torch::rand({n}, rng, opts) < 0.5, -flip, flip);
  const double rot = cfg.max_rotation_deg * std::numbers::pi / 180.0;
  auto angle = (torch::rand({n}, rng, opts) * 2 - 1) * rot;
  auto shift_x = torch::zeros({n}, opts);
  auto shift_y = torch::zeros({n}, opts);
  if (cfg.max_shift_px > 0) {
    const auto span = 2 * cfg.max_shift_px + 1;
    shift_x = torch::randint(span, {n}, rng, opts) - cfg.max_shift_px;
    shift_y = torch::randint(span, {n}, rng, opts) - cfg.max_shift_px;
  }
  auto gain = 1.0 + (torch::rand({n}, rng, opts) * 2 - 1) * cfg.intensity_jitter;

  // Output pixel p samples input at theta * p in normalized coordinates.
  auto c = torch::cos(angle);
  auto s = torch::sin(angle);
  auto theta = torch::stack({torch::stack({c * flip, -s, -shift_x * 2.0 / images.size(3)}, 1),
                             torch::stack({s * flip, c, -shift_y * 2.0 / images.size(2)}, 1)},
                            1);
  auto grid = torch::nn::functional::affine_grid(theta, images.sizes().vec(), /*align_corners=*/false);
  namespace F = torch::nn::functional;
  // Shift to [0, 2] so that zero padding fills with the background value -1.
  auto warped = F::grid_sample(images + 1.0, grid,
                               F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(false));
  return (warped * gain.view({n, 1, 1, 1}) - 1.0).clamp(-1.0, 1.0);
}

namespace {

std::vector<torch::Tensor> snapshot(torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
  for (const auto& b : m.buffers()) out.push_back(b.detach().clone());
  return out;
}

void restore(torch::nn::Module& m, const std::vector<torch::Tensor>& values) {
  torch::NoGradGuard no_grad;
  std::size_t i = 0;
  for (auto& p : m.parameters()) p.copy_(values[i++]);
  for (auto& b : m.buffers()) b.copy_(values[i++]);
}

}  // namespace

std::vector<AcEpochMetrics> pretrain_ac(AuxClassifier& ac, const TensorDataset& train, const TensorDataset& val,
                                        const ConditionSpace& space, const TrainConfig& cfg,
                                        const GanLossConfig& loss_cfg, const AugmentConfig& augment,
                                        const std::function<void(const AcEpochMetrics&)>& on_epoch) {
  if (train.size() == 0) throw Error(ErrorCode::kConfig, "AC training set is empty", "train");
  if (val.size() == 0) throw Error(ErrorCode::kConfig, "AC validation set is empty", "val");
  if (train.resolution() != ac->config().final_resolution)
    throw Error(ErrorCode::kShape, "AC data must be at the final resolution");
  cfg.validate();
  loss_cfg.validate();

  std::vector<AcEpochMetrics> history;
  std::vector<torch::Tensor> best;
  double best_loss = std::numeric_limits<double>::infinity();
  auto report = [&](int epoch, double train_loss) {
    const auto pred = predict(ac, val.images);
    AcEpochMetrics m{epoch, train_loss, ac_loss(pred, val.targets, loss_cfg).total.item<double>(),
                     score_predictions(pred, val.labels, space)};
    history.push_back(m);
    if (cfg.ac_select_best && m.val_loss < best_loss) {
      best_loss = m.val_loss;
      best = snapshot(*ac);
    }
    if (on_epoch) on_epoch(history.back());
  };
  report(0, 0.0);

  torch::optim::Adam opt(ac->parameters(), torch::optim::AdamOptions(cfg.ac_lr).betas(
                                               {cfg.ac_betas.first, cfg.ac_betas.second}));
  auto rng = at::make_generator<at::CPUGeneratorImpl>(cfg.seed);
  const auto n = train.size();
  for (int epoch = 1; epoch <= cfg.ac_epochs; ++epoch) {
    ac->train();
    auto order = torch::randperm(n, rng, torch::kLong);
    double loss_sum = 0.0;
    for (std::int64_t start = 0; start < n; start += cfg.ac_batch) {
      auto rows = order.slice(0, start, std::min(n, start + cfg.ac_batch));
      auto batch = augment_batch(train.images.index_select(0, rows), augment, rng);
      auto loss = ac_loss(ac->forward(batch), train.targets.index(rows), loss_cfg);
      opt.zero_grad();
      loss.total.backward();
      opt.step();
      loss_sum += loss.total.item<double>() * static_cast<double>(rows.size(0));
    }
    report(epoch, loss_sum / static_cast<double>(n));
  }
  if (cfg.ac_select_best && !best.empty()) restore(*ac, best);
  ac->eval();
  return history;
}

// ---------------------------------------------------------------------------

GanTrainer::GanTrainer(Generator generator, Critic critic, AuxClassifier ac, TensorDataset train,
                       std::vector<ProgressivePhase> schedule, TrainConfig cfg, GanLossConfig loss_cfg,
                       ConditionSpace space)
    : generator_(std::move(generator)),
      critic_(std::move(critic)),
      ac_(std::move(ac)),
      train_(std::move(train)),
      schedule_(std::move(schedule)),
      cfg_(cfg),
      loss_cfg_(loss_cfg),
      space_(std::move(space)),
      rng_(at::make_generator<at::CPUGeneratorImpl>(cfg.seed)) {
  cfg_.validate();
  loss_cfg_.validate();
  if (schedule_.empty()) throw Error(ErrorCode::kConfig, "empty schedule", "schedule");
  const auto& net = generator_->config();
  for (std::size_t i = 0; i < schedule_.size(); ++i) {
    const auto& p = schedule_[i];
    if (p.image_budget <= 0) throw Error(ErrorCode::kConfig, "phase budgets must be positive", "schedule");
    if (p.mode == FadeMode::kFade && p.resolution <= net.base_resolution)
      throw Error(ErrorCode::kConfig, "fade phase at base resolution", "schedule");
    if (net.channels_per_stage.count(p.resolution) == 0)
      throw Error(ErrorCode::kConfig, "schedule resolution " + std::to_string(p.resolution) + " has no stage", "schedule");
  }
  if (schedule_.back().resolution != net.final_resolution)
    throw Error(ErrorCode::kConfig, "schedule must end at the final resolution", "schedule");
  if (train_.size() == 0) throw Error(ErrorCode::kConfig, "GAN training set is empty", "train");
  if (train_.resolution() != net.final_resolution)
    throw Error(ErrorCode::kShape, "training images must be at the final resolution");

  for (const auto& p : schedule_)
    if (!pyramid_.count(p.resolution)) pyramid_[p.resolution] = downsample_to(train_.images, p.resolution);

  ac_->eval();
  for (auto& p : ac_->parameters()) p.set_requires_grad(false);

  gen_opt_ = std::make_unique<torch::optim::Adam>(
      generator_->parameters(), torch::optim::AdamOptions(cfg_.gan_lr).betas({cfg_.gan_betas.first, cfg_.gan_betas.second}));
  critic_opt_ = std::make_unique<torch::optim::Adam>(
      critic_->parameters(), torch::optim::AdamOptions(cfg_.gan_lr).betas({cfg_.gan_betas.first, cfg_.gan_betas.second}));

  state_.weights.r = cfg_.gamma_rate;
  state_.weights.tau = {cfg_.gamma_ceiling, cfg_.gamma_ceiling, cfg_.gamma_ceiling};
  state_.weights.e_hat = cfg_.gamma_e_hat;
  state_.images_per_phase_consumed.assign(schedule_.size(), 0);
  order_ = torch::randperm(train_.size(), rng_, torch::kLong);
}

bool GanTrainer::finished() const { return state_.images_total >= cfg_.total_images; }

FadeState GanTrainer::current_fade() const { return fade_state_at(current_phase(), state_.images_in_phase); }

torch::Tensor GanTrainer::next_real_indices(std::int64_t n) {
  std::vector<torch::Tensor> parts;
  const auto size = train_.size();
  while (n > 0) {
    if (state_.data_cursor >= size) {
      order_ = torch::randperm(size, rng_, torch::kLong);
      state_.data_cursor = 0;
    }
    const auto take = std::min(n, size - state_.data_cursor);
    parts.push_back(order_.slice(0, state_.data_cursor, state_.data_cursor + take));
    state_.data_cursor += take;
    n -= take;
  }
  return parts.size() == 1 ? parts.front() : torch::cat(parts);
}

torch::Tensor GanTrainer::real_batch(const torch::Tensor& rows, int resolution) const {
  return pyramid_.at(resolution).index_select(0, rows);
}

void GanTrainer::advance(std::int64_t consumed) {
  state_.images_in_phase += consumed;
  state_.images_total += consumed;
  state_.images_per_phase_consumed[state_.phase_index] += consumed;
  if (state_.phase_index + 1 < schedule_.size() &&
      state_.images_in_phase >= schedule_[state_.phase_index].image_budget) {
    ++state_.phase_index;
    state_.images_in_phase = 0;
  }
}

bool GanTrainer::step() {
  if (finished()) return false;
  const auto& net = generator_->config();

  // The final batch of a phase is shortened so that every phase except the
  // last consumes exactly its budget; the last phase runs until total_images.
  auto batch_size = [&] {
    auto n = std::min(cfg_.gan_batch, cfg_.total_images - state_.images_total);
    if (state_.phase_index + 1 < schedule_.size())
      n = std::min(n, current_phase().image_budget - state_.images_in_phase);
    return n;
  };

  TelemetryRecord rec;
  bool nonfinite = false;
  FadeState fade = current_fade();
  bool conditioning = false;
  torch::Tensor last_rows;
  torch::Tensor last_real;

  for (int k = 0; k < cfg_.critic_steps_per_gen_step; ++k) {
    const auto n = batch_size();
    if (n <= 0) break;
    fade = current_fade();
    conditioning = current_phase().mode == FadeMode::kStabilize && fade.stage_resolution == net.final_resolution;
    auto rows = next_real_indices(n);
    auto real = real_batch(rows, fade.stage_resolution);
    auto cond = train_.conditions.index_select(0, rows);
    torch::Tensor fake;
    {
      torch::NoGradGuard no_grad;
      fake = generator_->forward(torch::randn({n, net.latent_dim}, rng_), cond, fade);
    }
    CriticFn d = [&](const torch::Tensor& x) { return critic_->forward(x, fade); };
    try {
      auto loss = critic_loss(d, real, fake, loss_cfg_, rng_);
      rec.critic_loss = loss.total.item<double>();
      rec.wasserstein = loss.wasserstein.item<double>();
      rec.gradient_penalty = loss.penalty.item<double>();
      if (std::isfinite(rec.critic_loss)) {
        critic_opt_->zero_grad();
        loss.total.backward();
        critic_opt_->step();
      } else {
        nonfinite = true;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNumeric) throw;
      rec.critic_loss = std::numeric_limits<double>::quiet_NaN();
      nonfinite = true;
    }
    ++state_.critic_steps;
    advance(n);
    last_rows = rows;
    last_real = real;
  }

  // Generator update with conditions drawn from the training label distribution.
  const auto n = cfg_.gan_batch;
  auto rows = torch::randint(train_.size(), {n}, rng_, torch::kLong);
  auto z = torch::randn({n, net.latent_dim}, rng_);
  auto fake = generator_->forward(z, train_.conditions.index_select(0, rows), fade);
  CriticFn d = [&](const torch::Tensor& x) { return critic_->forward(x, fade); };
  auto adv = generator_adv_loss(d, fake);
  torch::Tensor total = adv;
  if (conditioning) {
    auto gen_parts = ac_loss(ac_->forward(fake), train_.targets.index(rows), loss_cfg_);
    ConditionLosses real_parts;
    {
      torch::NoGradGuard no_grad;
      real_parts = ac_loss(ac_->forward(last_real), train_.targets.index(last_rows), loss_cfg_).values();
    }
    rec.gen_parts = gen_parts.values();
    rec.real_parts = real_parts;
    state_.weights = update_adaptive_weights(state_.weights, rec.gen_parts, real_parts);
    total = combine_generator_loss(adv, gen_parts, state_.weights).total;
  }
  rec.generator_adv = adv.item<double>();
  rec.generator_total = total.item<double>();
  if (std::isfinite(rec.generator_total)) {
    gen_opt_->zero_grad();
    total.backward();
    gen_opt_->step();
  } else {
    nonfinite = true;
  }
  critic_opt_->zero_grad();
  ++state_.generator_steps;

  rec.step = state_.generator_steps;
  rec.images_seen = state_.images_total;
  rec.resolution = fade.stage_resolution;
  rec.mode = mode_name(fade.mode);
  rec.alpha = fade.alpha;
  rec.gamma = state_.weights.gamma;
  rec.conditioning_active = conditioning;
  last_ = rec;
  history_.push_back(rec);
  if (telemetry_) telemetry_->append(rec);

  state_.nonfinite_streak = nonfinite ? state_.nonfinite_streak + 1 : 0;
  if (state_.nonfinite_streak >= cfg_.max_nonfinite_steps) {
    nlohmann::json dump = rec;
    throw Error(ErrorCode::kDivergence, "training diverged after " + std::to_string(state_.nonfinite_streak) +
                                            " non-finite steps; last record " + dump.dump());
  }
  return true;
}

void GanTrainer::run(const std::function<void(const TelemetryRecord&)>& on_step) {
  while (step())
    if (on_step) on_step(last_);
}

void GanTrainer::save(const std::filesystem::path& path) const {
  CheckpointMeta meta;
  meta.net = generator_->config();
  meta.space = space_;
  meta.train = cfg_;
  meta.loss = loss_cfg_;
  meta.schedule = schedule_;
  meta.trainer = state_;
  TrainingBlobs blobs{gen_opt_.get(), critic_opt_.get(), rng_.get_state(), order_};
  auto g = generator_;
  auto d = critic_;
  auto c = ac_;
  save_checkpoint(path, meta, g, d, c, &blobs);
}

void GanTrainer::resume(const std::filesystem::path& path) {
  TrainingBlobs blobs{gen_opt_.get(), critic_opt_.get(), {}, {}};
  auto meta = restore_checkpoint(path, generator_, critic_, ac_, &blobs);
  if (!meta.trainer) throw Error(ErrorCode::kConfig, "checkpoint has no trainer state", "resume");
  if (meta.schedule != schedule_) throw Error(ErrorCode::kConfig, "checkpoint schedule differs", "schedule");
  state_ = *meta.trainer;
  if (state_.images_per_phase_consumed.size() != schedule_.size())
    throw Error(ErrorCode::kCorrupt, "trainer state does not match the schedule");
  if (blobs.rng_state.defined()) rng_.set_state(blobs.rng_state);
  if (blobs.data_order.defined()) order_ = blobs.data_order;
  ac_->eval();
  for (auto& p : ac_->parameters()) p.set_requires_grad(false);
}

}  // namespace mrsynth
