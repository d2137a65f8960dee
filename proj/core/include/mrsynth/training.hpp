#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "mrsynth/conddata.hpp"
#include "mrsynth/evaluation.hpp"
#include "mrsynth/losses.hpp"
#include "mrsynth/networks.hpp"
#include "mrsynth/telemetry.hpp"
#include "mrsynth/tensor_dataset.hpp"

namespace mrsynth {

struct ProgressivePhase {
  int resolution = 4;
  FadeMode mode = FadeMode::kStabilize;
  std::int64_t image_budget = 0;

  bool operator==(const ProgressivePhase&) const = default;
};

/// stabilize@base, then fade@2r and stabilize@2r for every doubling, each
/// with `images_per_phase` images. Throws Error(kConfig) unless both
/// resolutions are powers of two with base <= final.
std::vector<ProgressivePhase> make_schedule(int base_resolution, int final_resolution,
                                            std::int64_t images_per_phase);

std::int64_t schedule_budget(const std::vector<ProgressivePhase>& schedule);

/// Fade-in grows linearly with the images consumed in the phase.
FadeState fade_state_at(const ProgressivePhase& phase, std::int64_t images_into_phase);

struct TrainConfig {
  std::int64_t gan_batch = 16;
  std::int64_t ac_batch = 64;
  double gan_lr = 1e-3;
  double ac_lr = 1e-3;
  std::pair<double, double> gan_betas{0.9, 0.99};
  std::pair<double, double> ac_betas{0.0, 0.99};
  std::int64_t images_per_phase = 800'000;
  std::int64_t total_images = 10'000'000;
  int critic_steps_per_gen_step = 1;
  int ac_epochs = 200;
  /// Keep the classifier weights of the epoch with the lowest validation loss.
  bool ac_select_best = true;
  /// Consecutive non-finite steps tolerated before training aborts.
  int max_nonfinite_steps = 5;
  /// Controller step size and ceiling for the adaptive conditioning weights.
  double gamma_rate = 0.01;
  double gamma_ceiling = 100.0;
  double gamma_e_hat = 1.0;
  std::uint64_t seed = 0;

  static TrainConfig paper();
  /// 2k images per phase, 60k images in total, 30 classifier epochs, γ rate 1.
  static TrainConfig desk();
  void validate() const;
};

struct AugmentConfig {
  bool horizontal_flip = true;
  int max_shift_px = 3;
  double max_rotation_deg = 5.0;
  double intensity_jitter = 0.03;

  static AugmentConfig none() { return {false, 0, 0.0, 0.0}; }
};

/// Random flips, integer translations, small rotations and a global gain
/// jitter, drawn per sample from `rng`.
torch::Tensor augment_batch(const torch::Tensor& images, const AugmentConfig& cfg, at::Generator& rng);

struct AcEpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  AcMetrics val;
};

/// Minimizes the multi-task classifier loss with Adam(ac_lr, ac_betas) for
/// cfg.ac_epochs epochs; augmentation applies to training batches only.
/// Entry 0 holds the metrics before the first epoch. With ac_select_best the
/// returned network carries the weights of the lowest validation loss.
std::vector<AcEpochMetrics> pretrain_ac(AuxClassifier& ac, const TensorDataset& train,
                                        const TensorDataset& val, const ConditionSpace& space,
                                        const TrainConfig& cfg, const GanLossConfig& loss_cfg,
                                        const AugmentConfig& augment,
                                        const std::function<void(const AcEpochMetrics&)>& on_epoch = {});

/// Position of a GAN run; everything needed to resume besides the networks
/// and optimizer moments.
struct TrainerState {
  std::size_t phase_index = 0;
  std::int64_t images_in_phase = 0;
  std::int64_t images_total = 0;
  std::int64_t critic_steps = 0;
  std::int64_t generator_steps = 0;
  std::int64_t data_cursor = 0;
  int nonfinite_streak = 0;
  AdaptiveWeightState weights;
  std::vector<std::int64_t> images_per_phase_consumed;
};

/// Alternating WGAN-GP training over a progressive schedule. The classifier
/// is frozen; its weighted loss joins the generator objective only once the
/// final resolution is stabilized.
class GanTrainer {
 public:
  GanTrainer(Generator generator, Critic critic, AuxClassifier ac, TensorDataset train,
             std::vector<ProgressivePhase> schedule, TrainConfig cfg, GanLossConfig loss_cfg,
             ConditionSpace space);

  void set_telemetry(std::shared_ptr<TelemetryLog> log) { telemetry_ = std::move(log); }

  /// critic_steps_per_gen_step critic updates followed by one generator update.
  /// Returns false once total_images have been consumed.
  bool step();
  void run(const std::function<void(const TelemetryRecord&)>& on_step = {});

  bool finished() const;
  FadeState current_fade() const;
  const ProgressivePhase& current_phase() const { return schedule_.at(state_.phase_index); }
  const std::vector<ProgressivePhase>& schedule() const { return schedule_; }
  const TrainerState& state() const { return state_; }
  const TelemetryRecord& last_record() const { return last_; }
  const std::vector<TelemetryRecord>& history() const { return history_; }

  Generator& generator() { return generator_; }
  Critic& critic() { return critic_; }
  AuxClassifier& ac() { return ac_; }
  const TrainConfig& config() const { return cfg_; }
  const GanLossConfig& loss_config() const { return loss_cfg_; }
  const ConditionSpace& space() const { return space_; }

  void save(const std::filesystem::path& path) const;
  /// Restores networks, optimizers, counters, controller state and RNG from
  /// a checkpoint written by save().
  void resume(const std::filesystem::path& path);

 private:
  torch::Tensor next_real_indices(std::int64_t n);
  torch::Tensor real_batch(const torch::Tensor& rows, int resolution) const;
  void advance(std::int64_t consumed);

  Generator generator_;
  Critic critic_;
  AuxClassifier ac_;
  TensorDataset train_;
  std::vector<ProgressivePhase> schedule_;
  TrainConfig cfg_;
  GanLossConfig loss_cfg_;
  ConditionSpace space_;
  std::unique_ptr<torch::optim::Adam> gen_opt_;
  std::unique_ptr<torch::optim::Adam> critic_opt_;
  at::Generator rng_;
  torch::Tensor order_;
  std::map<int, torch::Tensor> pyramid_;
  TrainerState state_;
  TelemetryRecord last_;
  std::vector<TelemetryRecord> history_;
  std::shared_ptr<TelemetryLog> telemetry_;
};

}  // namespace mrsynth
