#include <gtest/gtest.h>

#include <ATen/CPUGeneratorImpl.h>

#include "mrsynth/error.hpp"
#include "mrsynth/training.hpp"
#include "support.hpp"

using namespace mrsynth;
using mrsynth::testkit::TempDir;
using mrsynth::testkit::tiny_net;

namespace {

TrainConfig quick_cfg(std::int64_t per_phase, std::int64_t total, std::int64_t batch) {
  TrainConfig cfg = TrainConfig::desk();
  cfg.images_per_phase = per_phase;
  cfg.total_images = total;
  cfg.gan_batch = batch;
  cfg.seed = 11;
  return cfg;
}

const TensorDataset& data16() {
  static const TensorDataset ds = testkit::phantom_tensors(24, 16, 3);
  return ds;
}

GanTrainer make_trainer(const TrainConfig& cfg, std::vector<ProgressivePhase> schedule, std::uint64_t init_seed = 5) {
  torch::manual_seed(init_seed);
  auto net = tiny_net();
  return GanTrainer(build_generator(net), build_discriminator(net), build_ac(net), data16(), std::move(schedule), cfg,
                    GanLossConfig{}, ConditionSpace{});
}

bool same_parameters(torch::nn::Module& a, torch::nn::Module& b) {
  auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!torch::equal(pa[i], pb[i])) return false;
  return true;
}

}  // namespace

TEST(Schedule, PaperAndDeskCounts) {
  auto paper = make_schedule(4, 256, 800'000);
  EXPECT_EQ(paper.size(), 13u);
  EXPECT_EQ(schedule_budget(paper), 10'400'000);
  auto desk = make_schedule(4, 64, 2'000);
  EXPECT_EQ(desk.size(), 9u);
  EXPECT_EQ(schedule_budget(desk), 18'000);
}

TEST(Schedule, Order) {
  auto s = make_schedule(4, 16, 10);
  std::vector<ProgressivePhase> expected = {{4, FadeMode::kStabilize, 10}, {8, FadeMode::kFade, 10},
                                            {8, FadeMode::kStabilize, 10}, {16, FadeMode::kFade, 10},
                                            {16, FadeMode::kStabilize, 10}};
  EXPECT_EQ(s, expected);
  EXPECT_EQ(make_schedule(8, 8, 5).size(), 1u);
  EXPECT_THROW(make_schedule(4, 24, 10), Error);
  EXPECT_THROW(make_schedule(8, 4, 10), Error);
  EXPECT_THROW(make_schedule(4, 16, 0), Error);
}

TEST(Schedule, FadeAlphaIsLinearInImages) {
  ProgressivePhase fade{8, FadeMode::kFade, 200};
  EXPECT_DOUBLE_EQ(fade_state_at(fade, 0).alpha, 0.0);
  EXPECT_DOUBLE_EQ(fade_state_at(fade, 50).alpha, 0.25);
  EXPECT_DOUBLE_EQ(fade_state_at(fade, 200).alpha, 1.0);
  EXPECT_EQ(fade_state_at(fade, 50).mode, FadeMode::kFade);
  ProgressivePhase stable{8, FadeMode::kStabilize, 200};
  EXPECT_DOUBLE_EQ(fade_state_at(stable, 13).alpha, 1.0);
}

TEST(TrainConfigTest, PresetsAndValidation) {
  auto paper = TrainConfig::paper();
  EXPECT_EQ(paper.images_per_phase, 800'000);
  EXPECT_DOUBLE_EQ(paper.gamma_rate, 0.01);
  EXPECT_DOUBLE_EQ(paper.gamma_ceiling, 100.0);
  EXPECT_DOUBLE_EQ(paper.gamma_e_hat, 1.0);
  auto desk = TrainConfig::desk();
  EXPECT_EQ(desk.images_per_phase, 2'000);
  EXPECT_DOUBLE_EQ(desk.gamma_rate, 1.0);
  EXPECT_EQ(desk.total_images, 60'000);
  desk.gan_batch = 0;
  EXPECT_THROW(desk.validate(), Error);
  desk = TrainConfig::desk();
  desk.gan_betas = {1.0, 0.99};
  EXPECT_THROW(desk.validate(), Error);
}

TEST(Augment, FlipOnlyMirrorsOrKeeps) {
  auto x = data16().images.slice(0, 0, 8);
  AugmentConfig flip_only = AugmentConfig::none();
  flip_only.horizontal_flip = true;
  auto rng = at::make_generator<at::CPUGeneratorImpl>(4);
  auto out = augment_batch(x, flip_only, rng);
  int flipped = 0;
  for (int i = 0; i < 8; ++i) {
    const bool same = torch::allclose(out[i], x[i], 0, 1e-5);
    const bool mirrored = torch::allclose(out[i], x[i].flip({2}), 0, 1e-5);
    EXPECT_TRUE(same || mirrored) << i;
    flipped += mirrored && !same;
  }
  EXPECT_GT(flipped, 0);
  EXPECT_LT(flipped, 8);
}

TEST(Augment, DeterministicBoundedAndShapePreserving) {
  auto x = data16().images.slice(0, 0, 6);
  auto r1 = at::make_generator<at::CPUGeneratorImpl>(9), r2 = at::make_generator<at::CPUGeneratorImpl>(9);
  auto a = augment_batch(x, AugmentConfig{}, r1), b = augment_batch(x, AugmentConfig{}, r2);
  EXPECT_TRUE(torch::equal(a, b));
  EXPECT_EQ(a.sizes(), x.sizes());
  EXPECT_LE(a.abs().max().item<float>(), 1.0f);
  EXPECT_FALSE(torch::equal(a, x));
  EXPECT_THROW(augment_batch(torch::zeros({4, 4}), AugmentConfig{}, r1), Error);
}

TEST(PretrainAc, ReportsEveryEpochAndKeepsBest) {
  const auto& train = data16();
  auto val = testkit::phantom_tensors(12, 16, 4);
  auto cfg = TrainConfig::desk();
  cfg.ac_epochs = 3;
  cfg.ac_batch = 8;
  torch::manual_seed(0);
  auto ac = build_ac(tiny_net());
  int calls = 0;
  auto history = pretrain_ac(ac, train, val, ConditionSpace{}, cfg, GanLossConfig{}, AugmentConfig{},
                             [&](const AcEpochMetrics&) { ++calls; });
  ASSERT_EQ(history.size(), 4u);
  EXPECT_EQ(calls, 4);
  double best = history[0].val_loss;
  for (const auto& h : history) {
    EXPECT_TRUE(std::isfinite(h.val_loss));
    best = std::min(best, h.val_loss);
  }
  auto pred = predict(ac, val.images);
  EXPECT_NEAR(ac_loss(pred, val.targets, GanLossConfig{}).total.item<double>(), best, 1e-4 * std::max(1.0, best));
  EXPECT_FALSE(ac->is_training());
  EXPECT_THROW(pretrain_ac(ac, train, TensorDataset{}, ConditionSpace{}, cfg, GanLossConfig{}, AugmentConfig{}), Error);
}

TEST(Trainer, SinglePhaseAccounting) {
  auto net = tiny_net();
  net.final_resolution = 4;
  net.channels_per_stage = {{4, 4}};
  auto ds = data16();
  ds.images = downsample_to(ds.images, 4);
  torch::manual_seed(1);
  GanTrainer t(build_generator(net), build_discriminator(net), build_ac(net), ds, make_schedule(4, 4, 20),
               quick_cfg(20, 20, 2), GanLossConfig{}, ConditionSpace{});
  int steps = 0;
  while (t.step()) ++steps;
  EXPECT_EQ(steps, 10);
  EXPECT_EQ(t.state().images_total, 20);
  EXPECT_EQ(t.state().generator_steps, 10);
  EXPECT_EQ(t.state().critic_steps, 10);
  EXPECT_TRUE(t.finished());
}

TEST(Trainer, PhasesConsumeExactBudgets) {
  // batch 3 does not divide the budget of 10, so each phase ends on a short batch.
  auto t = make_trainer(quick_cfg(10, 50, 3), make_schedule(4, 16, 10));
  std::vector<std::string> modes;
  t.run([&](const TelemetryRecord& r) { modes.push_back(std::to_string(r.resolution) + r.mode); });
  EXPECT_EQ(t.state().images_per_phase_consumed, (std::vector<std::int64_t>{10, 10, 10, 10, 10}));
  EXPECT_EQ(t.state().images_total, 50);
  EXPECT_EQ(t.state().generator_steps, 5 * 4);
  EXPECT_EQ(modes.front(), "4stabilize");
  EXPECT_EQ(modes.back(), "16stabilize");
}

TEST(Trainer, TotalBudgetExtendsOrTruncatesLastPhase) {
  auto longer = make_trainer(quick_cfg(10, 70, 4), make_schedule(4, 16, 10));
  longer.run();
  EXPECT_EQ(longer.state().images_per_phase_consumed, (std::vector<std::int64_t>{10, 10, 10, 10, 30}));

  auto shorter = make_trainer(quick_cfg(10, 25, 4), make_schedule(4, 16, 10));
  shorter.run();
  EXPECT_EQ(shorter.state().images_per_phase_consumed, (std::vector<std::int64_t>{10, 10, 5, 0, 0}));
}

TEST(Trainer, ConditioningOnlyAtFinalStabilize) {
  auto t = make_trainer(quick_cfg(16, 16 * 7, 4), make_schedule(4, 16, 16));
  bool saw_final = false;
  t.run([&](const TelemetryRecord& r) {
    const bool final_stable = r.resolution == 16 && r.mode == "stabilize";
    EXPECT_EQ(r.conditioning_active, final_stable);
    if (!final_stable) {
      EXPECT_EQ(r.gamma.iop, 0.0);
      EXPECT_EQ(r.gamma.te, 0.0);
      EXPECT_EQ(r.gamma.tr, 0.0);
    } else {
      saw_final = true;
    }
    EXPECT_TRUE(std::isfinite(r.critic_loss));
    EXPECT_TRUE(std::isfinite(r.generator_total));
  });
  EXPECT_TRUE(saw_final);
  const auto& g = t.state().weights.gamma;
  EXPECT_GT(g.iop + g.te + g.tr, 0.0);
}

TEST(Trainer, ClassifierStaysFrozen) {
  auto t = make_trainer(quick_cfg(8, 48, 4), make_schedule(4, 16, 8));
  const auto before = parameter_digest(*t.ac());
  t.run();
  EXPECT_EQ(parameter_digest(*t.ac()), before);
}

TEST(Trainer, CriticUpdatesPerGeneratorUpdate) {
  auto cfg = quick_cfg(12, 60, 2);
  cfg.critic_steps_per_gen_step = 3;
  auto t = make_trainer(cfg, make_schedule(4, 16, 12));
  t.run();
  EXPECT_EQ(t.state().critic_steps, 3 * t.state().generator_steps);
  EXPECT_EQ(t.state().generator_steps, 10);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  TempDir dir;
  auto cfg = quick_cfg(8, 48, 4);
  auto straight = make_trainer(cfg, make_schedule(4, 16, 8));
  straight.run();

  auto first = make_trainer(cfg, make_schedule(4, 16, 8));
  for (int i = 0; i < 7; ++i) first.step();
  first.save(dir / "mid.pt");

  auto second = make_trainer(cfg, make_schedule(4, 16, 8), /*init_seed=*/99);
  second.resume(dir / "mid.pt");
  EXPECT_EQ(second.state().generator_steps, 7);
  EXPECT_EQ(second.state().images_total, first.state().images_total);
  second.run();
  EXPECT_EQ(second.state().generator_steps, straight.state().generator_steps);
  EXPECT_EQ(second.state().weights, straight.state().weights);
  EXPECT_TRUE(same_parameters(*second.generator(), *straight.generator()));
  EXPECT_TRUE(same_parameters(*second.critic(), *straight.critic()));
}

TEST(Trainer, ResumeRejectsDifferentSchedule) {
  TempDir dir;
  auto t = make_trainer(quick_cfg(8, 48, 4), make_schedule(4, 16, 8));
  t.step();
  t.save(dir / "a.pt");
  auto other = make_trainer(quick_cfg(9, 48, 4), make_schedule(4, 16, 9));
  EXPECT_THROW(other.resume(dir / "a.pt"), Error);
}

TEST(Trainer, NonFiniteStreakRaisesDivergence) {
  auto cfg = quick_cfg(8, 400, 4);
  cfg.max_nonfinite_steps = 3;
  auto ds = data16();
  ds.images = torch::full_like(ds.images, std::nan(""));
  torch::manual_seed(2);
  auto net = tiny_net();
  GanTrainer t(build_generator(net), build_discriminator(net), build_ac(net), ds, make_schedule(4, 16, 8), cfg,
               GanLossConfig{}, ConditionSpace{});
  int steps = 0;
  try {
    while (t.step()) ++steps;
    FAIL() << "no divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDivergence);
    EXPECT_NE(std::string(e.what()).find("\"step\""), std::string::npos);
  }
  EXPECT_EQ(steps, 2);
}

TEST(Trainer, RejectsInconsistentSetup) {
  auto cfg = quick_cfg(8, 48, 4);
  EXPECT_THROW(make_trainer(cfg, make_schedule(4, 8, 8)), Error);
  EXPECT_THROW(make_trainer(cfg, {}), Error);
  EXPECT_THROW(make_trainer(cfg, {{4, FadeMode::kFade, 8}, {16, FadeMode::kStabilize, 8}}), Error);
}
