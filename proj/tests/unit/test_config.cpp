#include <gtest/gtest.h>

#include "mrsynth/config.hpp"
#include "mrsynth/error.hpp"

using namespace mrsynth;

TEST(RunConfigParse, OverridesOnlyGivenKeys) {
  auto cfg = parse_run_config(R"(
# desk variant
net.final_resolution = 32
net.channels = 4:16 8:16 16:8 32:4   # taper
train.gan_betas = 0.5 0.9
train.ac_select_best = false
space.orientations = axial coronal
space.te = 10 60
augment.horizontal_flip = no
)");
  EXPECT_EQ(cfg.net.final_resolution, 32);
  EXPECT_EQ(cfg.net.channels_per_stage, (std::map<int, int>{{4, 16}, {8, 16}, {16, 8}, {32, 4}}));
  EXPECT_EQ(cfg.train.gan_betas, (std::pair<double, double>{0.5, 0.9}));
  EXPECT_FALSE(cfg.train.ac_select_best);
  EXPECT_EQ(cfg.space.orientations(), (std::vector<std::string>{"axial", "coronal"}));
  EXPECT_EQ(cfg.space.te_range().max, 60.0);
  EXPECT_EQ(cfg.net.condition_dim, 4);
  EXPECT_FALSE(cfg.augment.horizontal_flip);
  EXPECT_EQ(cfg.train.total_images, RunConfig::desk().train.total_images);
}

TEST(RunConfigParse, ErrorsNameTheKey) {
  auto field_of = [](const std::string& text) {
    try {
      parse_run_config(text);
    } catch (const Error& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of("train.nonsense = 3"), "train.nonsense");
  EXPECT_EQ(field_of("train.gan_batch = many"), "train.gan_batch");
  EXPECT_EQ(field_of("net.latent_dim"), "net.latent_dim");
  EXPECT_EQ(field_of("net.channels = 4:x"), "net.channels");
  EXPECT_NE(field_of("net.final_resolution = 48"), "<none>");
}

TEST(RunConfigParse, FormatRoundTrips) {
  for (const auto& base : {RunConfig::desk(), RunConfig::paper()}) {
    auto back = parse_run_config(format_run_config(base), RunConfig::desk());
    EXPECT_EQ(back.net, base.net);
    EXPECT_EQ(back.space, base.space);
    nlohmann::json a = back.train, b = base.train;
    EXPECT_EQ(a, b);
    nlohmann::json la = back.loss, lb = base.loss;
    EXPECT_EQ(la, lb);
  }
}

TEST(RunConfigPresets, PaperValues) {
  auto p = RunConfig::paper();
  EXPECT_EQ(p.net.final_resolution, 256);
  EXPECT_EQ(p.loss.lambda_gp, 10.0);
  EXPECT_EQ(p.loss.lambda_iop, 1.0);
  EXPECT_EQ(p.loss.lambda_te, 10.0);
  EXPECT_EQ(p.loss.lambda_tr, 10.0);
  EXPECT_EQ(p.space.tr_range().min, 1800.0);
  EXPECT_EQ(p.space.tr_range().max, 5000.0);
  EXPECT_EQ(p.space.te_range().min, 12.0);
  EXPECT_EQ(p.space.te_range().max, 50.0);
}

TEST(ConfigJson, TrainerStateRoundTrip) {
  TrainerState s;
  s.phase_index = 3;
  s.images_total = 12345;
  s.weights.gamma = {0.5, 1.5, 2.5};
  s.weights.tau = {10, 20, 30};
  s.images_per_phase_consumed = {1, 2, 3};
  nlohmann::json j = s;
  auto back = j.get<TrainerState>();
  EXPECT_EQ(back.phase_index, 3u);
  EXPECT_EQ(back.images_total, 12345);
  EXPECT_EQ(back.weights, s.weights);
  EXPECT_EQ(back.images_per_phase_consumed, s.images_per_phase_consumed);
}

TEST(ConfigJson, OlderTrainConfigDefaultsSelection) {
  nlohmann::json j = TrainConfig::desk();
  j.erase("ac_select_best");
  EXPECT_TRUE(j.get<TrainConfig>().ac_select_best);
}
