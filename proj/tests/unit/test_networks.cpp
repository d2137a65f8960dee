#include <gtest/gtest.h>

#include "mrsynth/error.hpp"
#include "mrsynth/networks.hpp"
#include "support.hpp"

using namespace mrsynth;
using mrsynth::testkit::tiny_net;

namespace {

torch::Tensor nearest_up(const torch::Tensor& x) { return x.repeat_interleave(2, 2).repeat_interleave(2, 3); }

torch::Tensor some_conditions(int n) {
  std::vector<EncodedCondition> cs;
  for (int i = 0; i < n; ++i) {
    EncodedCondition e;
    e.tr_unit = i / double(n);
    e.te_unit = 1.0 - i / double(n);
    e.orientation_onehot = {0.0, 0.0, 0.0};
    e.orientation_onehot[i % 3] = 1.0;
    cs.push_back(e);
  }
  return condition_tensor(cs);
}

}  // namespace

TEST(FadeBlend, Endpoints) {
  auto a = torch::randn({3, 1, 4, 4}), b = torch::randn({3, 1, 4, 4});
  EXPECT_TRUE(torch::equal(fade_blend(a, b, 0.0), a));
  EXPECT_TRUE(torch::equal(fade_blend(a, b, 1.0), b));
  EXPECT_TRUE(torch::allclose(fade_blend(torch::zeros({2}), torch::full({2}, 2.0), 0.5), torch::ones({2})));
}

TEST(FadeBlend, LinearSymmetry) {
  torch::manual_seed(3);
  for (double alpha : {0.1, 0.37, 0.8}) {
    auto a = torch::randn({5, 7}), b = torch::randn({5, 7});
    EXPECT_TRUE(torch::allclose(fade_blend(a, b, alpha) + fade_blend(b, a, alpha), a + b, 1e-6, 1e-6));
  }
}

TEST(FadeBlend, Errors) {
  try {
    fade_blend(torch::zeros({2, 2}), torch::zeros({2, 3}), 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
  EXPECT_THROW(fade_blend(torch::zeros({2}), torch::zeros({2}), 1.5), Error);
}

TEST(NetConfig, Validation) {
  auto cfg = tiny_net();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.resolutions(), (std::vector<int>{4, 8, 16}));
  cfg.final_resolution = 24;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = tiny_net();
  cfg.channels_per_stage[8] = 0;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_EQ(NetConfig::paper().final_resolution, 256);
  EXPECT_EQ(NetConfig::paper().latent_dim, 512);
  EXPECT_EQ(NetConfig::desk().final_resolution, 64);
  EXPECT_EQ(NetConfig::desk().condition_dim, 5);
}

TEST(Generator, ShapesAndBounds) {
  torch::manual_seed(1);
  auto g = build_generator(tiny_net());
  auto z = torch::randn({6, 8}) * 50;
  auto c = some_conditions(6);
  for (int r : {4, 8, 16}) {
    auto out = g->forward(z, c, FadeState::stable(r));
    EXPECT_EQ(out.sizes(), (std::vector<int64_t>{6, 1, r, r}));
    EXPECT_LE(out.abs().max().item<float>(), 1.0f);
  }
  EXPECT_THROW(g->forward(torch::randn({6, 7}), c, FadeState::stable(4)), Error);
  EXPECT_THROW(g->forward(z, c, FadeState{8, 0.5, FadeMode::kStabilize}), Error);
}

TEST(Generator, FadeZeroIsUpsampledPreviousStage) {
  torch::manual_seed(2);
  auto g = build_generator(tiny_net());
  g->eval();
  torch::NoGradGuard ng;
  auto z = torch::randn({3, 8});
  auto c = some_conditions(3);
  for (int r : {8, 16}) {
    auto faded = g->forward(z, c, FadeState::fading(r, 0.0));
    auto prev = g->forward(z, c, FadeState::stable(r / 2));
    EXPECT_TRUE(torch::equal(faded, nearest_up(prev)));
    EXPECT_TRUE(torch::allclose(g->forward(z, c, FadeState::fading(r, 1.0)), g->forward(z, c, FadeState::stable(r)), 1e-6, 1e-6));
    auto half = g->forward(z, c, FadeState::fading(r, 0.25));
    EXPECT_TRUE(torch::allclose(half, 0.75 * nearest_up(prev) + 0.25 * g->forward(z, c, FadeState::stable(r)), 1e-5, 1e-6));
  }
}

TEST(Generator, DeterministicInInference) {
  auto g = build_generator(tiny_net());
  g->eval();
  torch::NoGradGuard ng;
  auto z = torch::randn({2, 8});
  auto c = some_conditions(2);
  EXPECT_TRUE(torch::equal(g->forward(z, c, FadeState::stable(16)), g->forward(z, c, FadeState::stable(16))));
}

TEST(Generator, ConditionChangesOutput) {
  auto g = build_generator(tiny_net());
  torch::NoGradGuard ng;
  auto z = torch::randn({1, 8}).expand({2, 8});
  auto c = some_conditions(2);
  auto out = g->forward(z.contiguous(), c, FadeState::stable(16));
  EXPECT_FALSE(torch::equal(out[0], out[1]));
}

TEST(Generator, ParameterAccountingAcrossGrowth) {
  auto g = build_generator(tiny_net());
  // stable(8) = stable(4) - to_gray(4) + block(8) + to_gray(8)
  auto numel = [](const torch::nn::Module& m) {
    std::int64_t n = 0;
    for (const auto& p : m.parameters()) n += p.numel();
    return n;
  };
  const auto& to_gray = *g->named_children()["to_gray"];
  const auto& blocks = *g->named_children()["blocks"];
  const std::int64_t tg4 = numel(*to_gray.children()[0]), tg8 = numel(*to_gray.children()[1]);
  const std::int64_t b8 = numel(*blocks.children()[0]);
  EXPECT_EQ(g->active_parameter_count(FadeState::stable(8)), g->active_parameter_count(FadeState::stable(4)) - tg4 + b8 + tg8);
  EXPECT_EQ(g->active_parameter_count(FadeState::fading(8, 0.5)), g->active_parameter_count(FadeState::stable(8)) + tg4);
  EXPECT_EQ(g->active_parameter_count(FadeState::stable(16)) <= numel(*g), true);

  // the stage-4 weights are the same storage whichever stage is active
  auto p4 = g->active_parameters(FadeState::stable(4));
  auto p16 = g->active_parameters(FadeState::stable(16));
  EXPECT_EQ(p4[0].data_ptr(), p16[0].data_ptr());
}

TEST(Critic, ScoresAndFade) {
  torch::manual_seed(4);
  auto d = build_discriminator(tiny_net());
  d->eval();
  torch::NoGradGuard ng;
  EXPECT_EQ(d->forward(torch::randn({1, 1, 4, 4}), FadeState::stable(4)).sizes(), (std::vector<int64_t>{1}));
  auto x = torch::randn({5, 1, 16, 16});
  EXPECT_EQ(d->forward(x, FadeState::stable(16)).sizes(), (std::vector<int64_t>{5}));
  EXPECT_TRUE(torch::allclose(d->forward(x, FadeState::fading(16, 1.0)), d->forward(x, FadeState::stable(16)), 1e-5, 1e-6));
  auto pooled = torch::avg_pool2d(x, 2);
  EXPECT_TRUE(torch::allclose(d->forward(x, FadeState::fading(16, 0.0)), d->forward(pooled, FadeState::stable(8)), 1e-5, 1e-6));
  try {
    d->forward(x, FadeState::stable(8));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(Critic, InputGradientsFinite) {
  auto d = build_discriminator(tiny_net());
  auto x = torch::randn({4, 1, 16, 16}).requires_grad_(true);
  auto g = torch::autograd::grad({d->forward(x, FadeState::stable(16)).sum()}, {x})[0];
  EXPECT_TRUE(torch::isfinite(g).all().item<bool>());
  EXPECT_GT(g.abs().sum().item<float>(), 0.0f);
}

TEST(AuxClassifier, OutputContract) {
  for (auto backbone : {AcBackbone::kSmallConv, AcBackbone::kXception}) {
    auto cfg = tiny_net();
    cfg.ac_backbone = backbone;
    auto ac = build_ac(cfg);
    ac->eval();
    torch::NoGradGuard ng;
    auto out = ac->forward(torch::randn({3, 1, 16, 16}));
    EXPECT_EQ(out.orientation.sizes(), (std::vector<int64_t>{3, 3}));
    EXPECT_EQ(out.tr_unit.sizes(), (std::vector<int64_t>{3}));
    EXPECT_EQ(out.te_unit.sizes(), (std::vector<int64_t>{3}));
    EXPECT_TRUE(torch::allclose(out.orientation.sum(1).to(torch::kDouble), torch::ones({3}, torch::kDouble), 0, 1e-6));
    EXPECT_THROW(ac->forward(torch::randn({3, 1, 8, 8})), Error);
  }
  EXPECT_EQ(ac_backbone_from_string(to_string(AcBackbone::kXception)), AcBackbone::kXception);
  EXPECT_THROW(ac_backbone_from_string("resnet"), Error);
}

TEST(Digest, DetectsChanges) {
  auto ac = build_ac(tiny_net());
  const auto before = parameter_digest(*ac);
  EXPECT_EQ(parameter_digest(*ac), before);
  {
    torch::NoGradGuard ng;
    ac->parameters()[0].add_(1e-3);
  }
  EXPECT_NE(parameter_digest(*ac), before);
}
