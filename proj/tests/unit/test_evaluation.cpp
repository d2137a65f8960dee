#include <gtest/gtest.h>

#include <random>

#include "mrsynth/error.hpp"
#include "mrsynth/evaluation.hpp"
#include "support.hpp"

using namespace mrsynth;
using mrsynth::testkit::tiny_net;

namespace {

// Classifier outputs that decode exactly to `labels`.
AcOutput oracle_pred(const std::vector<ConditionVector>& labels, const ConditionSpace& space) {
  const auto n = static_cast<int64_t>(labels.size());
  AcOutput out;
  out.orientation = torch::zeros({n, static_cast<int64_t>(space.orientation_count())}, torch::kDouble);
  out.tr_unit = torch::empty({n}, torch::kDouble);
  out.te_unit = torch::empty({n}, torch::kDouble);
  for (int64_t i = 0; i < n; ++i) {
    auto e = normalize_condition(labels[i], space);
    out.tr_unit[i] = e.tr_unit;
    out.te_unit[i] = e.te_unit;
    out.orientation[i][static_cast<int64_t>(*space.orientation_index(labels[i].orientation))] = 1.0;
  }
  out.logits = out.orientation;
  return out;
}

std::vector<ConditionVector> random_labels(int n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> tr(1800, 5000), te(12, 50);
  const char* names[] = {"coronal", "sagittal", "axial"};
  std::vector<ConditionVector> out;
  for (int i = 0; i < n; ++i) out.push_back({tr(eng), te(eng), names[eng() % 3]});
  return out;
}

}  // namespace

TEST(Score, PerfectPredictor) {
  ConditionSpace space;
  auto labels = random_labels(50, 1);
  auto m = score_predictions(oracle_pred(labels, space), labels, space);
  EXPECT_EQ(m.orientation_accuracy, 1.0);
  EXPECT_NEAR(m.tr_mae_ms, 0.0, 1e-9);
  EXPECT_NEAR(m.te_mae_ms, 0.0, 1e-9);
  EXPECT_EQ(m.n, 50);
}

TEST(Score, OppositeEndpointTr) {
  ConditionSpace space;
  std::vector<ConditionVector> labels = {{1800, 20, "axial"}, {5000, 20, "axial"}};
  auto pred = oracle_pred(labels, space);
  pred.tr_unit = torch::tensor({1.0, 0.0}, torch::kDouble);
  auto m = score_predictions(pred, labels, space);
  EXPECT_DOUBLE_EQ(m.tr_mae_ms, 3200.0);
  EXPECT_NEAR(m.te_mae_ms, 0.0, 1e-9);
}

TEST(Score, WrongOrientationsAndOrderInvariance) {
  ConditionSpace space;
  auto labels = random_labels(40, 2);
  auto pred = oracle_pred(labels, space);
  for (int i = 0; i < 10; ++i) pred.orientation[i] = pred.orientation[i].roll(1);
  pred.te_unit += 0.1;
  auto m = score_predictions(pred, labels, space);
  EXPECT_DOUBLE_EQ(m.orientation_accuracy, 0.75);
  EXPECT_NEAR(m.te_mae_ms, 3.8, 1e-6);

  auto perm = torch::randperm(40, torch::kLong);
  AcOutput shuffled{pred.logits.index_select(0, perm), pred.orientation.index_select(0, perm),
                    pred.tr_unit.index_select(0, perm), pred.te_unit.index_select(0, perm)};
  std::vector<ConditionVector> shuffled_labels;
  for (int64_t i = 0; i < 40; ++i) shuffled_labels.push_back(labels[perm[i].item<int64_t>()]);
  auto m2 = score_predictions(shuffled, shuffled_labels, space);
  EXPECT_DOUBLE_EQ(m2.orientation_accuracy, m.orientation_accuracy);
  EXPECT_NEAR(m2.te_mae_ms, m.te_mae_ms, 1e-9);
  EXPECT_NEAR(m2.tr_mae_ms, m.tr_mae_ms, 1e-9);
}

TEST(Score, EmptyIsInsufficientData) {
  ConditionSpace space;
  try {
    score_predictions(oracle_pred({}, space), {}, space);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(EvalAc, MatchesScoreOfPredict) {
  ConditionSpace space;
  auto ds = testkit::phantom_tensors(10, 16, 7);
  auto ac = build_ac(tiny_net());
  auto direct = eval_ac(ac, ds, space);
  auto viaparts = score_predictions(predict(ac, ds.images, 3), ds.labels, space);
  EXPECT_EQ(direct.orientation_accuracy, viaparts.orientation_accuracy);
  EXPECT_NEAR(direct.tr_mae_ms, viaparts.tr_mae_ms, 1e-3);
  EXPECT_EQ(direct.n, 10);
}

TEST(Synthetic, UntrainedGeneratorGivesFiniteMetrics) {
  ConditionSpace space;
  torch::manual_seed(0);
  auto g = build_generator(tiny_net());
  auto ac = build_ac(tiny_net());
  auto labels = random_labels(5, 3);
  auto m = eval_ac_on_synthetic(ac, g, labels, 20, space, 9);
  EXPECT_EQ(m.n, 20);
  EXPECT_TRUE(std::isfinite(m.tr_mae_ms) && std::isfinite(m.te_mae_ms));
  auto again = eval_ac_on_synthetic(ac, g, labels, 20, space, 9);
  EXPECT_EQ(again.te_mae_ms, m.te_mae_ms);
  EXPECT_THROW(eval_ac_on_synthetic(ac, g, labels, 0, space, 9), Error);
  EXPECT_THROW(eval_ac_on_synthetic(ac, g, {}, 5, space, 9), Error);
}

TEST(Grid, OneByOne) {
  ConditionSpace space;
  auto g = build_generator(tiny_net());
  auto ac = build_ac(tiny_net());
  std::vector<float> z(8, 0.3f);
  auto grid = render_interpolation_grid(g, ac, z, {3000}, {30}, "axial", space);
  ASSERT_EQ(grid.tiles.size(), 1u);
  ASSERT_EQ(grid.cells.size(), 1u);
  EXPECT_EQ(grid.cells[0].intended, (ConditionVector{3000, 30, "axial"}));
  auto direct = generate_images(g, torch::tensor(z).view({1, 8}), {{3000, 30, "axial"}}, space);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) EXPECT_FLOAT_EQ(grid.tiles[0].at(r, c), direct[0][0][r][c].item<float>());
}

TEST(Grid, ThreeByThreeSidecarAndMontage) {
  ConditionSpace space;
  auto g = build_generator(tiny_net());
  auto ac = build_ac(tiny_net());
  std::vector<float> z(8, -0.2f);
  auto grid = render_interpolation_grid(g, ac, z, {1800, 3400, 5000}, {12, 31, 50}, "coronal", space);
  EXPECT_EQ(grid.tiles.size(), 9u);
  auto side = grid.sidecar();
  ASSERT_EQ(side["cells"].size(), 9u);
  EXPECT_EQ(side["cells"][5]["row"], 1);
  EXPECT_EQ(side["cells"][5]["col"], 2);
  EXPECT_EQ(side["cells"][5]["intended"]["te_ms"], 50.0);
  EXPECT_TRUE(side["cells"][5]["readback"].contains("tr_ms"));
  EXPECT_GT(grid.montage.cols, 3 * 16);
  EXPECT_GT(grid.montage.rows, 3 * 16);
  EXPECT_NE(grid.tiles[0], grid.tiles[2]);
}

TEST(Grid, OutOfRangeValueIsRejected) {
  ConditionSpace space;
  auto g = build_generator(tiny_net());
  auto ac = build_ac(tiny_net());
  std::vector<float> z(8, 0.0f);
  try {
    render_interpolation_grid(g, ac, z, {3000}, {12, 60}, "axial", space);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRange);
    EXPECT_EQ(e.field(), "te_ms");
  }
  EXPECT_THROW(render_interpolation_grid(g, ac, z, {3000}, {30}, "oblique", space), Error);
  EXPECT_THROW(render_interpolation_grid(g, ac, std::vector<float>(7, 0.0f), {3000}, {30}, "axial", space), Error);
}
