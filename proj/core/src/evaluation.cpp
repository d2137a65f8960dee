#include "mrsynth/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "mrsynth/error.hpp"
#include "mrsynth/rng.hpp"

namespace mrsynth {

void to_json(nlohmann::json& j, const AcMetrics& m) {
  j = {{"orientation_accuracy", m.orientation_accuracy},
       {"tr_mae_ms", m.tr_mae_ms},
       {"te_mae_ms", m.te_mae_ms},
       {"n", m.n}};
}

AcOutput predict(AuxClassifier& ac, const torch::Tensor& images, std::int64_t batch) {
  const bool was_training = ac->is_training();
  ac->eval();
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> logits, orientation, tr, te;
  for (std::int64_t start = 0; start < images.size(0); start += batch) {
    auto out = ac->forward(images.slice(0, start, std::min(images.size(0), start + batch)));
    logits.push_back(out.logits);
    orientation.push_back(out.orientation);
    tr.push_back(out.tr_unit);
    te.push_back(out.te_unit);
  }
  ac->train(was_training);
  if (logits.empty()) throw Error(ErrorCode::kInsufficientData, "no images to classify");
  return {torch::cat(logits), torch::cat(orientation), torch::cat(tr), torch::cat(te)};
}

AcMetrics score_predictions(const AcOutput& pred, const std::vector<ConditionVector>& labels,
                            const ConditionSpace& space) {
  const auto n = static_cast<std::int64_t>(labels.size());
  if (n == 0) throw Error(ErrorCode::kInsufficientData, "no labels to score against");
  if (pred.orientation.size(0) != n) throw Error(ErrorCode::kShape, "prediction count differs from label count");
  auto probs = pred.orientation.to(torch::kDouble).contiguous();
  auto tr = pred.tr_unit.to(torch::kDouble).contiguous();
  auto te = pred.te_unit.to(torch::kDouble).contiguous();
  const auto k = probs.size(1);
  const double* p = probs.data_ptr<double>();
  AcMetrics m;
  m.n = n;
  std::int64_t correct = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<double> row(p + i * k, p + (i + 1) * k);
    const auto decoded = decode_prediction(tr.data_ptr<double>()[i], te.data_ptr<double>()[i], row, space);
    const auto& truth = labels[static_cast<std::size_t>(i)];
    correct += decoded.orientation == truth.orientation;
    m.tr_mae_ms += std::abs(decoded.tr_ms - truth.tr_ms);
    m.te_mae_ms += std::abs(decoded.te_ms - truth.te_ms);
  }
  m.orientation_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  m.tr_mae_ms /= static_cast<double>(n);
  m.te_mae_ms /= static_cast<double>(n);
  return m;
}

AcMetrics eval_ac(AuxClassifier& ac, const TensorDataset& dataset, const ConditionSpace& space) {
  if (dataset.size() == 0) throw Error(ErrorCode::kInsufficientData, "evaluation set is empty");
  return score_predictions(predict(ac, dataset.images), dataset.labels, space);
}

torch::Tensor generate_images(Generator& generator, const torch::Tensor& latents,
                              const std::vector<ConditionVector>& conditions, const ConditionSpace& space) {
  const auto& cfg = generator->config();
  if (latents.dim() != 2 || latents.size(1) != cfg.latent_dim)
    throw Error(ErrorCode::kShape, "latents must be [N, " + std::to_string(cfg.latent_dim) + "]", "latent");
  if (latents.size(0) != static_cast<std::int64_t>(conditions.size()))
    throw Error(ErrorCode::kShape, "one condition per latent is required", "conditions");
  std::vector<EncodedCondition> encoded;
  encoded.reserve(conditions.size());
  for (const auto& c : conditions) encoded.push_back(normalize_condition(c, space));
  auto cond = condition_tensor(encoded);

  const bool was_training = generator->is_training();
  generator->eval();
  torch::NoGradGuard no_grad;
  const auto state = FadeState::stable(cfg.final_resolution);
  std::vector<torch::Tensor> out;
  constexpr std::int64_t kChunk = 64;
  for (std::int64_t start = 0; start < latents.size(0); start += kChunk) {
    const auto end = std::min(latents.size(0), start + kChunk);
    out.push_back(generator->forward(latents.slice(0, start, end).to(torch::kFloat), cond.slice(0, start, end), state));
  }
  generator->train(was_training);
  if (out.empty()) return torch::empty({0, 1, cfg.final_resolution, cfg.final_resolution});
  return torch::cat(out);
}

AcMetrics eval_ac_on_synthetic(AuxClassifier& ac, Generator& generator,
                               const std::vector<ConditionVector>& label_distribution, std::int64_t n,
                               const ConditionSpace& space, std::uint64_t seed) {
  if (label_distribution.empty() || n <= 0)
    throw Error(ErrorCode::kInsufficientData, "synthetic evaluation needs labels and n > 0");
  std::mt19937_64 eng(mix_seed(seed, 0x5c));
  std::vector<ConditionVector> drawn;
  drawn.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    drawn.push_back(label_distribution[uniform_index(eng, label_distribution.size())]);
  const auto dim = static_cast<std::size_t>(generator->config().latent_dim);
  auto z = latent_from_seed(mix_seed(seed, 0x2a), dim, static_cast<std::size_t>(n));
  auto latents = torch::from_blob(z.data(), {n, static_cast<std::int64_t>(dim)}, torch::kFloat).clone();
  auto images = generate_images(generator, latents, drawn, space);
  return score_predictions(predict(ac, images), drawn, space);
}

// ---------------------------------------------------------------------------

namespace {

Image tensor_to_image(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat).contiguous();
  const auto rows = static_cast<int>(c.size(-2));
  const auto cols = static_cast<int>(c.size(-1));
  const float* p = c.data_ptr<float>();
  return Image(rows, cols, std::vector<float>(p, p + static_cast<std::size_t>(rows) * cols));
}

std::string fmt_ms(double v, int decimals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

nlohmann::json InterpolationGrid::sidecar() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells)
    cells_json.push_back({{"row", c.row}, {"col", c.col}, {"intended", c.intended}, {"readback", c.readback}});
  return {{"layout", "rows follow TR, columns follow TE"}, {"cells", cells_json}};
}

InterpolationGrid render_interpolation_grid(Generator& generator, AuxClassifier& ac,
                                            const std::vector<float>& latent,
                                            const std::vector<double>& tr_values,
                                            const std::vector<double>& te_values,
                                            const std::string& orientation, const ConditionSpace& space) {
  const auto dim = generator->config().latent_dim;
  if (static_cast<int>(latent.size()) != dim)
    throw Error(ErrorCode::kShape, "latent must have " + std::to_string(dim) + " values", "latent");
  if (tr_values.empty() || te_values.empty())
    throw Error(ErrorCode::kRange, "grid needs at least one TR and one TE value", "tr");
  std::vector<ConditionVector> conditions;
  for (double tr : tr_values)
    for (double te : te_values) {
      ConditionVector c{tr, te, orientation};
      normalize_condition(c, space);
      conditions.push_back(c);
    }
  const auto n = static_cast<std::int64_t>(conditions.size());
  auto z = torch::from_blob(const_cast<float*>(latent.data()), {1, dim}, torch::kFloat).clone().expand({n, dim}).contiguous();
  auto images = generate_images(generator, z, conditions, space);
  auto pred = predict(ac, images);
  auto probs = pred.orientation.to(torch::kDouble).contiguous();
  const auto k = probs.size(1);

  InterpolationGrid grid;
  const int side = static_cast<int>(images.size(-1));
  constexpr int kGap = 2;
  const int rows = static_cast<int>(tr_values.size());
  const int cols = static_cast<int>(te_values.size());
  grid.montage = RgbImage(rows * side + (rows + 1) * kGap, cols * side + (cols + 1) * kGap);
  const int scale = side >= 128 ? 2 : 1;
  for (std::int64_t i = 0; i < n; ++i) {
    GridCell cell;
    cell.row = static_cast<int>(i / cols);
    cell.col = static_cast<int>(i % cols);
    cell.intended = conditions[static_cast<std::size_t>(i)];
    const double* p = probs.data_ptr<double>() + i * k;
    cell.readback = decode_prediction(pred.tr_unit[i].item<double>(), pred.te_unit[i].item<double>(),
                                      std::vector<double>(p, p + k), space);
    grid.tiles.push_back(tensor_to_image(images[i][0]));
    auto tile = to_rgb(grid.tiles.back());
    draw_text(tile, 1, 1, "TR " + fmt_ms(cell.readback.tr_ms, 0), 255, 0, 0, scale);
    draw_text(tile, 1 + 6 * scale, 1, "TE " + fmt_ms(cell.readback.te_ms, 1), 255, 0, 0, scale);
    paste(grid.montage, tile, kGap + cell.row * (side + kGap), kGap + cell.col * (side + kGap));
    grid.cells.push_back(std::move(cell));
  }
  return grid;
}

}  // namespace mrsynth
