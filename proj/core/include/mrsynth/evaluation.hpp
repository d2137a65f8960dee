#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>
#include "mrsynth/conddata.hpp"
#include "mrsynth/image.hpp"
#include "mrsynth/networks.hpp"
#include "mrsynth/tensor_dataset.hpp"

namespace mrsynth {

/// Orientation accuracy and TR/TE mean absolute errors in milliseconds.
struct AcMetrics {
  double orientation_accuracy = 0.0;
  double tr_mae_ms = 0.0;
  double te_mae_ms = 0.0;
  std::int64_t n = 0;
};

void to_json(nlohmann::json& j, const AcMetrics& m);

/// Runs the classifier in inference mode over `images` ([N, 1, F, F]) in
/// chunks of `batch`.
AcOutput predict(AuxClassifier& ac, const torch::Tensor& images, std::int64_t batch = 256);

/// Accuracy of argmax orientation; MAEs after mapping the unit predictions
/// back to milliseconds. Throws Error(kInsufficientData) on an empty set.
AcMetrics eval_ac(AuxClassifier& ac, const TensorDataset& dataset, const ConditionSpace& space);

/// Metrics of raw predictions against labels; no network involved.
AcMetrics score_predictions(const AcOutput& pred, const std::vector<ConditionVector>& labels,
                            const ConditionSpace& space);

/// Draws `n` conditions (with replacement, seeded) from `label_distribution`,
/// generates one image per condition from seeded latents and evaluates the
/// classifier against the drawn conditions.
AcMetrics eval_ac_on_synthetic(AuxClassifier& ac, Generator& generator,
                               const std::vector<ConditionVector>& label_distribution, std::int64_t n,
                               const ConditionSpace& space, std::uint64_t seed);

/// Generates images for explicit (latent, condition) pairs at the final
/// resolution in inference mode. latents is [N, latent_dim].
torch::Tensor generate_images(Generator& generator, const torch::Tensor& latents,
                              const std::vector<ConditionVector>& conditions, const ConditionSpace& space);

struct GridCell {
  int row = 0;
  int col = 0;
  ConditionVector intended;
  ConditionVector readback;
};

struct InterpolationGrid {
  std::vector<Image> tiles;  // row-major, rows follow tr_values, columns te_values
  std::vector<GridCell> cells;
  RgbImage montage;          // tiles with the readback annotated in red

  nlohmann::json sidecar() const;
};

/// Renders the same latent across every (TR, TE) pair. Throws
/// Error(kRange) for values outside the condition space.
InterpolationGrid render_interpolation_grid(Generator& generator, AuxClassifier& ac,
                                            const std::vector<float>& latent,
                                            const std::vector<double>& tr_values,
                                            const std::vector<double>& te_values,
                                            const std::string& orientation, const ConditionSpace& space);

}  // namespace mrsynth
