#pragma once

#include <torch/torch.h>

#include <vector>

#include "mrsynth/conddata.hpp"
#include "mrsynth/dataio.hpp"
#include "mrsynth/losses.hpp"

namespace mrsynth {

/// Preprocessed images stacked as [N, 1, R, R] with their condition labels.
struct TensorDataset {
  torch::Tensor images;
  AcTargets targets;
  torch::Tensor conditions;  // [N, condition_dim] generator input encoding
  std::vector<ConditionVector> labels;

  std::int64_t size() const { return images.defined() ? images.size(0) : 0; }
  int resolution() const { return images.defined() ? static_cast<int>(images.size(2)) : 0; }
  TensorDataset subset(const torch::Tensor& rows) const;
};

/// Records must be square images of side `resolution` (already preprocessed)
/// and carry conditions valid in `space`.
TensorDataset make_tensor_dataset(const std::vector<ImageRecord>& records, const ConditionSpace& space,
                                  int resolution);

/// Repeated 2x box downsampling of [N, 1, R, R] images to `resolution`.
torch::Tensor downsample_to(const torch::Tensor& images, int resolution);

}  // namespace mrsynth
