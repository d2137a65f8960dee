#include "mrsynth/tensor_dataset.hpp"

#include <cstring>

#include "mrsynth/error.hpp"
#include "mrsynth/networks.hpp"

namespace mrsynth {

TensorDataset TensorDataset::subset(const torch::Tensor& rows) const {
  TensorDataset out;
  out.images = images.index_select(0, rows);
  out.targets = targets.index(rows);
  out.conditions = conditions.index_select(0, rows);
  auto idx = rows.to(torch::kLong).contiguous();
  const auto* p = idx.data_ptr<std::int64_t>();
  for (std::int64_t i = 0; i < idx.numel(); ++i) out.labels.push_back(labels[static_cast<std::size_t>(p[i])]);
  return out;
}

TensorDataset make_tensor_dataset(const std::vector<ImageRecord>& records, const ConditionSpace& space,
                                  int resolution) {
  if (records.empty()) throw Error(ErrorCode::kConfig, "dataset is empty", "records");
  const auto n = static_cast<std::int64_t>(records.size());
  TensorDataset ds;
  ds.images = torch::empty({n, 1, resolution, resolution});
  std::vector<EncodedCondition> encoded;
  encoded.reserve(records.size());
  auto* dst = ds.images.data_ptr<float>();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.pixels.rows() != resolution || r.pixels.cols() != resolution)
      throw Error(ErrorCode::kShape, "record " + r.id() + " is not " + std::to_string(resolution) +
                                         "x" + std::to_string(resolution));
    std::memcpy(dst + i * resolution * resolution, r.pixels.data().data(),
                sizeof(float) * static_cast<std::size_t>(resolution) * resolution);
    encoded.push_back(normalize_condition(r.condition(), space));
    ds.labels.push_back(r.condition());
  }
  ds.targets = AcTargets::from_conditions(encoded);
  ds.conditions = condition_tensor(encoded);
  return ds;
}

torch::Tensor downsample_to(const torch::Tensor& images, int resolution) {
  auto out = images;
  while (out.size(2) > resolution) {
    if (out.size(2) % 2 != 0) throw Error(ErrorCode::kShape, "cannot halve an odd resolution");
    out = torch::avg_pool2d(out, 2);
  }
  if (out.size(2) != resolution)
    throw Error(ErrorCode::kShape, "resolution " + std::to_string(resolution) + " not reachable by halving");
  return out;
}

}  // namespace mrsynth
