#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mrsynth {

struct Range {
  double min = 0.0;
  double max = 1.0;

  double span() const { return max - min; }
  bool contains(double v) const { return v >= min && v <= max; }
  bool operator==(const Range&) const = default;
};

/// Acquisition parameters of one image: repetition time, echo time and the
/// imaging orientation. This is the conditioning payload of the generator.
struct ConditionVector {
  double tr_ms = 0.0;
  double te_ms = 0.0;
  std::string orientation;

  bool operator==(const ConditionVector&) const = default;
};

/// Condition scaled to the unit interval plus a one-hot orientation code.
struct EncodedCondition {
  double tr_unit = 0.0;
  double te_unit = 0.0;
  std::vector<double> orientation_onehot;
};

/// Valid TR/TE ranges and the ordered orientation vocabulary. The ranges are
/// the min-max scaling constants used by normalize_condition.
class ConditionSpace {
 public:
  /// TR [1800, 5000] ms, TE [12, 50] ms, {coronal, sagittal, axial}.
  ConditionSpace();
  ConditionSpace(Range tr, Range te, std::vector<std::string> orientations);

  const Range& tr_range() const { return tr_; }
  const Range& te_range() const { return te_; }
  const std::vector<std::string>& orientations() const { return orientations_; }
  std::size_t orientation_count() const { return orientations_.size(); }
  std::optional<std::size_t> orientation_index(const std::string& label) const;

  /// Width of the encoded vector fed to the generator: 2 + |orientations|.
  std::size_t condition_dim() const { return 2 + orientations_.size(); }

  bool operator==(const ConditionSpace&) const = default;

 private:
  Range tr_{1800.0, 5000.0};
  Range te_{12.0, 50.0};
  std::vector<std::string> orientations_;
};

bool validate_condition(const ConditionVector& c, const ConditionSpace& s);

// Throws Error(kRange) naming the first invalid field.
EncodedCondition normalize_condition(const ConditionVector& c, const ConditionSpace& s);

// Throws Error(kEncoding) when the one-hot code is not a valid single selection.
ConditionVector denormalize_condition(const EncodedCondition& e, const ConditionSpace& s);

/// Maps raw classifier outputs (unit-scale regressions, class probabilities)
/// back to milliseconds and the argmax label. No range check: predictions may
/// fall outside the training range.
ConditionVector decode_prediction(double tr_unit, double te_unit,
                                  const std::vector<double>& orientation_probs,
                                  const ConditionSpace& s);

void to_json(nlohmann::json& j, const ConditionVector& c);
void from_json(const nlohmann::json& j, ConditionVector& c);
void to_json(nlohmann::json& j, const ConditionSpace& s);
void from_json(const nlohmann::json& j, ConditionSpace& s);

}  // namespace mrsynth
