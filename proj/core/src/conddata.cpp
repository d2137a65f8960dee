#include "mrsynth/conddata.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mrsynth/error.hpp"

namespace mrsynth {

ConditionSpace::ConditionSpace() : orientations_{"coronal", "sagittal", "axial"} {}

ConditionSpace::ConditionSpace(Range tr, Range te, std::vector<std::string> orientations)
    : tr_(tr), te_(te), orientations_(std::move(orientations)) {
  if (!(tr_.min < tr_.max)) throw Error(ErrorCode::kConfig, "degenerate TR range", "tr_range");
  if (!(te_.min < te_.max)) throw Error(ErrorCode::kConfig, "degenerate TE range", "te_range");
  if (orientations_.empty())
    throw Error(ErrorCode::kConfig, "orientation list is empty", "orientations");
  std::set<std::string> seen(orientations_.begin(), orientations_.end());
  if (seen.size() != orientations_.size())
    throw Error(ErrorCode::kConfig, "duplicate orientation label", "orientations");
}

std::optional<std::size_t> ConditionSpace::orientation_index(const std::string& label) const {
  auto it = std::find(orientations_.begin(), orientations_.end(), label);
  if (it == orientations_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - orientations_.begin());
}

bool validate_condition(const ConditionVector& c, const ConditionSpace& s) {
  return std::isfinite(c.tr_ms) && std::isfinite(c.te_ms) && s.tr_range().contains(c.tr_ms) &&
         s.te_range().contains(c.te_ms) && s.orientation_index(c.orientation).has_value();
}

EncodedCondition normalize_condition(const ConditionVector& c, const ConditionSpace& s) {
  if (!std::isfinite(c.tr_ms) || !s.tr_range().contains(c.tr_ms))
    throw Error(ErrorCode::kRange, "tr_ms outside configured range", "tr_ms");
  if (!std::isfinite(c.te_ms) || !s.te_range().contains(c.te_ms))
    throw Error(ErrorCode::kRange, "te_ms outside configured range", "te_ms");
  auto idx = s.orientation_index(c.orientation);
  if (!idx) throw Error(ErrorCode::kRange, "unknown orientation '" + c.orientation + "'", "orientation");

  EncodedCondition e;
  e.tr_unit = (c.tr_ms - s.tr_range().min) / s.tr_range().span();
  e.te_unit = (c.te_ms - s.te_range().min) / s.te_range().span();
  e.orientation_onehot.assign(s.orientation_count(), 0.0);
  e.orientation_onehot[*idx] = 1.0;
  return e;
}

ConditionVector denormalize_condition(const EncodedCondition& e, const ConditionSpace& s) {
  if (e.orientation_onehot.size() != s.orientation_count())
    throw Error(ErrorCode::kEncoding, "one-hot length does not match orientation count",
                "orientation_onehot");
  std::size_t hot = 0;
  std::size_t hot_index = 0;
  for (std::size_t i = 0; i < e.orientation_onehot.size(); ++i) {
    const double v = e.orientation_onehot[i];
    if (v == 1.0) {
      ++hot;
      hot_index = i;
    } else if (v != 0.0) {
      throw Error(ErrorCode::kEncoding, "one-hot component not in {0,1}", "orientation_onehot");
    }
  }
  if (hot != 1) throw Error(ErrorCode::kEncoding, "one-hot sum must be 1", "orientation_onehot");

  return {s.tr_range().min + e.tr_unit * s.tr_range().span(),
          s.te_range().min + e.te_unit * s.te_range().span(), s.orientations()[hot_index]};
}

ConditionVector decode_prediction(double tr_unit, double te_unit,
                                  const std::vector<double>& orientation_probs,
                                  const ConditionSpace& s) {
  if (orientation_probs.size() != s.orientation_count())
    throw Error(ErrorCode::kShape, "probability vector length mismatch", "orientation_probs");
  const auto best = std::max_element(orientation_probs.begin(), orientation_probs.end());
  return {s.tr_range().min + tr_unit * s.tr_range().span(),
          s.te_range().min + te_unit * s.te_range().span(),
          s.orientations()[static_cast<std::size_t>(best - orientation_probs.begin())]};
}

void to_json(nlohmann::json& j, const ConditionVector& c) {
  j = nlohmann::json{{"tr_ms", c.tr_ms}, {"te_ms", c.te_ms}, {"orientation", c.orientation}};
}

void from_json(const nlohmann::json& j, ConditionVector& c) {
  if (!j.is_object()) throw Error(ErrorCode::kSchema, "condition must be an object", "condition");
  for (const char* key : {"tr_ms", "te_ms"}) {
    if (!j.contains(key) || !j.at(key).is_number())
      throw Error(ErrorCode::kSchema, std::string("missing or non-numeric ") + key, key);
  }
  if (!j.contains("orientation") || !j.at("orientation").is_string())
    throw Error(ErrorCode::kSchema, "missing or non-string orientation", "orientation");
  c.tr_ms = j.at("tr_ms").get<double>();
  c.te_ms = j.at("te_ms").get<double>();
  c.orientation = j.at("orientation").get<std::string>();
}

void to_json(nlohmann::json& j, const ConditionSpace& s) {
  j = nlohmann::json{{"tr", {s.tr_range().min, s.tr_range().max}},
                     {"te", {s.te_range().min, s.te_range().max}},
                     {"orientations", s.orientations()}};
}

void from_json(const nlohmann::json& j, ConditionSpace& s) {
  const auto tr = j.at("tr").get<std::vector<double>>();
  const auto te = j.at("te").get<std::vector<double>>();
  if (tr.size() != 2 || te.size() != 2)
    throw Error(ErrorCode::kSchema, "ranges must be [min, max] pairs", tr.size() != 2 ? "tr" : "te");
  s = ConditionSpace({tr[0], tr[1]}, {te[0], te[1]},
                     j.at("orientations").get<std::vector<std::string>>());
}

}  // namespace mrsynth
