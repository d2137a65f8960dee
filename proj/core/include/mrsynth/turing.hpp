#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "mrsynth/conddata.hpp"

namespace mrsynth {

enum class TuringLabel { kReal, kSynthetic };

const char* to_string(TuringLabel label);
TuringLabel turing_label_from_string(const std::string& s);

/// An image shown to readers. `ref` is an opaque reference (file path or id).
struct TuringItem {
  std::string ref;
  TuringLabel truth = TuringLabel::kReal;
  std::optional<ConditionVector> condition;

  bool operator==(const TuringItem&) const = default;
};

struct TuringGrid {
  std::vector<TuringItem> items;
  bool operator==(const TuringGrid&) const = default;
};

struct TuringPoolItem {
  std::string ref;
  std::optional<ConditionVector> condition;
};

/// Grids with equal numbers of real and synthetic images plus the labels
/// each reader assigned per grid.
struct TuringSession {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t grid_size = 6;
  std::vector<TuringGrid> grids;
  std::vector<std::string> readers;
  std::map<std::string, std::map<std::size_t, std::vector<TuringLabel>>> labels;
  std::vector<std::string> warnings;

  std::size_t item_count() const;
  bool has_reader(const std::string& reader) const;
  /// No-op when the reader is already registered.
  void register_reader(const std::string& reader);
  bool complete_for(const std::string& reader) const;

  bool operator==(const TuringSession&) const = default;
};

void to_json(nlohmann::json& j, const TuringSession& s);
void from_json(const nlohmann::json& j, TuringSession& s);
void save_session(const std::filesystem::path& path, const TuringSession& s);
TuringSession load_session(const std::filesystem::path& path);

/// Pairs real[i] with synth[i], draws n_per_class pairs with a seeded
/// shuffle and packs them into grids of grid_size/2 real + grid_size/2
/// synthetic items in a seeded order. When n_per_class is not a multiple of
/// grid_size/2 it is reduced to one and a warning is recorded.
/// Throws Error(kInsufficientData) for pools smaller than n_per_class,
/// Error(kConfig) for an odd or zero grid size and Error(kSchema) when a
/// synthetic item's condition differs from its paired real item.
TuringSession build_turing_session(const std::vector<TuringPoolItem>& real_pool,
                                   const std::vector<TuringPoolItem>& synth_pool, std::size_t n_per_class,
                                   std::uint64_t seed, std::size_t grid_size = 6);

struct SubmitOutcome {
  bool accepted = false;
  std::string reason;
};

/// Accepted iff the labels hold exactly grid_size/2 of each class; a
/// rejection leaves the session untouched and a resubmission overwrites.
/// Throws Error(kNotFound) for an unknown reader or grid index.
SubmitOutcome submit_grid_labels(TuringSession& session, const std::string& reader, std::size_t grid_index,
                                 const std::vector<TuringLabel>& labels);

/// Predicted x true counts.
struct ConfusionMatrix {
  std::int64_t pred_real_true_real = 0;
  std::int64_t pred_real_true_synth = 0;
  std::int64_t pred_synth_true_real = 0;
  std::int64_t pred_synth_true_synth = 0;

  std::int64_t total() const;
  double accuracy() const;
  void add(TuringLabel predicted, TuringLabel truth);
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ReaderReport {
  std::string reader;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  /// Accuracy rounded to whole percent, as reported in publications.
  double accuracy_rounded = 0.0;
};

/// Items on which both readers gave the same prediction, by prediction and
/// true label (the off-diagonal disagreement cells are left at zero), plus
/// Cohen's kappa over all items.
struct AgreementReport {
  std::string reader_a;
  std::string reader_b;
  ConfusionMatrix agreement;
  std::int64_t agreed = 0;
  double kappa = 0.0;
};

struct TuringReport {
  std::vector<ReaderReport> readers;
  /// 1 - mean reader accuracy, from raw and from rounded accuracies.
  double mean_error = 0.0;
  double mean_error_rounded = 0.0;
  std::vector<AgreementReport> agreements;
};

void to_json(nlohmann::json& j, const ConfusionMatrix& m);
void to_json(nlohmann::json& j, const TuringReport& r);

/// Analytics over the given readers (all registered readers when empty).
/// Throws Error(kIncomplete) when a reader has not labeled every grid and
/// Error(kNotFound) for unknown readers.
TuringReport turing_analytics(const TuringSession& session, const std::vector<std::string>& readers = {});

AgreementReport reader_agreement(const TuringSession& session, const std::string& a, const std::string& b);

}  // namespace mrsynth
