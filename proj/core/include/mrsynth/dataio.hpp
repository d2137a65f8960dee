#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mrsynth/conddata.hpp"
#include "mrsynth/image.hpp"

namespace mrsynth {

/// One 2D slice and the header attributes the filter cascade looks at.
struct ImageRecord {
  std::string study_id;
  std::string series_id;
  int slice_index = 0;
  int slice_count = 1;
  Image pixels;
  std::string pixels_path;
  double tr_ms = 0.0;
  double te_ms = 0.0;
  std::string orientation;
  double field_strength_t = 0.0;
  std::optional<std::string> manufacturer;
  std::optional<std::string> coil_manufacturer;
  bool fat_saturated = false;
  std::string series_description;

  /// "study/series/slice", unique within a corpus.
  std::string id() const;
  ConditionVector condition() const { return {tr_ms, te_ms, orientation}; }
};

struct FilterConfig {
  double field_strength_t = 1.5;
  double field_tolerance_t = 0.05;
  /// Case-insensitive substring match against the (deduced) manufacturer.
  std::string vendor = "siemens";
  Range tr_ms{1800.0, 5000.0};
  double te_max_ms = 50.0;
  bool require_fat_saturation = true;
  int central_slices = 6;
};

struct Rejection {
  std::string record_id;
  std::string rule;
};

struct FilterReport {
  std::size_t input_count = 0;
  std::size_t kept_count = 0;
  std::vector<Rejection> rejected;
};

struct ManifestOptions {
  bool load_pixels = true;
};

/// Reads a CSV manifest (header row; see README for columns). Pixel paths are
/// resolved relative to the manifest's directory. Empty optional cells stay
/// absent; no value is inferred at parse time.
std::vector<ImageRecord> parse_manifest(const std::filesystem::path& path,
                                        const ManifestOptions& options = {});

/// Writes records as a manifest. `pixel_dir` (relative to the manifest) is
/// where each record's pixels are stored as <id>.pfm when `write_pixels`.
void write_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& records,
                    const std::string& pixel_dir = "pixels", bool write_pixels = true);

/// Fills a missing manufacturer from the receiver coil manufacturer.
ImageRecord deduce_manufacturer(ImageRecord r);

/// First-index of the `n` central slices of a volume with `slice_count`
/// slices; odd remainders go to the lower side.
int central_slice_start(int slice_count, int n);

std::pair<std::vector<ImageRecord>, FilterReport> filter_records(std::vector<ImageRecord> records,
                                                                 const FilterConfig& rules = {});

struct DatasetSplit {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> val;
  std::vector<ImageRecord> test;
};

/// Whole-study split: studies are shuffled with `seed`, then assigned to
/// validation until it holds >= val_size images, then to test until
/// >= test_size, and the rest to training.
DatasetSplit split_by_study(const std::vector<ImageRecord>& records, std::size_t val_size,
                            std::size_t test_size, std::uint64_t seed);

/// Min-max to [-1, 1] then corner-aligned bilinear resize to side x side.
Image preprocess_image(const Image& pixels, int side);

/// Dataset directory layout: train.csv, val.csv, test.csv and pixels/.
void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_dataset(const std::filesystem::path& dir);

}  // namespace mrsynth
