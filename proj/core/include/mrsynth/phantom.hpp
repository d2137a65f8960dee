#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrsynth/conddata.hpp"
#include "mrsynth/dataio.hpp"

namespace mrsynth {

/// Spin-echo magnitude: pd * (1 - exp(-tr/t1)) * exp(-te/t2).
/// Throws Error(kDomain) for non-positive relaxation times.
double phantom_signal(double pd, double t1_ms, double t2_ms, double tr_ms, double te_ms);

/// Ellipse in unit canvas coordinates: x to the right, y downward, both in [-1, 1].
struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 0.1;
  double ry = 0.1;
  double angle_rad = 0.0;
};

struct Tissue {
  std::string name;
  double pd = 1.0;
  double t1_ms = 1000.0;
  double t2_ms = 100.0;
  std::vector<Ellipse> shape;
  /// Anchored tissues ignore orientation layout and seeded jitter.
  bool anchored = false;
};

/// Tissues are painted in order, later entries over earlier ones.
struct PhantomSpec {
  std::vector<Tissue> tissues;
  int canvas = 64;
  double noise_sigma = 0.02;
  /// Scales the per-seed anatomical variation; 0 renders the nominal layout.
  double jitter = 1.0;

  /// Fluid, muscle and fat in a knee-like arrangement plus an anchored
  /// reference vial (pd 1, T1 1 ms, T2 1e6 ms) whose constant signal pins the
  /// per-slice intensity normalization.
  static PhantomSpec defaults(int canvas = 64);

  /// Throws Error(kConfig) on fewer than two tissues, pd outside (0, 1],
  /// non-positive T1/T2, negative noise, or shapes leaving the canvas.
  void validate() const;

  std::optional<std::size_t> tissue_index(const std::string& name) const;
};

/// Per-pixel tissue index (-1 = background) for an orientation. `seed`
/// selects the anatomical variation; nullopt gives the nominal layout.
std::vector<int> phantom_labels(const PhantomSpec& spec, std::size_t orientation_index,
                                std::optional<std::uint64_t> seed);

/// Noise-free, unnormalized signal image.
Image phantom_signal_image(const PhantomSpec& spec, const ConditionVector& c,
                           std::size_t orientation_index, std::uint64_t seed);

/// Deterministic in (spec, c, seed): signal image plus Gaussian noise of
/// noise_sigma, then preprocess_image to spec.canvas.
ImageRecord generate_phantom(const PhantomSpec& spec, const ConditionVector& c, std::uint64_t seed,
                             const ConditionSpace& space = {});

/// `count` slices grouped into studies of `slices_per_study`, each study with
/// a condition drawn uniformly from `space`.
std::vector<ImageRecord> generate_phantom_dataset(const PhantomSpec& spec,
                                                  const ConditionSpace& space, std::size_t count,
                                                  std::uint64_t seed, int slices_per_study = 3);

}  // namespace mrsynth
