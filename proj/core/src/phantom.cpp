#include "mrsynth/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "mrsynth/error.hpp"
#include "mrsynth/rng.hpp"

namespace mrsynth {

double phantom_signal(double pd, double t1_ms, double t2_ms, double tr_ms, double te_ms) {
  if (!(t1_ms > 0.0) || !(t2_ms > 0.0))
    throw Error(ErrorCode::kDomain, "relaxation times must be positive", t1_ms > 0.0 ? "t2_ms" : "t1_ms");
  return pd * (1.0 - std::exp(-tr_ms / t1_ms)) * std::exp(-te_ms / t2_ms);
}

PhantomSpec PhantomSpec::defaults(int canvas) {
  PhantomSpec spec;
  spec.canvas = canvas;
  spec.tissues = {
      {"fat", 0.9, 260.0, 84.0, {{0.0, 0.05, 0.80, 0.55, 0.0}}, false},
      {"muscle", 0.8, 870.0, 47.0, {{0.0, 0.05, 0.62, 0.40, 0.0}}, false},
      {"fluid", 1.0, 2500.0, 250.0, {{0.20, 0.0, 0.26, 0.17, 0.0}}, false},
      {"reference", 1.0, 1.0, 1.0e6, {{-0.80, -0.80, 0.11, 0.11, 0.0}}, true},
  };
  return spec;
}

std::optional<std::size_t> PhantomSpec::tissue_index(const std::string& name) const {
  for (std::size_t i = 0; i < tissues.size(); ++i)
    if (tissues[i].name == name) return i;
  return std::nullopt;
}

namespace {

struct Affine {
  // x' = a*x + b*y + tx ; y' = c*x + d*y + ty
  double a = 1, b = 0, c = 0, d = 1, tx = 0, ty = 0;

  Affine then(const Affine& o) const {
    return {o.a * a + o.b * c, o.a * b + o.b * d, o.c * a + o.d * c,
            o.c * b + o.d * d, o.a * tx + o.b * ty + o.tx, o.c * tx + o.d * ty + o.ty};
  }
  Affine inverse() const {
    const double det = a * d - b * c;
    const double ia = d / det, ib = -b / det, ic = -c / det, id = a / det;
    return {ia, ib, ic, id, -(ia * tx + ib * ty), -(ic * tx + id * ty)};
  }
};

Affine rotation(double theta) {
  return {std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta), 0, 0};
}

// Layout per orientation index: wide (identity), tall (quarter turn), and a
// squashed mirror image; further categories get distinct extra rotations.
Affine orientation_layout(std::size_t k) {
  switch (k) {
    case 0: return {};
    case 1: return rotation(std::numbers::pi / 2);
    case 2: return {-0.75, 0, 0, 1.3, 0, 0};
    default: return rotation(0.65 * static_cast<double>(k));
  }
}

struct Jitter {
  Affine global;
  std::vector<std::pair<double, double>> offsets;
};

Jitter draw_jitter(const PhantomSpec& spec, std::optional<std::uint64_t> seed) {
  Jitter j;
  j.offsets.assign(spec.tissues.size(), {0.0, 0.0});
  if (!seed || spec.jitter == 0.0) return j;
  std::mt19937_64 eng(mix_seed(*seed, 0x6a17));
  auto sym = [&](double amp) { return (2.0 * uniform01(eng) - 1.0) * amp * spec.jitter; };
  const double scale = 1.0 + sym(0.07) - 0.02 * spec.jitter;
  const double theta = sym(0.14);
  Affine g = rotation(theta);
  g.a *= scale;
  g.b *= scale;
  g.c *= scale;
  g.d *= scale;
  g.tx = sym(0.05);
  g.ty = sym(0.05);
  j.global = g;
  for (auto& off : j.offsets) off = {sym(0.04), sym(0.04)};
  return j;
}

bool inside(const Ellipse& e, const Affine& to_canvas, double x, double y) {
  // Map canvas point back into the ellipse's local frame.
  const Affine local = rotation(e.angle_rad).then(Affine{1, 0, 0, 1, e.cx, e.cy}).then(to_canvas);
  const Affine inv = local.inverse();
  const double lx = inv.a * x + inv.b * y + inv.tx;
  const double ly = inv.c * x + inv.d * y + inv.ty;
  return (lx * lx) / (e.rx * e.rx) + (ly * ly) / (e.ry * e.ry) <= 1.0;
}

// Boundary samples must stay on the canvas under every layout, with a margin
// that absorbs the largest seeded jitter.
bool fits_canvas(const Ellipse& e, bool anchored) {
  const double limit = anchored ? 1.0 : 0.88;
  const std::size_t layouts = anchored ? 1 : 4;
  for (std::size_t k = 0; k < layouts; ++k) {
    const Affine to_canvas = anchored ? Affine{} : orientation_layout(k);
    const Affine local = rotation(e.angle_rad).then(Affine{1, 0, 0, 1, e.cx, e.cy}).then(to_canvas);
    for (int i = 0; i < 72; ++i) {
      const double phi = 2.0 * std::numbers::pi * i / 72.0;
      const double lx = e.rx * std::cos(phi);
      const double ly = e.ry * std::sin(phi);
      const double x = local.a * lx + local.b * ly + local.tx;
      const double y = local.c * lx + local.d * ly + local.ty;
      if (std::abs(x) > limit || std::abs(y) > limit) return false;
    }
  }
  return true;
}

double unit_coord(int i, int n) { return 2.0 * (i + 0.5) / n - 1.0; }

}  // namespace

void PhantomSpec::validate() const {
  if (tissues.size() < 2) throw Error(ErrorCode::kConfig, "phantom needs at least two tissues", "tissues");
  if (canvas <= 0) throw Error(ErrorCode::kConfig, "canvas must be positive", "canvas");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::kConfig, "noise_sigma must be >= 0", "noise_sigma");
  if (!(jitter >= 0.0)) throw Error(ErrorCode::kConfig, "jitter must be >= 0", "jitter");
  for (const auto& t : tissues) {
    if (!(t.pd > 0.0 && t.pd <= 1.0))
      throw Error(ErrorCode::kConfig, "tissue " + t.name + ": pd must lie in (0, 1]", "pd");
    if (!(t.t1_ms > 0.0) || !(t.t2_ms > 0.0))
      throw Error(ErrorCode::kConfig, "tissue " + t.name + ": relaxation times must be positive", "t1_ms");
    if (t.shape.empty()) throw Error(ErrorCode::kConfig, "tissue " + t.name + " has no shape", "shape");
    for (const auto& e : t.shape) {
      if (!(e.rx > 0.0 && e.ry > 0.0))
        throw Error(ErrorCode::kConfig, "tissue " + t.name + ": radii must be positive", "shape");
      if (!fits_canvas(e, t.anchored))
        throw Error(ErrorCode::kConfig, "tissue " + t.name + " leaves the canvas", "shape");
    }
  }
}

std::vector<int> phantom_labels(const PhantomSpec& spec, std::size_t orientation_index,
                                std::optional<std::uint64_t> seed) {
  const int n = spec.canvas;
  const Affine layout = orientation_layout(orientation_index);
  const Jitter jit = draw_jitter(spec, seed);
  std::vector<int> labels(static_cast<std::size_t>(n) * n, -1);
  for (std::size_t t = 0; t < spec.tissues.size(); ++t) {
    const Tissue& tissue = spec.tissues[t];
    Affine to_canvas;
    if (!tissue.anchored) {
      Affine offset{1, 0, 0, 1, jit.offsets[t].first, jit.offsets[t].second};
      to_canvas = offset.then(layout).then(jit.global);
    }
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        for (const auto& e : tissue.shape)
          if (inside(e, to_canvas, unit_coord(c, n), unit_coord(r, n))) {
            labels[static_cast<std::size_t>(r) * n + c] = static_cast<int>(t);
            break;
          }
  }
  return labels;
}

Image phantom_signal_image(const PhantomSpec& spec, const ConditionVector& c,
                           std::size_t orientation_index, std::uint64_t seed) {
  std::vector<double> signal(spec.tissues.size());
  for (std::size_t t = 0; t < spec.tissues.size(); ++t) {
    const auto& tissue = spec.tissues[t];
    signal[t] = phantom_signal(tissue.pd, tissue.t1_ms, tissue.t2_ms, c.tr_ms, c.te_ms);
  }
  const auto labels = phantom_labels(spec, orientation_index, seed);
  Image img(spec.canvas, spec.canvas);
  auto px = img.data();
  for (std::size_t i = 0; i < labels.size(); ++i)
    px[i] = labels[i] < 0 ? 0.0f : static_cast<float>(signal[static_cast<std::size_t>(labels[i])]);
  return img;
}

ImageRecord generate_phantom(const PhantomSpec& spec, const ConditionVector& c, std::uint64_t seed,
                             const ConditionSpace& space) {
  spec.validate();
  if (!validate_condition(c, space)) normalize_condition(c, space);  // throws with the field name
  const std::size_t k = *space.orientation_index(c.orientation);

  Image img = phantom_signal_image(spec, c, k, seed);
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 eng(mix_seed(seed, 0x9015e));
    for (auto& v : img.data()) v += static_cast<float>(spec.noise_sigma * standard_normal(eng));
  }

  ImageRecord r;
  char buf[32];
  std::snprintf(buf, sizeof buf, "phantom-%016llx", static_cast<unsigned long long>(seed));
  r.study_id = buf;
  r.series_id = "s0";
  r.slice_index = 0;
  r.slice_count = 1;
  r.pixels = preprocess_image(img, spec.canvas);
  r.tr_ms = c.tr_ms;
  r.te_ms = c.te_ms;
  r.orientation = c.orientation;
  r.field_strength_t = 1.5;
  r.manufacturer = "Siemens";
  r.coil_manufacturer = "Siemens";
  r.fat_saturated = true;
  r.series_description = "PD FS phantom";
  return r;
}

std::vector<ImageRecord> generate_phantom_dataset(const PhantomSpec& spec,
                                                  const ConditionSpace& space, std::size_t count,
                                                  std::uint64_t seed, int slices_per_study) {
  if (slices_per_study <= 0)
    throw Error(ErrorCode::kConfig, "slices_per_study must be positive", "slices_per_study");
  std::mt19937_64 eng(seed);
  std::vector<ImageRecord> out;
  out.reserve(count);
  std::size_t study = 0;
  while (out.size() < count) {
    ConditionVector c;
    c.tr_ms = space.tr_range().min + uniform01(eng) * space.tr_range().span();
    c.te_ms = space.te_range().min + uniform01(eng) * space.te_range().span();
    c.orientation = space.orientations()[uniform_index(eng, space.orientation_count())];
    const auto slices = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(slices_per_study), count - out.size()));
    for (int s = 0; s < slices; ++s) {
      ImageRecord r = generate_phantom(spec, c, mix_seed(seed, study * 1024 + s), space);
      char buf[32];
      std::snprintf(buf, sizeof buf, "phantom-%05zu", study);
      r.study_id = buf;
      r.slice_index = s;
      r.slice_count = slices;
      out.push_back(std::move(r));
    }
    ++study;
  }
  return out;
}

}  // namespace mrsynth
