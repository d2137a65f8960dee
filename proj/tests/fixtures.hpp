#pragma once

#include <algorithm>
#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrsynth/dataio.hpp"
#include "mrsynth/turing.hpp"

namespace mrsynth::testkit {

// Twenty hand-enumerated header rows. The second member of each entry is the
// first rule the row fails, worked out by hand ("" = kept).
inline const std::vector<std::pair<std::string, std::string>>& twenty_rows() {
  static const std::vector<std::pair<std::string, std::string>> rows = {
      {"s1,a,2,10,p.pfm,3000,30,coronal,1.5,true,PD FS,Siemens,", ""},
      {"s1,a,7,10,p.pfm,3000,30,coronal,1.5,true,PD FS,Siemens,", ""},
      {"s1,a,8,10,p.pfm,3000,30,coronal,1.5,true,PD FS,Siemens,", "central_slice"},
      {"s1,a,1,10,p.pfm,3000,30,coronal,1.5,true,PD FS,Siemens,", "central_slice"},
      {"s2,b,0,6,p.pfm,3000,30,sagittal,3.0,true,PD FS,Siemens,", "field_strength"},
      {"s2,b,1,6,p.pfm,3000,30,sagittal,1.54,true,PD FS,Siemens,", ""},
      {"s2,b,2,6,p.pfm,3000,30,sagittal,1.56,true,PD FS,Siemens,", "field_strength"},
      {"s3,c,3,6,p.pfm,3000,30,axial,1.5,true,T2 FS,,SIEMENS Healthineers", ""},
      {"s3,c,4,6,p.pfm,3000,30,axial,1.5,true,T2 FS,GE,Siemens", "manufacturer"},
      {"s3,c,5,6,p.pfm,3000,30,axial,1.5,true,T2 FS,,", "manufacturer"},
      {"s4,d,0,1,p.pfm,1800,30,coronal,1.5,true,PD FS,Siemens,", ""},
      {"s4,d,2,6,p.pfm,5000,30,coronal,1.5,true,PD FS,Siemens,", ""},
      {"s4,d,3,6,p.pfm,1799.9,30,coronal,1.5,true,PD FS,Siemens,", "tr_range"},
      {"s4,d,4,6,p.pfm,5200,30,coronal,1.5,true,PD FS,Siemens,", "tr_range"},
      {"s5,e,2,6,p.pfm,3000,50,sagittal,1.5,true,PD FS,Siemens,", ""},
      {"s5,e,3,6,p.pfm,3000,50.1,sagittal,1.5,true,PD FS,Siemens,", "te_max"},
      {"s5,e,4,6,p.pfm,3000,30,sagittal,1.5,false,PD,Siemens,", "fat_saturation"},
      {"s5,e,5,6,p.pfm,3000,30,sagittal,3.0,false,PD,Siemens,", "field_strength"},
      {"s6,f,6,7,p.pfm,3000,30,axial,1.5,true,PD FS,Siemens,", "central_slice"},
      {"s6,f,0,7,p.pfm,3000,30,axial,1.5,true,PD FS,Siemens,", ""},
  };
  return rows;
}

inline std::filesystem::path write_twenty_row_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.csv";
  std::ofstream out(path);
  out << "study_id,series_id,slice_index,slice_count,pixels_path,tr_ms,te_ms,orientation,"
         "field_strength_t,fat_saturated,series_description,manufacturer,coil_manufacturer\n";
  for (const auto& [row, _] : twenty_rows()) out << row << '\n';
  return path;
}

// `studies` studies of `per_study` slices each.
inline std::vector<ImageRecord> grouped_records(int studies, int per_study) {
  std::vector<ImageRecord> out;
  for (int s = 0; s < studies; ++s)
    for (int i = 0; i < per_study; ++i) {
      ImageRecord r;
      r.study_id = "study" + std::to_string(s);
      r.series_id = "x";
      r.slice_index = i;
      r.slice_count = per_study;
      out.push_back(r);
    }
  return out;
}

// Reference reader study, per true class: how many items got each
// (reader 1, reader 2) prediction pair. Derived from the confusion matrices
// (reader 1: 53/22/22/53, reader 2: 36/39/39/36) and the co-prediction counts
// (29 / 10 / 15 / 24).
struct PredictionPair {
  TuringLabel first;
  TuringLabel second;
};

inline std::vector<PredictionPair> reference_pairs(TuringLabel truth) {
  using enum TuringLabel;
  // counts of (R,R), (R,S), (S,R), (S,S)
  const std::array<int, 4> counts = truth == kReal ? std::array<int, 4>{29, 53 - 29, 36 - 29, 15}
                                                   : std::array<int, 4>{10, 22 - 10, 39 - 10, 24};
  const PredictionPair kinds[4] = {{kReal, kReal}, {kReal, kSynthetic}, {kSynthetic, kReal}, {kSynthetic, kSynthetic}};
  std::vector<PredictionPair> out;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < counts[k]; ++i) out.push_back(kinds[k]);
  return out;
}

// A 25-grid session of 75 real and 75 synthetic items labelled by readers
// "e1" and "e2" so that both readers mark 3 real + 3 synthetic in every grid
// and the totals reproduce the reference study. The grouping is found by a local search that
// accepts sideways moves.
inline TuringSession reference_session(std::uint64_t seed = 2019) {
  std::vector<TuringPoolItem> real, synth;
  for (int i = 0; i < 75; ++i) {
    real.push_back({"real-" + std::to_string(i), std::nullopt});
    synth.push_back({"synth-" + std::to_string(i), std::nullopt});
  }
  TuringSession s = build_turing_session(real, synth, 75, seed);
  s.register_reader("e1");
  s.register_reader("e2");

  const std::size_t grids = s.grids.size();
  std::mt19937_64 eng(seed);
  std::array<std::vector<PredictionPair>, 2> pool = {reference_pairs(TuringLabel::kReal),
                                                     reference_pairs(TuringLabel::kSynthetic)};
  for (auto& p : pool) std::shuffle(p.begin(), p.end(), eng);
  // pool[c][3 * g + k] is the k-th class-c item of grid g
  auto reals_in = [&](std::size_t g, int reader) {
    int n = 0;
    for (int c = 0; c < 2; ++c)
      for (int k = 0; k < 3; ++k) {
        const auto& p = pool[c][3 * g + k];
        n += (reader == 0 ? p.first : p.second) == TuringLabel::kReal;
      }
    return n;
  };
  auto cost = [&](std::size_t g) { return std::abs(reals_in(g, 0) - 3) + std::abs(reals_in(g, 1) - 3); };
  int total = 0;
  for (std::size_t g = 0; g < grids; ++g) total += cost(g);
  std::uniform_int_distribution<std::size_t> pick(0, 3 * grids - 1);
  for (long iter = 0; total > 0; ++iter) {
    if (iter > 10'000'000) throw std::runtime_error("reference_session: no balanced grouping found");
    const int c = static_cast<int>(eng() % 2);
    const std::size_t a = pick(eng), b = pick(eng);
    const std::size_t ga = a / 3, gb = b / 3;
    if (ga == gb) continue;
    const int before = cost(ga) + cost(gb);
    std::swap(pool[c][a], pool[c][b]);
    const int delta = cost(ga) + cost(gb) - before;
    if (delta > 0) {
      std::swap(pool[c][a], pool[c][b]);
    } else {
      total += delta;
    }
  }

  for (std::size_t g = 0; g < grids; ++g) {
    std::vector<TuringLabel> l1, l2;
    std::array<int, 2> next = {0, 0};
    for (const auto& item : s.grids[g].items) {
      const int c = item.truth == TuringLabel::kReal ? 0 : 1;
      const auto& p = pool[c][3 * g + next[c]++];
      l1.push_back(p.first);
      l2.push_back(p.second);
    }
    submit_grid_labels(s, "e1", g, l1);
    submit_grid_labels(s, "e2", g, l2);
  }
  return s;
}

}  // namespace mrsynth::testkit
