#include "mrsynth/turing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "mrsynth/error.hpp"
#include "mrsynth/rng.hpp"

namespace mrsynth {

const char* to_string(TuringLabel label) { return label == TuringLabel::kReal ? "real" : "synthetic"; }

TuringLabel turing_label_from_string(const std::string& s) {
  if (s == "real" || s == "R") return TuringLabel::kReal;
  if (s == "synthetic" || s == "S") return TuringLabel::kSynthetic;
  throw Error(ErrorCode::kSchema, "label must be 'real' or 'synthetic', got '" + s + "'", "labels");
}

std::size_t TuringSession::item_count() const {
  std::size_t n = 0;
  for (const auto& g : grids) n += g.items.size();
  return n;
}

bool TuringSession::has_reader(const std::string& reader) const {
  return std::find(readers.begin(), readers.end(), reader) != readers.end();
}

void TuringSession::register_reader(const std::string& reader) {
  if (reader.empty()) throw Error(ErrorCode::kSchema, "reader id must not be empty", "reader");
  if (!has_reader(reader)) readers.push_back(reader);
}

bool TuringSession::complete_for(const std::string& reader) const {
  auto it = labels.find(reader);
  if (it == labels.end()) return grids.empty();
  for (std::size_t g = 0; g < grids.size(); ++g)
    if (!it->second.count(g)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json labels_json(const std::vector<TuringLabel>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (auto l : v) out.push_back(to_string(l));
  return out;
}

std::vector<TuringLabel> labels_from_json(const nlohmann::json& j) {
  std::vector<TuringLabel> out;
  for (const auto& v : j) out.push_back(turing_label_from_string(v.get<std::string>()));
  return out;
}

}  // namespace

void to_json(nlohmann::json& j, const TuringSession& s) {
  nlohmann::json grids = nlohmann::json::array();
  for (const auto& g : s.grids) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& it : g.items) {
      nlohmann::json item = {{"ref", it.ref}, {"truth", to_string(it.truth)}};
      if (it.condition) item["condition"] = *it.condition;
      items.push_back(item);
    }
    grids.push_back({{"items", items}});
  }
  nlohmann::json labels = nlohmann::json::object();
  for (const auto& [reader, per_grid] : s.labels) {
    nlohmann::json entry = nlohmann::json::object();
    for (const auto& [g, l] : per_grid) entry[std::to_string(g)] = labels_json(l);
    labels[reader] = entry;
  }
  j = {{"format", "mrsynth-turing-session"},
       {"version", 1},
       {"id", s.id},
       {"seed", s.seed},
       {"grid_size", s.grid_size},
       {"grids", grids},
       {"readers", s.readers},
       {"labels", labels},
       {"warnings", s.warnings}};
}

void from_json(const nlohmann::json& j, TuringSession& s) {
  try {
    if (j.at("version").get<int>() != 1) throw Error(ErrorCode::kVersion, "unsupported Turing session version", "version");
    s = TuringSession{};
    s.id = j.at("id").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.grid_size = j.at("grid_size").get<std::size_t>();
    for (const auto& g : j.at("grids")) {
      TuringGrid grid;
      for (const auto& it : g.at("items")) {
        TuringItem item;
        item.ref = it.at("ref").get<std::string>();
        item.truth = turing_label_from_string(it.at("truth").get<std::string>());
        if (it.contains("condition")) item.condition = it.at("condition").get<ConditionVector>();
        grid.items.push_back(std::move(item));
      }
      s.grids.push_back(std::move(grid));
    }
    s.readers = j.at("readers").get<std::vector<std::string>>();
    for (const auto& [reader, per_grid] : j.at("labels").items())
      for (const auto& [g, l] : per_grid.items()) s.labels[reader][std::stoul(g)] = labels_from_json(l);
    if (j.contains("warnings")) s.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("malformed Turing session: ") + e.what());
  }
}

void save_session(const std::filesystem::path& path, const TuringSession& s) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << nlohmann::json(s).dump(2) << '\n';
}

TuringSession load_session(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in).get<TuringSession>();
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

TuringSession build_turing_session(const std::vector<TuringPoolItem>& real_pool,
                                   const std::vector<TuringPoolItem>& synth_pool, std::size_t n_per_class,
                                   std::uint64_t seed, std::size_t grid_size) {
  if (grid_size == 0 || grid_size % 2 != 0)
    throw Error(ErrorCode::kConfig, "grid size must be even and positive", "grid_size");
  if (real_pool.size() < n_per_class || synth_pool.size() < n_per_class)
    throw Error(ErrorCode::kInsufficientData, "pools hold fewer than " + std::to_string(n_per_class) + " items",
                "n_per_class");
  TuringSession s;
  s.seed = seed;
  s.grid_size = grid_size;
  const auto half = grid_size / 2;
  const auto usable = n_per_class - n_per_class % half;
  if (usable != n_per_class) {
    std::ostringstream msg;
    msg << "n_per_class " << n_per_class << " is not a multiple of " << half << "; using " << usable;
    s.warnings.push_back(msg.str());
  }
  if (usable == 0) throw Error(ErrorCode::kInsufficientData, "not enough items for a single grid", "n_per_class");

  std::mt19937_64 eng(mix_seed(seed, 0x7e57));
  std::vector<std::size_t> pairs(std::min(real_pool.size(), synth_pool.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] = i;
  portable_shuffle(pairs, eng);
  pairs.resize(usable);
  for (auto i : pairs) {
    const auto& r = real_pool[i].condition;
    const auto& f = synth_pool[i].condition;
    if (r && f && !(*r == *f))
      throw Error(ErrorCode::kSchema, "synthetic item " + synth_pool[i].ref + " does not match the condition of " +
                                          real_pool[i].ref, "condition");
  }
  // Separate shuffles so paired items do not land in the same grid.
  auto real_order = pairs;
  auto synth_order = pairs;
  portable_shuffle(real_order, eng);
  portable_shuffle(synth_order, eng);
  for (std::size_t g = 0; g < usable / half; ++g) {
    TuringGrid grid;
    for (std::size_t k = 0; k < half; ++k) {
      const auto& r = real_pool[real_order[g * half + k]];
      const auto& f = synth_pool[synth_order[g * half + k]];
      grid.items.push_back({r.ref, TuringLabel::kReal, r.condition});
      grid.items.push_back({f.ref, TuringLabel::kSynthetic, f.condition});
    }
    portable_shuffle(grid.items, eng);
    s.grids.push_back(std::move(grid));
  }
  std::ostringstream id;
  id << "turing-" << std::hex << mix_seed(seed, usable);
  s.id = id.str();
  return s;
}

SubmitOutcome submit_grid_labels(TuringSession& session, const std::string& reader, std::size_t grid_index,
                                 const std::vector<TuringLabel>& labels) {
  if (!session.has_reader(reader)) throw Error(ErrorCode::kNotFound, "unknown reader " + reader, "reader");
  if (grid_index >= session.grids.size())
    throw Error(ErrorCode::kNotFound, "grid " + std::to_string(grid_index) + " does not exist", "grid");
  const auto& grid = session.grids[grid_index];
  if (labels.size() != grid.items.size())
    return {false, "expected " + std::to_string(grid.items.size()) + " labels, got " + std::to_string(labels.size())};
  const auto real = std::count(labels.begin(), labels.end(), TuringLabel::kReal);
  const auto want = static_cast<std::ptrdiff_t>(grid.items.size() / 2);
  if (real != want)
    return {false, "labels must mark exactly " + std::to_string(want) + " real and " + std::to_string(want) +
                       " synthetic images, got " + std::to_string(real) + " real"};
  session.labels[reader][grid_index] = labels;
  return {true, {}};
}

// ---------------------------------------------------------------------------

std::int64_t ConfusionMatrix::total() const {
  return pred_real_true_real + pred_real_true_synth + pred_synth_true_real + pred_synth_true_synth;
}

double ConfusionMatrix::accuracy() const {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(pred_real_true_real + pred_synth_true_synth) / static_cast<double>(n);
}

void ConfusionMatrix::add(TuringLabel predicted, TuringLabel truth) {
  if (predicted == TuringLabel::kReal)
    ++(truth == TuringLabel::kReal ? pred_real_true_real : pred_real_true_synth);
  else
    ++(truth == TuringLabel::kReal ? pred_synth_true_real : pred_synth_true_synth);
}

void to_json(nlohmann::json& j, const ConfusionMatrix& m) {
  j = {{"pred_real_true_real", m.pred_real_true_real},
       {"pred_real_true_synthetic", m.pred_real_true_synth},
       {"pred_synthetic_true_real", m.pred_synth_true_real},
       {"pred_synthetic_true_synthetic", m.pred_synth_true_synth}};
}

void to_json(nlohmann::json& j, const TuringReport& r) {
  nlohmann::json readers = nlohmann::json::array();
  for (const auto& rr : r.readers)
    readers.push_back({{"reader", rr.reader},
                       {"confusion", rr.confusion},
                       {"accuracy", rr.accuracy},
                       {"accuracy_rounded", rr.accuracy_rounded}});
  nlohmann::json agreements = nlohmann::json::array();
  for (const auto& a : r.agreements)
    agreements.push_back({{"reader_a", a.reader_a},
                          {"reader_b", a.reader_b},
                          {"agreement", a.agreement},
                          {"agreed", a.agreed},
                          {"kappa", a.kappa}});
  j = {{"readers", readers},
       {"mean_error", r.mean_error},
       {"mean_error_rounded", r.mean_error_rounded},
       {"inter_reader_agreement", agreements}};
}

namespace {

void require_complete(const TuringSession& s, const std::string& reader) {
  if (!s.has_reader(reader)) throw Error(ErrorCode::kNotFound, "unknown reader " + reader, "reader");
  if (!s.complete_for(reader)) throw Error(ErrorCode::kIncomplete, "reader " + reader + " has unlabeled grids", "reader");
}

}  // namespace

AgreementReport reader_agreement(const TuringSession& s, const std::string& a, const std::string& b) {
  require_complete(s, a);
  require_complete(s, b);
  AgreementReport out{a, b, {}, 0, 0.0};
  std::int64_t n = 0, a_real = 0, b_real = 0;
  const auto& la = s.labels.at(a);
  const auto& lb = s.labels.at(b);
  for (std::size_t g = 0; g < s.grids.size(); ++g)
    for (std::size_t i = 0; i < s.grids[g].items.size(); ++i) {
      const auto pa = la.at(g)[i];
      const auto pb = lb.at(g)[i];
      ++n;
      a_real += pa == TuringLabel::kReal;
      b_real += pb == TuringLabel::kReal;
      if (pa == pb) {
        out.agreement.add(pa, s.grids[g].items[i].truth);
        ++out.agreed;
      }
    }
  if (n > 0) {
    const double po = static_cast<double>(out.agreed) / static_cast<double>(n);
    const double ra = static_cast<double>(a_real) / static_cast<double>(n);
    const double rb = static_cast<double>(b_real) / static_cast<double>(n);
    const double pe = ra * rb + (1 - ra) * (1 - rb);
    out.kappa = pe < 1.0 ? (po - pe) / (1.0 - pe) : 1.0;
  }
  return out;
}

TuringReport turing_analytics(const TuringSession& s, const std::vector<std::string>& requested) {
  const auto& readers = requested.empty() ? s.readers : requested;
  if (readers.empty()) throw Error(ErrorCode::kIncomplete, "session has no readers", "reader");
  TuringReport out;
  double sum = 0.0, sum_rounded = 0.0;
  for (const auto& reader : readers) {
    require_complete(s, reader);
    ReaderReport rr;
    rr.reader = reader;
    const auto& per_grid = s.labels.at(reader);
    for (std::size_t g = 0; g < s.grids.size(); ++g)
      for (std::size_t i = 0; i < s.grids[g].items.size(); ++i) rr.confusion.add(per_grid.at(g)[i], s.grids[g].items[i].truth);
    rr.accuracy = rr.confusion.accuracy();
    rr.accuracy_rounded = std::round(rr.accuracy * 100.0) / 100.0;
    sum += rr.accuracy;
    sum_rounded += rr.accuracy_rounded;
    out.readers.push_back(rr);
  }
  const auto k = static_cast<double>(readers.size());
  out.mean_error = 1.0 - sum / k;
  out.mean_error_rounded = 1.0 - sum_rounded / k;
  for (std::size_t i = 0; i < readers.size(); ++i)
    for (std::size_t j = i + 1; j < readers.size(); ++j) out.agreements.push_back(reader_agreement(s, readers[i], readers[j]));
  return out;
}

}  // namespace mrsynth
