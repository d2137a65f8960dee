#include "mrsynth/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "mrsynth/error.hpp"
#include "mrsynth/image_io.hpp"
#include "mrsynth/rng.hpp"

namespace fs = std::filesystem;

namespace mrsynth {

std::string ImageRecord::id() const {
  return study_id + "/" + series_id + "/" + std::to_string(slice_index);
}

namespace {

const std::vector<std::string> kRequiredColumns = {
    "study_id",   "series_id", "slice_index",      "slice_count",   "pixels_path",       "tr_ms",
    "te_ms",      "orientation", "field_strength_t", "fat_saturated", "series_description"};

// RFC 4180 style: commas separate, double quotes wrap fields, "" escapes a quote.
std::optional<std::vector<std::string>> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  if (quoted) return std::nullopt;
  cells.push_back(std::move(cell));
  return cells;
}

std::string csv_escape(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char ch : v) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

struct RowReader {
  const std::map<std::string, std::size_t>& columns;
  const std::vector<std::string>& cells;
  std::size_t row;

  std::string location() const { return "row " + std::to_string(row); }

  std::string required(const std::string& name) const {
    auto v = trim(cells[columns.at(name)]);
    if (v.empty()) throw Error(ErrorCode::kSchema, location() + ": missing value for " + name, name);
    return v;
  }

  std::optional<std::string> optional(const std::string& name) const {
    auto it = columns.find(name);
    if (it == columns.end()) return std::nullopt;
    auto v = trim(cells[it->second]);
    if (v.empty()) return std::nullopt;
    return v;
  }

  double number(const std::string& name) const {
    const auto text = required(name);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw Error(ErrorCode::kParse, location() + ": '" + text + "' is not a number", name);
    return value;
  }

  int integer(const std::string& name) const {
    const auto text = required(name);
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
      throw Error(ErrorCode::kParse, location() + ": '" + text + "' is not an integer", name);
    return value;
  }

  bool boolean(const std::string& name) const {
    const auto text = lower(required(name));
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw Error(ErrorCode::kParse, location() + ": '" + text + "' is not a boolean", name);
  }
};

Image load_pixels(const fs::path& path) {
  const auto ext = lower(path.extension().string());
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".png") return decode_png_gray16(read_bytes(path));
  throw Error(ErrorCode::kParse, "unsupported pixel format: " + path.string(), "pixels_path");
}

std::string file_stem_for(const ImageRecord& r) {
  std::string id = r.id();
  for (char& ch : id)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
  return id;
}

}  // namespace

std::vector<ImageRecord> parse_manifest(const fs::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open manifest " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kSchema, "manifest has no header row");
  auto header = split_csv_line(line);
  if (!header) throw Error(ErrorCode::kParse, "row 1: unterminated quote");
  std::map<std::string, std::size_t> columns;
  for (std::size_t i = 0; i < header->size(); ++i) columns[trim((*header)[i])] = i;
  for (const auto& name : kRequiredColumns)
    if (!columns.contains(name))
      throw Error(ErrorCode::kSchema, "manifest lacks required column " + name, name);

  const fs::path base = path.parent_path();
  std::vector<ImageRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (!cells) throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ": unterminated quote");
    if (cells->size() != header->size())
      throw Error(ErrorCode::kParse, "row " + std::to_string(row) + ": expected " +
                                         std::to_string(header->size()) + " cells, got " +
                                         std::to_string(cells->size()));
    RowReader rr{columns, *cells, row};
    ImageRecord r;
    r.study_id = rr.required("study_id");
    r.series_id = rr.required("series_id");
    r.slice_index = rr.integer("slice_index");
    r.slice_count = rr.integer("slice_count");
    r.pixels_path = rr.required("pixels_path");
    r.tr_ms = rr.number("tr_ms");
    r.te_ms = rr.number("te_ms");
    r.orientation = rr.required("orientation");
    r.field_strength_t = rr.number("field_strength_t");
    r.fat_saturated = rr.boolean("fat_saturated");
    r.series_description = trim((*cells)[columns.at("series_description")]);
    r.manufacturer = rr.optional("manufacturer");
    r.coil_manufacturer = rr.optional("coil_manufacturer");
    if (r.slice_index < 0 || r.slice_count <= 0 || r.slice_index >= r.slice_count)
      throw Error(ErrorCode::kParse,
                  rr.location() + ": slice_index must lie in [0, slice_count)", "slice_index");
    if (options.load_pixels) {
      r.pixels = load_pixels(base / r.pixels_path);
      if (r.pixels.empty())
        throw Error(ErrorCode::kParse, rr.location() + ": empty pixel array", "pixels_path");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(const fs::path& path, const std::vector<ImageRecord>& records,
                    const std::string& pixel_dir, bool write_pixels) {
  const fs::path base = path.parent_path();
  if (write_pixels) fs::create_directories(base / pixel_dir);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write manifest " + path.string());
  for (const auto& name : kRequiredColumns) out << name << ',';
  out << "manufacturer,coil_manufacturer\n";
  for (const auto& r : records) {
    std::string pixels_path = r.pixels_path;
    if (write_pixels) {
      pixels_path = (fs::path(pixel_dir) / (file_stem_for(r) + ".pfm")).generic_string();
      write_pfm(base / pixels_path, r.pixels);
    }
    std::ostringstream row;
    row.precision(17);
    row << csv_escape(r.study_id) << ',' << csv_escape(r.series_id) << ',' << r.slice_index << ','
        << r.slice_count << ',' << csv_escape(pixels_path) << ',' << r.tr_ms << ',' << r.te_ms
        << ',' << csv_escape(r.orientation) << ',' << r.field_strength_t << ','
        << (r.fat_saturated ? "true" : "false") << ',' << csv_escape(r.series_description) << ','
        << csv_escape(r.manufacturer.value_or("")) << ','
        << csv_escape(r.coil_manufacturer.value_or("")) << '\n';
    out << row.str();
  }
}

ImageRecord deduce_manufacturer(ImageRecord r) {
  if (!r.manufacturer && r.coil_manufacturer) r.manufacturer = r.coil_manufacturer;
  return r;
}

int central_slice_start(int slice_count, int n) {
  const int diff = slice_count - n;
  // floor division, also for volumes thinner than n
  return diff >= 0 ? diff / 2 : -((-diff + 1) / 2);
}

std::pair<std::vector<ImageRecord>, FilterReport> filter_records(std::vector<ImageRecord> records,
                                                                 const FilterConfig& rules) {
  FilterReport report;
  report.input_count = records.size();
  std::vector<ImageRecord> kept;
  const std::string vendor = lower(rules.vendor);

  for (auto& raw : records) {
    ImageRecord r = deduce_manufacturer(std::move(raw));
    const char* failed = nullptr;
    const int start = central_slice_start(r.slice_count, rules.central_slices);
    if (std::abs(r.field_strength_t - rules.field_strength_t) > rules.field_tolerance_t + 1e-12) {
      failed = "field_strength";
    } else if (!r.manufacturer || lower(*r.manufacturer).find(vendor) == std::string::npos) {
      failed = "manufacturer";
    } else if (!rules.tr_ms.contains(r.tr_ms)) {
      failed = "tr_range";
    } else if (!(r.te_ms <= rules.te_max_ms)) {
      failed = "te_max";
    } else if (rules.require_fat_saturation && !r.fat_saturated) {
      failed = "fat_saturation";
    } else if (r.slice_index < start || r.slice_index > start + rules.central_slices - 1) {
      failed = "central_slice";
    }
    if (failed) {
      report.rejected.push_back({r.id(), failed});
    } else {
      kept.push_back(std::move(r));
    }
  }
  report.kept_count = kept.size();
  return {std::move(kept), std::move(report)};
}

DatasetSplit split_by_study(const std::vector<ImageRecord>& records, std::size_t val_size,
                            std::size_t test_size, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_study;
  for (std::size_t i = 0; i < records.size(); ++i) by_study[records[i].study_id].push_back(i);

  std::vector<std::string> studies;
  studies.reserve(by_study.size());
  for (const auto& [id, _] : by_study) studies.push_back(id);
  std::mt19937_64 eng(seed);
  portable_shuffle(studies, eng);

  DatasetSplit split;
  for (const auto& study : studies) {
    std::vector<ImageRecord>* target = &split.train;
    if (split.val.size() < val_size) {
      target = &split.val;
    } else if (split.test.size() < test_size) {
      target = &split.test;
    }
    for (std::size_t i : by_study[study]) target->push_back(records[i]);
  }
  if (split.val.size() < val_size || split.test.size() < test_size)
    throw Error(ErrorCode::kInsufficientData,
                "not enough studies to fill validation/test quotas (" +
                    std::to_string(split.val.size()) + "/" + std::to_string(val_size) + ", " +
                    std::to_string(split.test.size()) + "/" + std::to_string(test_size) + ")");
  return split;
}

Image preprocess_image(const Image& pixels, int side) {
  if (side <= 0) throw Error(ErrorCode::kConfig, "target side must be positive", "side");
  return resize_bilinear(normalize_symmetric(pixels), side, side);
}

void write_dataset(const fs::path& dir, const DatasetSplit& split) {
  fs::create_directories(dir);
  write_manifest(dir / "train.csv", split.train);
  write_manifest(dir / "val.csv", split.val);
  write_manifest(dir / "test.csv", split.test);
}

DatasetSplit read_dataset(const fs::path& dir) {
  DatasetSplit split;
  split.train = parse_manifest(dir / "train.csv");
  if (fs::exists(dir / "val.csv")) split.val = parse_manifest(dir / "val.csv");
  if (fs::exists(dir / "test.csv")) split.test = parse_manifest(dir / "test.csv");
  return split;
}

}  // namespace mrsynth
