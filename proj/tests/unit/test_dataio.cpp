#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "mrsynth/dataio.hpp"
#include "mrsynth/error.hpp"
#include "mrsynth/image_io.hpp"
#include "support.hpp"

using namespace mrsynth;
using mrsynth::testkit::TempDir;

namespace {

std::set<std::string> studies_of(const std::vector<ImageRecord>& rs) {
  std::set<std::string> out;
  for (const auto& r : rs) out.insert(r.study_id);
  return out;
}

std::vector<std::string> ids(const std::vector<ImageRecord>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.id());
  return out;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(Manifest, ParsesTheTwentyRowFixture) {
  TempDir dir;
  auto records = parse_manifest(testkit::write_twenty_row_manifest(dir.path()), {.load_pixels = false});
  ASSERT_EQ(records.size(), 20u);
  EXPECT_EQ(records[0].id(), "s1/a/2");
  EXPECT_DOUBLE_EQ(records[12].tr_ms, 1799.9);
  EXPECT_FALSE(records[7].manufacturer.has_value());
  EXPECT_EQ(records[7].coil_manufacturer.value(), "SIEMENS Healthineers");
  EXPECT_FALSE(records[16].fat_saturated);
}

TEST(Manifest, MissingColumnIsNamed) {
  TempDir dir;
  write_text(dir / "m.csv", "study_id,series_id,slice_index,slice_count,pixels_path,tr_ms,te_ms,orientation,"
                            "field_strength_t,series_description\n");
  try {
    parse_manifest(dir / "m.csv", {.load_pixels = false});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
    EXPECT_EQ(e.field(), "fat_saturated");
  }
}

TEST(Manifest, BadCellsNameColumnAndRow) {
  TempDir dir;
  const std::string header =
      "study_id,series_id,slice_index,slice_count,pixels_path,tr_ms,te_ms,orientation,"
      "field_strength_t,fat_saturated,series_description\n";
  write_text(dir / "m.csv", header + "s,a,0,3,p.pfm,abc,30,axial,1.5,true,x\n");
  try {
    parse_manifest(dir / "m.csv", {.load_pixels = false});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParse);
    EXPECT_EQ(e.field(), "tr_ms");
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  write_text(dir / "m.csv", header + "s,a,3,3,p.pfm,3000,30,axial,1.5,true,x\n");
  EXPECT_THROW(parse_manifest(dir / "m.csv", {.load_pixels = false}), Error);
  write_text(dir / "m.csv", header + "s,a,0,3,p.pfm,3000,30,axial,1.5,maybe,x\n");
  EXPECT_THROW(parse_manifest(dir / "m.csv", {.load_pixels = false}), Error);
}

TEST(Manifest, QuotedFieldsAndPixelRoundTrip) {
  TempDir dir;
  ImageRecord r;
  r.study_id = "s,1";
  r.series_id = "a\"b";
  r.slice_index = 1;
  r.slice_count = 3;
  r.pixels = Image(2, 3, std::vector<float>{1, 2, 3, 4, 5, 6});
  r.tr_ms = 2345.678901234;
  r.te_ms = 12.5;
  r.orientation = "axial";
  r.field_strength_t = 1.5;
  r.manufacturer = "Siemens";
  r.fat_saturated = true;
  r.series_description = "PD, FS";
  write_manifest(dir / "out.csv", {r});
  auto back = parse_manifest(dir / "out.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].study_id, r.study_id);
  EXPECT_EQ(back[0].series_id, r.series_id);
  EXPECT_EQ(back[0].series_description, r.series_description);
  EXPECT_EQ(back[0].tr_ms, r.tr_ms);
  EXPECT_EQ(back[0].pixels, r.pixels);
  EXPECT_FALSE(back[0].coil_manufacturer.has_value());
}

TEST(DeduceManufacturer, FillsOnlyWhenMissing) {
  ImageRecord r;
  r.coil_manufacturer = "Siemens";
  EXPECT_EQ(deduce_manufacturer(r).manufacturer.value(), "Siemens");
  r.manufacturer = "GE";
  EXPECT_EQ(deduce_manufacturer(r).manufacturer.value(), "GE");
  EXPECT_FALSE(deduce_manufacturer(ImageRecord{}).manufacturer.has_value());
}

TEST(Filter, MatchesHandEnumerationOfTwentyRows) {
  TempDir dir;
  auto records = parse_manifest(testkit::write_twenty_row_manifest(dir.path()), {.load_pixels = false});
  auto [kept, report] = filter_records(records);
  std::vector<std::string> expected_kept;
  std::map<std::string, std::string> expected_rule;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rule = testkit::twenty_rows()[i].second;
    if (rule.empty())
      expected_kept.push_back(records[i].id());
    else
      expected_rule[records[i].id()] = rule;
  }
  EXPECT_EQ(ids(kept), expected_kept);
  EXPECT_EQ(report.input_count, 20u);
  EXPECT_EQ(report.kept_count, 8u);
  ASSERT_EQ(report.rejected.size(), 12u);
  for (const auto& rej : report.rejected) EXPECT_EQ(rej.rule, expected_rule.at(rej.record_id)) << rej.record_id;
}

TEST(Filter, IsIdempotent) {
  TempDir dir;
  auto records = parse_manifest(testkit::write_twenty_row_manifest(dir.path()), {.load_pixels = false});
  auto once = filter_records(records).first;
  auto twice = filter_records(once).first;
  EXPECT_EQ(ids(once), ids(twice));
}

TEST(Filter, CentralSlicesOfTenSliceVolume) {
  std::vector<ImageRecord> volume;
  for (int i = 0; i < 10; ++i) {
    ImageRecord r;
    r.study_id = "s";
    r.series_id = "a";
    r.slice_index = i;
    r.slice_count = 10;
    r.tr_ms = 3000;
    r.te_ms = 30;
    r.field_strength_t = 1.5;
    r.manufacturer = "Siemens";
    r.fat_saturated = true;
    volume.push_back(r);
  }
  std::vector<int> kept;
  for (const auto& r : filter_records(volume).first) kept.push_back(r.slice_index);
  EXPECT_EQ(kept, (std::vector<int>{2, 3, 4, 5, 6, 7}));
  EXPECT_EQ(central_slice_start(10, 6), 2);
  EXPECT_EQ(central_slice_start(11, 6), 2);
  EXPECT_EQ(central_slice_start(6, 6), 0);
  EXPECT_EQ(central_slice_start(1, 6), -3);
}

TEST(Split, FourStudiesOfTen) {
  auto records = testkit::grouped_records(4, 10);
  auto split = split_by_study(records, 10, 10, 42);
  EXPECT_EQ(split.train.size(), 20u);
  EXPECT_EQ(split.val.size(), 10u);
  EXPECT_EQ(split.test.size(), 10u);
  EXPECT_EQ(studies_of(split.train).size(), 2u);
}

TEST(Split, PartitionsByStudyForManySeeds) {
  auto records = testkit::grouped_records(9, 1);
  auto more = testkit::grouped_records(3, 7);
  for (auto& r : more) r.study_id += "-big";
  records.insert(records.end(), more.begin(), more.end());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto split = split_by_study(records, 5, 5, seed);
    EXPECT_GE(split.val.size(), 5u);
    EXPECT_GE(split.test.size(), 5u);
    EXPECT_EQ(split.train.size() + split.val.size() + split.test.size(), records.size());
    auto tr = studies_of(split.train), va = studies_of(split.val), te = studies_of(split.test);
    for (const auto& s : va) EXPECT_FALSE(tr.contains(s) || te.contains(s));
    for (const auto& s : te) EXPECT_FALSE(tr.contains(s));
  }
}

TEST(Split, SameSeedSameSplit) {
  auto records = testkit::grouped_records(12, 3);
  auto a = split_by_study(records, 6, 6, 9);
  auto b = split_by_study(records, 6, 6, 9);
  EXPECT_EQ(ids(a.train), ids(b.train));
  EXPECT_EQ(ids(a.val), ids(b.val));
  EXPECT_EQ(ids(a.test), ids(b.test));
}

TEST(Split, UnreachableQuotaIsInsufficientData) {
  auto records = testkit::grouped_records(2, 10);
  try {
    split_by_study(records, 10, 11, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(Preprocess, AlreadyTargetSized) {
  Image img(2, 2, std::vector<float>{0, 100, 50, 25});
  auto out = preprocess_image(img, 2);
  EXPECT_EQ(out, Image(2, 2, std::vector<float>{-1, 1, 0, -0.5f}));
}

TEST(Preprocess, OutputStaysWithinUnitBand) {
  std::mt19937 eng(5);
  std::uniform_real_distribution<float> u(0, 4000);
  for (int trial = 0; trial < 20; ++trial) {
    Image img(37, 23);
    for (auto& v : img.data()) v = u(eng);
    auto out = preprocess_image(img, 16);
    EXPECT_GE(out.min(), -1 - 1e-6);
    EXPECT_LE(out.max(), 1 + 1e-6);
  }
  try {
    preprocess_image(Image(4, 4, 3.0f), 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateInput);
  }
}

TEST(Dataset, WriteReadRoundTrip) {
  TempDir dir;
  auto records = testkit::grouped_records(3, 2);
  for (auto& r : records) {
    r.pixels = Image(4, 4, static_cast<float>(r.slice_index));
    r.orientation = "axial";
    r.tr_ms = 2000;
    r.te_ms = 20;
  }
  DatasetSplit split{{records[0], records[1]}, {records[2], records[3]}, {records[4], records[5]}};
  write_dataset(dir / "ds", split);
  auto back = read_dataset(dir / "ds");
  EXPECT_EQ(ids(back.train), ids(split.train));
  EXPECT_EQ(ids(back.test), ids(split.test));
  EXPECT_EQ(back.val[1].pixels, split.val[1].pixels);
}
