#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "emopipe/data.hpp"
#include "emopipe/error.hpp"
#include "test_util.hpp"

using namespace emopipe;
using namespace emopipe::data;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::IoError;
}

std::string landmark_header() {
  std::string h = "image_id,label";
  for (int i = 0; i < 68; ++i) h += ",x" + std::to_string(i) + ",y" + std::to_string(i);
  return h + "\n";
}

std::string landmark_line(const std::string& id, const std::string& label, double base) {
  std::string line = id + "," + label;
  for (int i = 0; i < 68; ++i) line += "," + std::to_string(base + i) + "," + std::to_string(base + 2 * i);
  return line + "\n";
}

}  // namespace

TEST(Labels, Canonicalization) {
  EXPECT_EQ(canonical_label("Happiness"), "happiness");
  EXPECT_EQ(canonical_label("  NEUTRAL "), "neutral");
  EXPECT_EQ(canonical_label("ANGER"), "anger");
  EXPECT_EQ(kind_of([] { canonical_label("joy"); }), ErrorKind::ParseError);
}

TEST(Csv, LandmarkRowsParse) {
  std::istringstream in(landmark_header() + landmark_line("a.jpg", "happiness", 10) +
                        landmark_line("b.jpg", "NEUTRAL", 20));
  const auto rows = parse_landmark_csv(in);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].image_id, "a.jpg");
  EXPECT_EQ(rows[1].label, "NEUTRAL");
  EXPECT_EQ(rows[1].landmarks.points[3], (Point{23, 26}));
}

TEST(Csv, BadRowsRejected) {
  std::istringstream short_row(landmark_header() + "a.jpg,happiness,1,2\n");
  EXPECT_EQ(kind_of([&] { parse_landmark_csv(short_row); }), ErrorKind::ParseError);
  std::string bad = landmark_line("a.jpg", "happiness", 1);
  bad.replace(bad.find(",1.0"), 4, ",abc");
  std::istringstream bad_number(landmark_header() + bad);
  EXPECT_EQ(kind_of([&] { parse_landmark_csv(bad_number); }), ErrorKind::ParseError);
  std::istringstream empty("");
  EXPECT_EQ(kind_of([&] { parse_legend_csv(empty); }), ErrorKind::ParseError);
}

TEST(Csv, WriteThenReadRoundTrip) {
  const auto ds = synth_generate(5, 3, 2.0);
  std::stringstream lm, lg;
  write_landmark_csv(lm, ds);
  write_legend_csv(lg, ds);
  const auto loaded = load_legend(parse_legend_csv(lg), parse_landmark_csv(lm), {});
  ASSERT_EQ(loaded.dataset.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(loaded.dataset.records[i].image_id, ds.records[i].image_id);
    EXPECT_EQ(loaded.dataset.records[i].label, ds.records[i].label);
    EXPECT_EQ(loaded.dataset.records[i].landmarks, ds.records[i].landmarks);
  }
}

TEST(LoadLegend, FiveRowFixture) {
  std::istringstream legend(
      "user.id,image,emotion\n"
      "jhamski,j1.jpg,happiness\n"
      "alice,a1.jpg,ANGER\n"
      "bob,b1.jpg,neutral\n"
      "carol,c1.jpg,happiness\n"
      "dave,d1.jpg,neutral\n");
  std::istringstream landmarks(landmark_header() + landmark_line("j1.jpg", "happiness", 1) +
                               landmark_line("a1.jpg", "anger", 2) + landmark_line("c1.jpg", "happiness", 3) +
                               landmark_line("d1.jpg", "neutral", 4));
  const auto result = load_legend(parse_legend_csv(legend), parse_landmark_csv(landmarks), {});
  ASSERT_EQ(result.dataset.size(), 2u);
  EXPECT_EQ(result.dataset.records[0].image_id, "c1.jpg");
  EXPECT_EQ(result.dataset.records[1].image_id, "d1.jpg");
  EXPECT_EQ(result.dropped, (DropCounts{1, 1, 1}));
  EXPECT_EQ(result.dataset.class_labels, (std::vector<std::string>{"happiness", "neutral"}));
}

TEST(LoadLegend, MixedCaseKeptAndEmptyKeepSet) {
  const std::vector<LegendRow> legend{{"x", "1", "Happiness"}, {"x", "2", "NEUTRAL"}};
  std::vector<LandmarkRow> lms{{"1", "happiness", {}}, {"2", "neutral", {}}};
  const auto kept = load_legend(legend, lms, {});
  ASSERT_EQ(kept.dataset.size(), 2u);
  EXPECT_EQ(kept.dataset.records[0].label, "happiness");

  LoadConfig none;
  none.kept_labels.clear();
  const auto empty = load_legend(legend, lms, none);
  EXPECT_EQ(empty.dataset.size(), 0u);
  EXPECT_EQ(kind_of([&] { build_feature_tensors(empty.dataset, FeatureKind::Modified); }),
            ErrorKind::EmptyDataset);
}

TEST(LoadLegend, DuplicateIdsRejected) {
  const std::vector<LegendRow> legend{{"x", "1", "happiness"}, {"y", "1", "neutral"}};
  EXPECT_EQ(kind_of([&] { load_legend(legend, {}, {}); }), ErrorKind::DuplicateImageId);
}

TEST(LoadLegend, KeptRecordsAreSubsetAndDropsAddUp) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> labels{"happiness", "neutral", "anger", "surprise"};
  const std::vector<std::string> submitters{"jhamski", "628", "a", "b", "c"};
  std::vector<LegendRow> legend;
  std::vector<LandmarkRow> lms;
  for (int i = 0; i < 300; ++i) {
    const std::string id = "i" + std::to_string(i);
    const auto& label = labels[rng() % labels.size()];
    legend.push_back({submitters[rng() % submitters.size()], id, label});
    if (rng() % 4 != 0) lms.push_back({id, label, {}});
  }
  const auto r = load_legend(legend, lms, {});
  EXPECT_EQ(r.dataset.size() + r.dropped.submitter + r.dropped.label + r.dropped.missing, legend.size());
  for (const auto& rec : r.dataset.records) {
    EXPECT_TRUE(rec.label == "happiness" || rec.label == "neutral");
    EXPECT_TRUE(rec.submitter != "jhamski" && rec.submitter != "628");
  }
}

TEST(Split, TenAndTen) {
  const auto ds = synth_generate(10, 1, 2.0);
  const auto s = stratified_split(ds, 2, 42);
  EXPECT_EQ(s.val.class_counts(), (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(s.train.class_counts(), (std::vector<std::size_t>{8, 8}));
  std::set<std::string> ids;
  for (const auto& r : s.train.records) ids.insert(r.image_id);
  for (const auto& r : s.val.records) EXPECT_FALSE(ids.contains(r.image_id));
  EXPECT_EQ(kind_of([&] { stratified_split(ds, 11, 42); }), ErrorKind::InsufficientClassCount);
  EXPECT_EQ(kind_of([&] { stratified_split(ds, 10, 42); }), ErrorKind::InsufficientClassCount);
}

TEST(Split, PartitionPreservesOrderAndIsSeeded) {
  const auto ds = synth_generate(40, 2, 2.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = stratified_split(ds, 7, seed);
    EXPECT_EQ(s.train.size() + s.val.size(), ds.size());
    // both halves are subsequences of the input
    for (const auto* half : {&s.train, &s.val}) {
      std::size_t pos = 0;
      for (const auto& r : half->records) {
        while (pos < ds.size() && ds.records[pos].image_id != r.image_id) ++pos;
        ASSERT_LT(pos, ds.size());
        ++pos;
      }
    }
    const auto again = stratified_split(ds, 7, seed);
    for (std::size_t i = 0; i < s.val.size(); ++i) EXPECT_EQ(s.val.records[i].image_id, again.val.records[i].image_id);
  }
}

TEST(Split, FullDatasetScaleCounts) {
  LabeledDataset ds;
  ds.class_labels = {"happiness", "neutral"};
  for (std::size_t i = 0; i < 5152 + 6458; ++i)
    ds.records.push_back({"img" + std::to_string(i), i < 5152 ? "happiness" : "neutral", "x", {}});
  const auto s = stratified_split(ds, 191, 0);
  EXPECT_EQ(s.train.class_counts(), (std::vector<std::size_t>{4961, 6267}));
  EXPECT_EQ(s.val.class_counts(), (std::vector<std::size_t>{191, 191}));
  EXPECT_EQ(s.train.size(), 11228u);
  EXPECT_EQ(s.val.size(), 382u);
}

TEST(Synth, ZeroJitterPrototypes) {
  const auto ds = synth_generate(5, 9, 0.0);
  ASSERT_EQ(ds.size(), 10u);
  for (const auto& r : ds.records) {
    EXPECT_EQ(r.landmarks, r.label == "happiness" ? happiness_prototype() : neutral_prototype());
  }
  const auto h = happiness_prototype();
  const auto n = neutral_prototype();
  int differing = 0;
  for (std::size_t i = 0; i < 68; ++i) {
    if (h.points[i] != n.points[i]) {
      ++differing;
      EXPECT_GE(i, 48u);
    }
  }
  EXPECT_GT(differing, 0);
}

TEST(Synth, InterleavedAndBalanced) {
  const auto ds = synth_generate(7, 1, 2.0);
  EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{7, 7}));
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_EQ(ds.records[i].label, i % 2 == 0 ? "happiness" : "neutral");
  for (const auto& r : ds.records)
    for (const auto& p : r.landmarks.points) {
      EXPECT_GE(p.x, 0.0);
      EXPECT_LE(p.y, 350.0);
    }
}

// Threshold oracle: a face is "happiness" iff the mean y of the two mouth
// corners is above the midpoint of the prototypes (y grows downward).
TEST(Synth, MouthCornerThresholdSeparates) {
  const auto h = happiness_prototype();
  const auto n = neutral_prototype();
  const double threshold =
      ((h.points[48].y + h.points[54].y) / 2 + (n.points[48].y + n.points[54].y) / 2) / 2;
  EXPECT_DOUBLE_EQ(threshold, 229.0);
  for (std::uint64_t seed : {1u, 7u, 42u}) {
    const auto ds = synth_generate(200, seed, 2.0);
    std::size_t correct = 0;
    for (const auto& r : ds.records) {
      const double corner_y = (r.landmarks.points[48].y + r.landmarks.points[54].y) / 2;
      const std::string guess = corner_y < threshold ? "happiness" : "neutral";
      correct += guess == r.label;
    }
    EXPECT_EQ(correct, ds.size()) << "seed " << seed;
  }
}

TEST(Synth, Deterministic) {
  const auto a = synth_generate(50, 11, 2.0);
  const auto b = synth_generate(50, 11, 2.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.records[i].image_id, b.records[i].image_id);
    EXPECT_EQ(a.records[i].landmarks, b.records[i].landmarks);
  }
  const auto c = synth_generate(50, 12, 2.0);
  EXPECT_NE(a.records[0].landmarks, c.records[0].landmarks);
}

TEST(Tensors, Counts) {
  const auto ds = synth_generate(5, 3, 2.0);
  const auto raster = build_raster_tensors(ds, true);
  ASSERT_EQ(raster.inputs.size(), 20u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(raster.labels[i + 10], raster.labels[i]);
    EXPECT_EQ(raster.inputs[i + 10], hflip(raster.inputs[i]));
  }
  EXPECT_EQ(build_raster_tensors(ds, false).inputs.size(), 10u);

  const auto mod = build_feature_tensors(ds, FeatureKind::Modified);
  for (const auto& row : mod.inputs) EXPECT_EQ(row.size(), 114u);
  EXPECT_EQ(mod.labels[0], 0u);
  EXPECT_EQ(mod.labels[1], 1u);
}

TEST(Tensors, AbsoluteBoundaryRecordIsAllOnes) {
  LabeledDataset ds;
  ds.class_labels = {"happiness", "neutral"};
  DatasetRecord r{"x", "neutral", "s", {}};
  for (auto& p : r.landmarks.points) p = {350, 350};
  ds.records.push_back(r);
  const auto t = build_feature_tensors(ds, FeatureKind::Absolute);
  ASSERT_EQ(t.inputs[0].size(), 136u);
  for (float v : t.inputs[0]) EXPECT_EQ(v, 1.0f);
  EXPECT_EQ(t.labels[0], 1u);
}

TEST(Representation, ParseAndName) {
  EXPECT_EQ(parse_representation("modified"), Representation::Modified);
  EXPECT_EQ(to_string(Representation::Raster), "raster");
  EXPECT_EQ(kind_of([] { parse_representation("pixels"); }), ErrorKind::ParseError);
}
