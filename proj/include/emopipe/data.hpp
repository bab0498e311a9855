#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "emopipe/features.hpp"
#include "emopipe/nn/train.hpp"

namespace emopipe::data {

inline constexpr std::array<std::string_view, 8> kKnownEmotions{
    "anger", "contempt", "disgust", "fear", "happiness", "sadness", "surprise", "neutral"};

/// Trims whitespace and lowercases. Throws ParseError for labels outside the
/// eight known emotions.
std::string canonical_label(std::string_view raw);

struct DatasetRecord {
  std::string image_id;
  std::string label;
  std::string submitter;
  LandmarkSet landmarks;
};

struct LabeledDataset {
  std::vector<DatasetRecord> records;
  std::vector<std::string> class_labels;  // sorted; position is the class index

  /// Throws IndexOutOfRange for labels not in class_labels.
  std::size_t class_index(std::string_view label) const;
  std::vector<std::size_t> class_counts() const;
  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
};

// ---------------------------------------------------------------------------
// CSV files

/// One row of the landmark table: `image_id,label,x0,y0,...,x67,y67`.
struct LandmarkRow {
  std::string image_id;
  std::string label;
  LandmarkSet landmarks;
};

/// One row of the legend table: `submitter,image_id,label`.
struct LegendRow {
  std::string submitter;
  std::string image_id;
  std::string label;
};

// Both readers require a header row and throw ParseError (with line number) on
// a wrong field count or an unparsable number.
std::vector<LandmarkRow> parse_landmark_csv(std::istream& in);
std::vector<LegendRow> parse_legend_csv(std::istream& in);
std::vector<LandmarkRow> read_landmark_csv(const std::filesystem::path& path);
std::vector<LegendRow> read_legend_csv(const std::filesystem::path& path);

void write_landmark_csv(std::ostream& out, const LabeledDataset& ds);
void write_legend_csv(std::ostream& out, const LabeledDataset& ds);

// ---------------------------------------------------------------------------
// Loading and splitting

struct LoadConfig {
  std::set<std::string> excluded_submitters{"jhamski", "628"};
  std::set<std::string> kept_labels{"happiness", "neutral"};
};

struct DropCounts {
  std::size_t submitter = 0;
  std::size_t label = 0;
  std::size_t missing = 0;

  friend bool operator==(const DropCounts&, const DropCounts&) = default;
};

struct LoadResult {
  LabeledDataset dataset;
  DropCounts dropped;
};

/// Joins legend and landmark rows on image_id, keeping legend order. A record
/// is dropped (and counted once, in this order) for an excluded submitter, a
/// label outside kept_labels, or a missing landmark row. Class labels are the
/// sorted canonical kept_labels. Throws ParseError and DuplicateImageId.
LoadResult load_legend(const std::vector<LegendRow>& legend, const std::vector<LandmarkRow>& landmarks,
                       const LoadConfig& config = {});
LoadResult load_legend(const std::filesystem::path& legend_csv, const std::filesystem::path& landmarks_csv,
                       const LoadConfig& config = {});

struct Split {
  LabeledDataset train;
  LabeledDataset val;
};

/// Moves exactly `val_per_class` seeded-random records of every class into the
/// validation set; both halves keep the input order. Throws
/// InsufficientClassCount unless every class has more than val_per_class records.
Split stratified_split(const LabeledDataset& ds, std::size_t val_per_class, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic faces

inline constexpr double kSmileCornerLift = 12.0;
inline constexpr double kSmileMidLipDrop = 6.0;
// Mouth corners are raised; the lip midline points are lowered.
inline constexpr std::array<std::size_t, 2> kMouthCorners{48, 54};
inline constexpr std::array<std::size_t, 4> kMidLip{51, 57, 62, 66};

LandmarkSet neutral_prototype();
LandmarkSet happiness_prototype();

/// n_per_class happiness and n_per_class neutral faces, interleaved
/// (happiness first), each coordinate jittered by N(0, jitter_sigma) and
/// clamped to [0, 350].
LabeledDataset synth_generate(std::size_t n_per_class, std::uint64_t seed, double jitter_sigma = 2.0);

// ---------------------------------------------------------------------------
// Tensors

enum class Representation { Absolute, Modified, Raster };

Representation parse_representation(std::string_view text);
std::string_view to_string(Representation rep) noexcept;

/// Feature rows for the absolute or modified representation. Throws EmptyDataset.
nn::FeatureTensors build_feature_tensors(const LabeledDataset& ds, FeatureKind kind);

/// Rasterized grids; with augment_flip the mirrored grids follow the originals
/// with the same labels, doubling the row count. Throws EmptyDataset.
nn::GridTensors build_raster_tensors(const LabeledDataset& ds, bool augment_flip,
                                     int grid_size = kDefaultGridSize);

}  // namespace emopipe::data
