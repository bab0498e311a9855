#include "emopipe/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

#include "emopipe/error.hpp"

namespace emopipe::data {
namespace {

constexpr std::size_t kLandmarkFields = 2 + 2 * kNumLandmarks;  // 138

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty() || !std::isfinite(v)) {
    throw Error(ErrorKind::ParseError, fmt::format("line {}: '{}' is not a number", line_no, field));
  }
  return v;
}

// Calls row(fields, line_no) for every non-blank line after the header.
template <typename F>
void for_each_row(std::istream& in, std::size_t expected_fields, const char* what, F&& row) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != expected_fields) {
      throw Error(ErrorKind::ParseError, fmt::format("{} line {}: {} fields, expected {}", what, line_no,
                                                     fields.size(), expected_fields));
    }
    row(fields, line_no);
  }
  if (!header_seen) throw Error(ErrorKind::ParseError, fmt::format("{} has no header row", what));
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, fmt::format("cannot open {}", path.string()));
  return in;
}

// Shortest representation that parses back to the same double.
std::string format_coord(double v) { return fmt::format("{}", v); }

}  // namespace

std::string canonical_label(std::string_view raw) {
  std::string label(trim(raw));
  std::transform(label.begin(), label.end(), label.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (std::find(kKnownEmotions.begin(), kKnownEmotions.end(), label) == kKnownEmotions.end()) {
    throw Error(ErrorKind::ParseError, fmt::format("unknown emotion label '{}'", raw));
  }
  return label;
}

std::size_t LabeledDataset::class_index(std::string_view label) const {
  const auto it = std::find(class_labels.begin(), class_labels.end(), label);
  if (it == class_labels.end()) throw Error(ErrorKind::IndexOutOfRange, fmt::format("label '{}' not in use", label));
  return static_cast<std::size_t>(it - class_labels.begin());
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_labels.size(), 0);
  for (const auto& r : records) ++counts[class_index(r.label)];
  return counts;
}

std::vector<LandmarkRow> parse_landmark_csv(std::istream& in) {
  std::vector<LandmarkRow> rows;
  for_each_row(in, kLandmarkFields, "landmark CSV", [&](const auto& f, std::size_t line_no) {
    LandmarkRow row;
    row.image_id = std::string(f[0]);
    row.label = std::string(f[1]);
    for (std::size_t i = 0; i < kNumLandmarks; ++i) {
      row.landmarks.points[i] = {parse_number(f[2 + 2 * i], line_no), parse_number(f[3 + 2 * i], line_no)};
    }
    rows.push_back(std::move(row));
  });
  return rows;
}

std::vector<LegendRow> parse_legend_csv(std::istream& in) {
  std::vector<LegendRow> rows;
  for_each_row(in, 3, "legend CSV", [&](const auto& f, std::size_t) {
    rows.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
  });
  return rows;
}

std::vector<LandmarkRow> read_landmark_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_landmark_csv(in);
}

std::vector<LegendRow> read_legend_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_legend_csv(in);
}

void write_landmark_csv(std::ostream& out, const LabeledDataset& ds) {
  out << "image_id,label";
  for (std::size_t i = 0; i < kNumLandmarks; ++i) out << ",x" << i << ",y" << i;
  out << '\n';
  for (const auto& r : ds.records) {
    out << r.image_id << ',' << r.label;
    for (const auto& p : r.landmarks.points) out << ',' << format_coord(p.x) << ',' << format_coord(p.y);
    out << '\n';
  }
}

void write_legend_csv(std::ostream& out, const LabeledDataset& ds) {
  out << "submitter,image_id,label\n";
  for (const auto& r : ds.records) out << r.submitter << ',' << r.image_id << ',' << r.label << '\n';
}

LoadResult load_legend(const std::vector<LegendRow>& legend, const std::vector<LandmarkRow>& landmarks,
                       const LoadConfig& config) {
  std::unordered_map<std::string, const LandmarkRow*> by_id;
  for (const auto& row : landmarks) {
    if (!by_id.emplace(row.image_id, &row).second) {
      throw Error(ErrorKind::DuplicateImageId, fmt::format("landmark rows repeat '{}'", row.image_id));
    }
  }

  std::set<std::string> kept;
  for (const auto& l : config.kept_labels) kept.insert(canonical_label(l));

  LoadResult result;
  result.dataset.class_labels.assign(kept.begin(), kept.end());
  std::set<std::string> seen;
  for (const auto& row : legend) {
    if (!seen.insert(row.image_id).second) {
      throw Error(ErrorKind::DuplicateImageId, fmt::format("legend repeats '{}'", row.image_id));
    }
    const std::string label = canonical_label(row.label);
    if (config.excluded_submitters.contains(row.submitter)) {
      ++result.dropped.submitter;
      continue;
    }
    if (!kept.contains(label)) {
      ++result.dropped.label;
      continue;
    }
    const auto it = by_id.find(row.image_id);
    if (it == by_id.end()) {
      ++result.dropped.missing;
      continue;
    }
    result.dataset.records.push_back({row.image_id, label, row.submitter, it->second->landmarks});
  }
  return result;
}

LoadResult load_legend(const std::filesystem::path& legend_csv, const std::filesystem::path& landmarks_csv,
                       const LoadConfig& config) {
  return load_legend(read_legend_csv(legend_csv), read_landmark_csv(landmarks_csv), config);
}

Split stratified_split(const LabeledDataset& ds, std::size_t val_per_class, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(ds.class_labels.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) by_class[ds.class_index(ds.records[i].label)].push_back(i);

  nn::Rng rng(seed);
  std::vector<bool> to_val(ds.records.size(), false);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.size() <= val_per_class) {
      throw Error(ErrorKind::InsufficientClassCount,
                  fmt::format("class '{}' has {} records, needs more than {}", ds.class_labels[c], idx.size(),
                              val_per_class));
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < val_per_class; ++k) to_val[idx[k]] = true;
  }

  Split split;
  split.train.class_labels = ds.class_labels;
  split.val.class_labels = ds.class_labels;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    (to_val[i] ? split.val : split.train).records.push_back(ds.records[i]);
  }
  return split;
}

LandmarkSet neutral_prototype() {
  LandmarkSet lm;
  auto& p = lm.points;
  constexpr double kPi = 3.14159265358979323846;
  // Jaw: U-shaped arc from the subject's right ear, under the chin, to the left ear.
  for (std::size_t i = 0; i < 17; ++i) {
    const double t = static_cast<double>(i) / 16.0;
    p[i] = {175.0 - 115.0 * std::cos(kPi * t), 150.0 + 150.0 * std::sin(kPi * t)};
  }
  for (std::size_t k = 0; k < 5; ++k) {
    const double arch = 8.0 * std::sin(kPi * static_cast<double>(k) / 4.0);
    p[17 + k] = {85.0 + 17.5 * static_cast<double>(k), 115.0 - arch};
    p[22 + k] = {195.0 + 17.5 * static_cast<double>(k), 115.0 - arch};
  }
  for (std::size_t k = 0; k < 4; ++k) p[27 + k] = {175.0, 130.0 + 15.0 * static_cast<double>(k)};
  const std::array<Point, 5> nose_base{{{155, 190}, {165, 193}, {175, 195}, {185, 193}, {195, 190}}};
  std::copy(nose_base.begin(), nose_base.end(), p.begin() + 31);
  const std::array<Point, 6> right_eye{{{100, 140}, {110, 133}, {128, 133}, {140, 140}, {128, 146}, {110, 146}}};
  const std::array<Point, 6> left_eye{{{210, 140}, {222, 133}, {240, 133}, {250, 140}, {240, 146}, {222, 146}}};
  std::copy(right_eye.begin(), right_eye.end(), p.begin() + 36);
  std::copy(left_eye.begin(), left_eye.end(), p.begin() + 42);
  const std::array<Point, 20> mouth{{{135, 235}, {148, 228}, {162, 224}, {175, 226}, {188, 224},
                                     {202, 228}, {215, 235}, {202, 244}, {188, 249}, {175, 250},
                                     {162, 249}, {148, 244}, {140, 235}, {160, 231}, {175, 232},
                                     {190, 231}, {210, 235}, {190, 240}, {175, 241}, {160, 240}}};
  std::copy(mouth.begin(), mouth.end(), p.begin() + 48);
  return lm;
}

LandmarkSet happiness_prototype() {
  LandmarkSet lm = neutral_prototype();
  for (auto i : kMouthCorners) lm.points[i].y -= kSmileCornerLift;
  for (auto i : kMidLip) lm.points[i].y += kSmileMidLipDrop;
  return lm;
}

LabeledDataset synth_generate(std::size_t n_per_class, std::uint64_t seed, double jitter_sigma) {
  LabeledDataset ds;
  ds.class_labels = {"happiness", "neutral"};
  nn::Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::array<LandmarkSet, 2> protos{happiness_prototype(), neutral_prototype()};
  std::size_t next_id = 0;
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (std::size_t c = 0; c < 2; ++c) {
      DatasetRecord r;
      r.image_id = fmt::format("synth_{:06d}", next_id++);
      r.label = ds.class_labels[c];
      r.submitter = "synth";
      r.landmarks = protos[c];
      for (auto& pt : r.landmarks.points) {
        // Always draw, so the stream does not depend on sigma being zero.
        const double dx = noise(rng);
        const double dy = noise(rng);
        pt.x = std::clamp(pt.x + jitter_sigma * dx, 0.0, kFrameSize);
        pt.y = std::clamp(pt.y + jitter_sigma * dy, 0.0, kFrameSize);
      }
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

Representation parse_representation(std::string_view text) {
  if (text == "absolute") return Representation::Absolute;
  if (text == "modified") return Representation::Modified;
  if (text == "raster") return Representation::Raster;
  throw Error(ErrorKind::ParseError, fmt::format("unknown representation '{}'", text));
}

std::string_view to_string(Representation rep) noexcept {
  switch (rep) {
    case Representation::Absolute: return "absolute";
    case Representation::Modified: return "modified";
    case Representation::Raster: return "raster";
  }
  return "unknown";
}

nn::FeatureTensors build_feature_tensors(const LabeledDataset& ds, FeatureKind kind) {
  if (ds.empty()) throw Error(ErrorKind::EmptyDataset, "no records to convert");
  nn::FeatureTensors out;
  out.inputs.reserve(ds.size());
  for (const auto& r : ds.records) {
    const auto fv = extract_features(r.landmarks, kind);
    out.inputs.push_back(nn::cast_vector<float, double>(fv.values));
    out.labels.push_back(ds.class_index(r.label));
  }
  return out;
}

nn::GridTensors build_raster_tensors(const LabeledDataset& ds, bool augment_flip, int grid_size) {
  if (ds.empty()) throw Error(ErrorKind::EmptyDataset, "no records to convert");
  nn::GridTensors out;
  for (const auto& r : ds.records) {
    out.inputs.push_back(rasterize(r.landmarks, grid_size));
    out.labels.push_back(ds.class_index(r.label));
  }
  if (augment_flip) {
    const std::size_t n = out.inputs.size();
    for (std::size_t i = 0; i < n; ++i) {
      out.inputs.push_back(hflip(out.inputs[i]));
      out.labels.push_back(out.labels[i]);
    }
  }
  return out;
}

}  // namespace emopipe::data
