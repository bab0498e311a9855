#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace emopipe {

inline constexpr std::size_t kNumLandmarks = 68;
inline constexpr double kFrameSize = 350.0;
inline constexpr int kDefaultGridSize = 350;
inline constexpr std::size_t kAbsoluteFeatureCount = 2 * kNumLandmarks;  // 136
inline constexpr std::size_t kModifiedFeatureCount = 114;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// 68 facial landmarks in pixel units of a 350x350 frame, standard iBUG order.
struct LandmarkSet {
  std::array<Point, kNumLandmarks> points{};

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

// Index ranges of the 68-point layout, half-open [first, last).
namespace landmark_index {
struct Range {
  std::size_t first;
  std::size_t last;
  constexpr std::size_t size() const { return last - first; }
};
inline constexpr Range kJaw{0, 17};
inline constexpr Range kRightBrow{17, 22};
inline constexpr Range kLeftBrow{22, 27};
inline constexpr Range kNose{27, 36};
inline constexpr Range kRightEye{36, 42};
inline constexpr Range kLeftEye{42, 48};
inline constexpr Range kMouth{48, 68};
}  // namespace landmark_index

enum class FeatureKind { Absolute, Modified };

struct FeatureVector {
  FeatureKind kind = FeatureKind::Absolute;
  std::vector<double> values;
};

/// [x0/350, y0/350, x1/350, ...], 136 values.
FeatureVector absolute_features(const LandmarkSet& lm);

/// Arithmetic mean of a point list. Throws Error(EmptyPart) for an empty list.
Point part_center(std::span<const Point> points);

/// Relative representation, 114 values, all divided by 350:
///   face outline center (2), width, height,
///   mouth center (2) + mouth points relative to it (40),
///   nose center (2) + nose points relative (18),
///   right eye center (2) + right eye relative (12) + right brow relative to that eye (10),
///   left eye center (2) + left eye relative (12) + left brow relative to that eye (10).
/// The outline is the jaw (0-16): bounding-box width, height and midpoint.
FeatureVector modified_features(const LandmarkSet& lm);

std::size_t feature_count(FeatureKind kind) noexcept;
FeatureVector extract_features(const LandmarkSet& lm, FeatureKind kind);

/// Square binary occupancy grid, row = y, column = x.
class LandmarkGrid {
 public:
  explicit LandmarkGrid(int size = kDefaultGridSize);

  int size() const noexcept { return size_; }
  std::uint8_t at(int row, int col) const { return cells_[index(row, col)]; }
  void set(int row, int col, std::uint8_t value = 1) { cells_[index(row, col)] = value; }
  std::size_t count() const noexcept;
  std::span<const std::uint8_t> cells() const noexcept { return cells_; }

  friend bool operator==(const LandmarkGrid&, const LandmarkGrid&) = default;

 private:
  std::size_t index(int row, int col) const;

  int size_;
  std::vector<std::uint8_t> cells_;
};

/// Marks cell [round(y*s)][round(x*s)] for each point, s = grid_size/350,
/// rounding half away from zero, then clamping to [0, grid_size-1].
LandmarkGrid rasterize(const LandmarkSet& lm, int grid_size = kDefaultGridSize);

/// Mirror across the vertical axis: out[r][c] = in[r][size-1-c].
LandmarkGrid hflip(const LandmarkGrid& grid);

}  // namespace emopipe
