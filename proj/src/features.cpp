#include "emopipe/features.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "emopipe/error.hpp"

namespace emopipe {
namespace {

using landmark_index::Range;

std::span<const Point> slice(const LandmarkSet& lm, Range r) {
  return std::span<const Point>(lm.points).subspan(r.first, r.size());
}

void push_scaled(std::vector<double>& out, Point p) {
  out.push_back(p.x / kFrameSize);
  out.push_back(p.y / kFrameSize);
}

void push_relative(std::vector<double>& out, std::span<const Point> points, Point anchor) {
  for (const auto& p : points) push_scaled(out, {p.x - anchor.x, p.y - anchor.y});
}

}  // namespace

FeatureVector absolute_features(const LandmarkSet& lm) {
  FeatureVector fv{FeatureKind::Absolute, {}};
  fv.values.reserve(kAbsoluteFeatureCount);
  for (const auto& p : lm.points) push_scaled(fv.values, p);
  return fv;
}

Point part_center(std::span<const Point> points) {
  if (points.empty()) throw Error(ErrorKind::EmptyPart, "part has no points");
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& p : points) {
    sx += p.x;
    sy += p.y;
  }
  const auto n = static_cast<double>(points.size());
  return {sx / n, sy / n};
}

FeatureVector modified_features(const LandmarkSet& lm) {
  namespace li = landmark_index;
  FeatureVector fv{FeatureKind::Modified, {}};
  auto& out = fv.values;
  out.reserve(kModifiedFeatureCount);

  const auto jaw = slice(lm, li::kJaw);
  const auto [min_x, max_x] = std::minmax_element(
      jaw.begin(), jaw.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
  const auto [min_y, max_y] = std::minmax_element(
      jaw.begin(), jaw.end(), [](const Point& a, const Point& b) { return a.y < b.y; });
  push_scaled(out, {(min_x->x + max_x->x) / 2.0, (min_y->y + max_y->y) / 2.0});
  out.push_back((max_x->x - min_x->x) / kFrameSize);
  out.push_back((max_y->y - min_y->y) / kFrameSize);

  for (const Range part : {li::kMouth, li::kNose}) {
    const auto pts = slice(lm, part);
    const Point c = part_center(pts);
    push_scaled(out, c);
    push_relative(out, pts, c);
  }

  // Brows hang off their eye's center.
  for (const auto& [eye, brow] : {std::pair{li::kRightEye, li::kRightBrow},
                                  std::pair{li::kLeftEye, li::kLeftBrow}}) {
    const auto eye_pts = slice(lm, eye);
    const Point c = part_center(eye_pts);
    push_scaled(out, c);
    push_relative(out, eye_pts, c);
    push_relative(out, slice(lm, brow), c);
  }
  return fv;
}

std::size_t feature_count(FeatureKind kind) noexcept {
  return kind == FeatureKind::Absolute ? kAbsoluteFeatureCount : kModifiedFeatureCount;
}

FeatureVector extract_features(const LandmarkSet& lm, FeatureKind kind) {
  return kind == FeatureKind::Absolute ? absolute_features(lm) : modified_features(lm);
}

LandmarkGrid::LandmarkGrid(int size) : size_(size) {
  if (size <= 0) throw Error(ErrorKind::DimensionMismatch, fmt::format("grid size {}", size));
  cells_.assign(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), 0);
}

std::size_t LandmarkGrid::index(int row, int col) const {
  if (row < 0 || col < 0 || row >= size_ || col >= size_) {
    throw Error(ErrorKind::IndexOutOfRange, fmt::format("cell ({}, {}) outside {}x{}", row, col, size_, size_));
  }
  return static_cast<std::size_t>(row) * static_cast<std::size_t>(size_) + static_cast<std::size_t>(col);
}

std::size_t LandmarkGrid::count() const noexcept {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

LandmarkGrid rasterize(const LandmarkSet& lm, int grid_size) {
  LandmarkGrid grid(grid_size);
  const double scale = grid_size / kFrameSize;
  const auto cell = [&](double v) {
    const double r = std::round(v * scale);
    return static_cast<int>(std::clamp(r, 0.0, static_cast<double>(grid_size - 1)));
  };
  for (const auto& p : lm.points) grid.set(cell(p.y), cell(p.x));
  return grid;
}

LandmarkGrid hflip(const LandmarkGrid& grid) {
  const int n = grid.size();
  LandmarkGrid out(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (grid.at(r, c) != 0) out.set(r, n - 1 - c, grid.at(r, c));
    }
  }
  return out;
}

}  // namespace emopipe
