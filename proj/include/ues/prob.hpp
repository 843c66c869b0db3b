#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ues/error.hpp"

namespace ues {

// Clamp applied inside every log(); cross-entropy is undefined at exact zeros.
inline constexpr double kLogEps = 1e-12;

struct Point2D {
  double x = 0.0;  // column coordinate
  double y = 0.0;  // row coordinate
};

// A single head's class distribution. `normalized` marks vectors that sum
// to 1; thresholded ensemble outputs keep their raw scale and clear it.
struct ProbVector {
  std::vector<double> values;
  bool normalized = true;
};

struct GridShape {
  std::size_t keypoints = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t cells() const { return height * width; }
  std::size_t size() const { return keypoints * height * width; }
  bool operator==(const GridShape&) const = default;
};

// K stacked H x W nonnegative grids, one per keypoint, row-major.
struct Heatmap {
  GridShape shape;
  std::vector<double> values;
};

// Numerically stabilized softmax (max subtraction); shift-invariant.
ProbVector softmax(std::span<const double> logits);

// -sum_j target_j * log(max(pred_j, kLogEps)).
double cross_entropy(std::span<const double> pred, std::span<const double> target);
double cross_entropy(const ProbVector& pred, const ProbVector& target);

// Mean over all entries of squared differences.
double mse(std::span<const double> a, std::span<const double> b);
double mse(const Heatmap& a, const Heatmap& b);
double mse(const ProbVector& a, const ProbVector& b);

// Index of the maximum entry; ties break to the lowest index.
std::size_t argmax_index(std::span<const double> v);

inline std::size_t argmax_class(const ProbVector& p) { return argmax_index(p.values); }

// Location of the grid maximum, row-major first on ties. x is the column.
Point2D grid_peak(std::span<const double> cells, std::size_t height, std::size_t width);
Point2D heatmap_peak(const Heatmap& h, std::size_t keypoint);

}  // namespace ues
