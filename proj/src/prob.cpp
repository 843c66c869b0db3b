#include "ues/prob.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ues {

ProbVector softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty input");
  for (double v : logits) {
    if (!std::isfinite(v)) throw InvalidInput("softmax: non-finite entry");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  ProbVector out;
  out.values.resize(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out.values[j] = std::exp(logits[j] - peak);
    sum += out.values[j];
  }
  for (double& v : out.values) v /= sum;
  out.normalized = true;
  return out;
}

double cross_entropy(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw InvalidInput("cross_entropy: length mismatch (" + std::to_string(pred.size()) +
                       " vs " + std::to_string(target.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    acc -= target[j] * std::log(std::max(pred[j], kLogEps));
  }
  return acc;
}

double cross_entropy(const ProbVector& pred, const ProbVector& target) {
  return cross_entropy(std::span<const double>(pred.values), std::span<const double>(target.values));
}

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidInput("mse: shape mismatch (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw InvalidInput("mse: empty input");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double mse(const Heatmap& a, const Heatmap& b) {
  if (!(a.shape == b.shape)) throw InvalidInput("mse: heatmap shape mismatch");
  return mse(std::span<const double>(a.values), std::span<const double>(b.values));
}

double mse(const ProbVector& a, const ProbVector& b) {
  return mse(std::span<const double>(a.values), std::span<const double>(b.values));
}

std::size_t argmax_index(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = j;
  }
  return best;
}

Point2D grid_peak(std::span<const double> cells, std::size_t height, std::size_t width) {
  if (cells.size() != height * width || cells.empty()) {
    throw InvalidInput("grid_peak: bad grid shape");
  }
  const std::size_t flat = argmax_index(cells);
  return Point2D{static_cast<double>(flat % width), static_cast<double>(flat / width)};
}

Point2D heatmap_peak(const Heatmap& h, std::size_t keypoint) {
  if (keypoint >= h.shape.keypoints) throw InvalidInput("heatmap_peak: keypoint index out of range");
  const std::size_t cells = h.shape.cells();
  return grid_peak(std::span<const double>(h.values).subspan(keypoint * cells, cells),
                   h.shape.height, h.shape.width);
}

}  // namespace ues
