#include "ues/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "ues/error.hpp"

namespace ues {

double mean_point_error(std::span<const Point2D> preds, std::span<const Point2D> gts) {
  if (preds.size() != gts.size()) throw InvalidInput("mean_point_error: count mismatch");
  if (preds.empty()) throw InvalidInput("mean_point_error: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    acc += std::hypot(preds[i].x - gts[i].x, preds[i].y - gts[i].y);
  }
  return acc / static_cast<double>(preds.size());
}

double pck(std::span<const Point2D> preds, std::span<const Point2D> gts,
           double normalize_distance, double threshold) {
  if (preds.size() != gts.size()) throw InvalidInput("pck: count mismatch");
  if (preds.empty()) throw InvalidInput("pck: empty input");
  if (!(normalize_distance > 0.0)) throw InvalidInput("pck: normalization distance must be > 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidInput("pck: threshold must lie in [0, 1]");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = std::hypot(preds[i].x - gts[i].x, preds[i].y - gts[i].y);
    if (d / normalize_distance <= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double pck_reference_distance(const GridShape& grid) {
  return std::hypot(static_cast<double>(grid.width), static_cast<double>(grid.height)) / 4.0;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("pearson: length mismatch");
  if (x.size() < 2) throw InvalidInput("pearson: need at least 2 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<std::size_t> histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw InvalidInput("histogram: bins must be >= 1");
  std::vector<std::size_t> counts(bins, 0);
  if (values.empty()) return counts;
  double max_v = 0.0;
  for (double v : values) {
    if (v < 0.0) throw InvalidInput("histogram: negative value");
    max_v = std::max(max_v, v);
  }
  for (double v : values) {
    std::size_t idx = 0;
    if (max_v > 0.0) {
      idx = static_cast<std::size_t>(v / max_v * static_cast<double>(bins));
      idx = std::min(idx, bins - 1);  // the max lands in the last bin
    }
    ++counts[idx];
  }
  return counts;
}

}  // namespace ues
