#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ues/prob.hpp"

namespace ues {

// Mean Euclidean distance between predicted and ground-truth points.
double mean_point_error(std::span<const Point2D> preds, std::span<const Point2D> gts);

// Fraction of keypoints with distance / l <= threshold.
double pck(std::span<const Point2D> preds, std::span<const Point2D> gts,
           double normalize_distance, double threshold);

// Keypoint-task normalization distance: image diagonal / 4.
double pck_reference_distance(const GridShape& grid);

// Pearson correlation; nullopt when either input is constant (the
// undefined case is reported as absent, never as 0).
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Equal-width bins over [0, max(values)]; counts sum to the input size.
// A zero range drops everything into bin 0.
std::vector<std::size_t> histogram(std::span<const double> values, std::size_t bins);

}  // namespace ues
