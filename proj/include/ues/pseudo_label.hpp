#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ues/uncertainty.hpp"

namespace ues {

struct PseudoLabelConfig {
  double tau = 0.95;            // confidence threshold
  int warmup_epochs = 5;        // threshold disabled below this epoch
  bool normalize_ensemble = false;  // keep the raw weighted sum by default

  void validate() const;
};

// Thresholded head-weighted ensemble predictions with per-sample masks.
// `ensemble` keeps the raw (1/M)-scaled weighted sum unless normalization
// was requested; hard labels are defined only where mask is set.
struct PseudoLabelBatch {
  Mode mode = Mode::kClassification;
  std::size_t entry_size = 0;
  GridShape grid;
  std::vector<double> ensemble;  // B x entry_size
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> hard_classes;             // classification
  std::vector<std::vector<Point2D>> hard_points;     // regression

  std::size_t batch_size() const { return mask.size(); }
  std::span<const double> sample(std::size_t i) const {
    return std::span<const double>(ensemble).subspan(i * entry_size, entry_size);
  }
  double mask_rate() const;
};

// P-bar_i = (1/M) sum_m [max(w_m * p_(i,m)) > tau_eff] * w_m * p_(i,m),
// with tau_eff = 0 while epoch < warmup_epochs. head_weights must sum to 1.
PseudoLabelBatch ensemble_prediction(const HeadBatch& batch,
                                     std::span<const double> head_weights,
                                     const PseudoLabelConfig& cfg, int epoch);

// Hard label of a masked-in sample; throws MaskedSample otherwise.
std::size_t hard_label_class(const PseudoLabelBatch& p, std::size_t i);
const std::vector<Point2D>& hard_label_points(const PseudoLabelBatch& p, std::size_t i);

// Replaces each masked-in ensemble entry by a hard target: a one-hot vector
// (classification) or unit-peak gaussians rendered at the peaks (regression).
PseudoLabelBatch harden_targets(const PseudoLabelBatch& p, double sigma = 1.5);

}  // namespace ues
