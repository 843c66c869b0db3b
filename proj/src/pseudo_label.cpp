#include "ues/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ues {

void PseudoLabelConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau: must lie in [0, 1]");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs: must be >= 0");
}

double PseudoLabelBatch::mask_rate() const {
  if (mask.empty()) return 0.0;
  std::size_t n = 0;
  for (auto b : mask) n += b ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(mask.size());
}

PseudoLabelBatch ensemble_prediction(const HeadBatch& batch,
                                     std::span<const double> head_weights,
                                     const PseudoLabelConfig& cfg, int epoch) {
  cfg.validate();
  if (head_weights.size() != batch.head_count()) {
    throw InvalidInput("ensemble_prediction: weight-vector length != M");
  }
  const double wsum = std::accumulate(head_weights.begin(), head_weights.end(), 0.0);
  if (std::abs(wsum - 1.0) > 1e-6) {
    throw InvalidInput("ensemble_prediction: head weights must sum to 1");
  }

  const double tau_eff = epoch < cfg.warmup_epochs ? 0.0 : cfg.tau;
  const std::size_t entry = batch.entry_size();
  const double inv_m = 1.0 / static_cast<double>(batch.head_count());

  PseudoLabelBatch out;
  out.mode = batch.mode();
  out.entry_size = entry;
  out.grid = batch.grid();
  out.ensemble.assign(batch.batch_size() * entry, 0.0);
  out.mask.assign(batch.batch_size(), 0);
  if (out.mode == Mode::kClassification) {
    out.hard_classes.assign(batch.batch_size(), 0);
  } else {
    out.hard_points.assign(batch.batch_size(), {});
  }

  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    double* acc = out.ensemble.data() + i * entry;
    double passed_weight = 0.0;
    std::size_t passed = 0;
    for (std::size_t m = 0; m < batch.head_count(); ++m) {
      const auto p = batch.entry(i, m);
      const double w = head_weights[m];
      // The log-clamp keeps the confidence strictly positive, so every head
      // passes while the warm-up schedule holds tau_eff at zero.
      double peak = *std::max_element(p.begin(), p.end());
      peak = std::max(peak, kLogEps);
      if (!(w * peak > tau_eff)) continue;
      ++passed;
      passed_weight += w;
      for (std::size_t j = 0; j < entry; ++j) acc[j] += w * p[j] * inv_m;
    }
    out.mask[i] = passed > 0 ? 1 : 0;
    if (out.mask[i] && cfg.normalize_ensemble) {
      // Classification: rescale to sum 1. Regression: divide out the
      // included weight mass so the result is a proper weighted average.
      double scale = 0.0;
      if (out.mode == Mode::kClassification) {
        scale = std::accumulate(acc, acc + entry, 0.0);
      } else {
        scale = passed_weight * inv_m;
      }
      if (scale > 0.0) {
        for (std::size_t j = 0; j < entry; ++j) acc[j] /= scale;
      }
    }
    if (out.mask[i]) {
      const std::span<const double> row(acc, entry);
      if (out.mode == Mode::kClassification) {
        out.hard_classes[i] = argmax_index(row);
      } else {
        auto& pts = out.hard_points[i];
        pts.resize(out.grid.keypoints);
        for (std::size_t k = 0; k < out.grid.keypoints; ++k) {
          pts[k] = grid_peak(row.subspan(k * out.grid.cells(), out.grid.cells()),
                             out.grid.height, out.grid.width);
        }
      }
    }
  }
  return out;
}

namespace {

void require_masked_in(const PseudoLabelBatch& p, std::size_t i) {
  if (i >= p.batch_size()) throw InvalidInput("hard_label: sample index out of range");
  if (!p.mask[i]) {
    throw MaskedSample("hard_label: sample " + std::to_string(i) + " was masked out");
  }
}

}  // namespace

std::size_t hard_label_class(const PseudoLabelBatch& p, std::size_t i) {
  require_masked_in(p, i);
  if (p.mode != Mode::kClassification) throw ModeMismatch("hard_label_class: regression batch");
  return p.hard_classes[i];
}

const std::vector<Point2D>& hard_label_points(const PseudoLabelBatch& p, std::size_t i) {
  require_masked_in(p, i);
  if (p.mode != Mode::kRegression) throw ModeMismatch("hard_label_points: classification batch");
  return p.hard_points[i];
}

PseudoLabelBatch harden_targets(const PseudoLabelBatch& p, double sigma) {
  PseudoLabelBatch out = p;
  for (std::size_t i = 0; i < p.batch_size(); ++i) {
    if (!p.mask[i]) continue;
    double* row = out.ensemble.data() + i * p.entry_size;
    std::fill(row, row + p.entry_size, 0.0);
    if (p.mode == Mode::kClassification) {
      row[p.hard_classes[i]] = 1.0;
    } else {
      for (std::size_t k = 0; k < p.grid.keypoints; ++k) {
        const Point2D c = p.hard_points[i][k];
        double* cell = row + k * p.grid.cells();
        for (std::size_t r = 0; r < p.grid.height; ++r) {
          for (std::size_t q = 0; q < p.grid.width; ++q) {
            const double dx = static_cast<double>(q) - c.x;
            const double dy = static_cast<double>(r) - c.y;
            cell[r * p.grid.width + q] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          }
        }
      }
    }
  }
  return out;
}

}  // namespace ues
