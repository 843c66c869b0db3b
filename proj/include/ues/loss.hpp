#pragma once

#include <span>
#include <vector>

#include "ues/pseudo_label.hpp"
#include "ues/uncertainty.hpp"

namespace ues {

// Supervision targets, one row per sample: one-hot class vectors for
// classification, rendered heatmaps for regression.
struct TargetBatch {
  Mode mode = Mode::kClassification;
  std::size_t entry_size = 0;
  std::vector<double> values;  // N x entry_size

  std::size_t batch_size() const { return entry_size == 0 ? 0 : values.size() / entry_size; }
  std::span<const double> sample(std::size_t i) const {
    return std::span<const double>(values).subspan(i * entry_size, entry_size);
  }
};

TargetBatch one_hot_targets(std::span<const std::size_t> classes, std::size_t class_count);

// Loss value plus d(value)/d(pre-activation head outputs), laid out like
// the HeadBatch the loss was computed from. Heads emit softmax
// distributions (classification) or sigmoid grids (regression); the
// gradients below are the fused activation+loss forms, so they are
// computable from the post-activation values alone.
struct LossGrad {
  double value = 0.0;
  std::vector<double> grad;        // B x M x entry_size
  std::vector<double> per_sample;  // per-sample mean-over-heads term
};

struct LossReport {
  double supervised = 0.0;
  double unsupervised = 0.0;
  double lambda_u = 1.0;
  double total = 0.0;
  std::vector<double> per_sample_terms;
};

// Mean over samples and heads of CE(p_(i,m), y_i) (classification) or
// MSE (regression).
LossGrad supervised_loss(const HeadBatch& outputs, const TargetBatch& targets);

// Sample-weighted double mean of CE / MSE against the ensemble
// pseudo-labels. The pseudo-labels are constants: no gradient flows into
// them, and masked-out samples contribute zero.
LossGrad ensemble_loss(const HeadBatch& outputs, const PseudoLabelBatch& pseudo,
                       std::span<const double> sample_weights);

LossReport make_loss_report(const LossGrad& supervised, const LossGrad& ensemble,
                            double lambda_u);

}  // namespace ues
