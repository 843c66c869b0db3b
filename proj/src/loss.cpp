#include "ues/loss.hpp"

#include <cmath>
#include <numeric>

namespace ues {

TargetBatch one_hot_targets(std::span<const std::size_t> classes, std::size_t class_count) {
  if (class_count == 0) throw InvalidInput("one_hot_targets: class_count == 0");
  TargetBatch t;
  t.mode = Mode::kClassification;
  t.entry_size = class_count;
  t.values.assign(classes.size() * class_count, 0.0);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i] >= class_count) throw InvalidInput("one_hot_targets: class index out of range");
    t.values[i * class_count + classes[i]] = 1.0;
  }
  return t;
}

namespace {

// Accumulates one (sample, head) term into value/grad.
//
// Classification, p = softmax(z):
//   CE(p, q) with d/dz_k = scale * (p_k * sum(q) - q_k).
// Regression, s = sigmoid(z):
//   MSE(s, q) with d/dz_k = scale * (2/n) * (s_k - q_k) * s_k * (1 - s_k).
double loss_term(Mode mode, std::span<const double> pred, std::span<const double> target,
                 double scale, double* grad) {
  const std::size_t n = pred.size();
  if (mode == Mode::kClassification) {
    const double tsum = std::accumulate(target.begin(), target.end(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      grad[k] += scale * (pred[k] * tsum - target[k]);
    }
    return cross_entropy(pred, target);
  }
  const double two_over_n = 2.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    grad[k] += scale * two_over_n * (pred[k] - target[k]) * pred[k] * (1.0 - pred[k]);
  }
  return mse(pred, target);
}

}  // namespace

LossGrad supervised_loss(const HeadBatch& outputs, const TargetBatch& targets) {
  if (targets.mode != outputs.mode()) throw ModeMismatch("supervised_loss: mode mismatch");
  if (targets.entry_size != outputs.entry_size() ||
      targets.batch_size() != outputs.batch_size()) {
    throw InvalidInput("supervised_loss: shape mismatch");
  }
  const std::size_t batch = outputs.batch_size();
  const std::size_t heads = outputs.head_count();
  const std::size_t entry = outputs.entry_size();
  const double scale = 1.0 / static_cast<double>(batch * heads);

  LossGrad out;
  out.grad.assign(batch * heads * entry, 0.0);
  out.per_sample.assign(batch, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto target = targets.sample(i);
    double acc = 0.0;
    for (std::size_t m = 0; m < heads; ++m) {
      acc += loss_term(outputs.mode(), outputs.entry(i, m), target, scale,
                       out.grad.data() + (i * heads + m) * entry);
    }
    out.per_sample[i] = acc / static_cast<double>(heads);
    out.value += out.per_sample[i];
  }
  out.value /= static_cast<double>(batch);
  return out;
}

LossGrad ensemble_loss(const HeadBatch& outputs, const PseudoLabelBatch& pseudo,
                       std::span<const double> sample_weights) {
  if (pseudo.mode != outputs.mode()) throw ModeMismatch("ensemble_loss: mode mismatch");
  if (pseudo.entry_size != outputs.entry_size() ||
      pseudo.batch_size() != outputs.batch_size()) {
    throw InvalidInput("ensemble_loss: shape mismatch");
  }
  if (sample_weights.size() != outputs.batch_size()) {
    throw InvalidInput("ensemble_loss: sample-weight length mismatch");
  }
  for (double w : sample_weights) {
    if (!(w > 0.0 && w <= 1.0)) throw InvalidInput("ensemble_loss: sample weights must lie in (0, 1]");
  }
  const std::size_t batch = outputs.batch_size();
  const std::size_t heads = outputs.head_count();
  const std::size_t entry = outputs.entry_size();
  const double scale = 1.0 / static_cast<double>(batch * heads);

  LossGrad out;
  out.grad.assign(batch * heads * entry, 0.0);
  out.per_sample.assign(batch, 0.0);
  for (std::size_t i = 0; i < batch; ++i) {
    if (!pseudo.mask[i]) continue;  // masked-out samples contribute zero
    const auto target = pseudo.sample(i);
    double acc = 0.0;
    for (std::size_t m = 0; m < heads; ++m) {
      acc += loss_term(outputs.mode(), outputs.entry(i, m), target, scale * sample_weights[i],
                       out.grad.data() + (i * heads + m) * entry);
    }
    out.per_sample[i] = sample_weights[i] * acc / static_cast<double>(heads);
    out.value += out.per_sample[i];
  }
  out.value /= static_cast<double>(batch);
  return out;
}

LossReport make_loss_report(const LossGrad& supervised, const LossGrad& ensemble,
                            double lambda_u) {
  LossReport r;
  r.supervised = supervised.value;
  r.unsupervised = ensemble.value;
  r.lambda_u = lambda_u;
  r.total = r.supervised + lambda_u * r.unsupervised;
  r.per_sample_terms = ensemble.per_sample;
  return r;
}

}  // namespace ues
