#include "ues/uncertainty.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace ues {

namespace {

constexpr double kMaxUncertaintyFloor = 1e-12;

void require_mode(const HeadBatch& batch, Mode wanted, const char* op) {
  if (batch.mode() != wanted) {
    throw ModeMismatch(std::string(op) + ": expected " + mode_name(wanted) + " batch, got " +
                       mode_name(batch.mode()));
  }
}

}  // namespace

std::string mode_name(Mode m) {
  return m == Mode::kClassification ? "classification" : "regression";
}

HeadBatch::HeadBatch(Mode mode, std::size_t batch, std::size_t heads, std::size_t entry,
                     GridShape grid)
    : mode_(mode), batch_(batch), heads_(heads), entry_(entry), grid_(grid) {
  if (heads_ < 2) throw InvalidInput("HeadBatch: M >= 2 required");
  if (batch_ == 0) throw InvalidInput("HeadBatch: empty batch");
  if (entry_ == 0) throw InvalidInput("HeadBatch: empty entries");
  values_.assign(batch_ * heads_ * entry_, 0.0);
}

HeadBatch HeadBatch::classification(std::size_t batch, std::size_t heads, std::size_t classes) {
  return HeadBatch(Mode::kClassification, batch, heads, classes, GridShape{1, 1, classes});
}

HeadBatch HeadBatch::regression(std::size_t batch, std::size_t heads, GridShape grid) {
  return HeadBatch(Mode::kRegression, batch, heads, grid.size(), grid);
}

HeadBatch HeadBatch::rows(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > batch_) throw InvalidInput("HeadBatch::rows: bad range");
  HeadBatch out(mode_, end - begin, heads_, entry_, grid_);
  const std::size_t row = heads_ * entry_;
  std::copy(values_.begin() + begin * row, values_.begin() + end * row, out.values_.begin());
  return out;
}

HeadWeightState HeadWeightState::uniform(std::size_t heads, double decay) {
  if (heads < 2) throw InvalidInput("HeadWeightState: M >= 2 required");
  HeadWeightState s;
  s.raw_uncertainty.assign(heads, 0.0);
  s.instant_weights.assign(heads, 1.0 / static_cast<double>(heads));
  s.ema_weights.assign(heads, 1.0 / static_cast<double>(heads));
  s.decay = decay;
  return s;
}

std::vector<double> mean_reference(const HeadBatch& batch) {
  const std::size_t entry = batch.entry_size();
  const double inv_m = 1.0 / static_cast<double>(batch.head_count());
  std::vector<double> ref(batch.batch_size() * entry, 0.0);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    double* out = ref.data() + i * entry;
    for (std::size_t m = 0; m < batch.head_count(); ++m) {
      const auto p = batch.entry(i, m);
      for (std::size_t j = 0; j < entry; ++j) out[j] += p[j];
    }
    for (std::size_t j = 0; j < entry; ++j) out[j] *= inv_m;
  }
  return ref;
}

std::vector<double> sample_uncertainty_regression(const HeadBatch& batch) {
  require_mode(batch, Mode::kRegression, "sample_uncertainty_regression");
  const auto ref = mean_reference(batch);
  const std::size_t entry = batch.entry_size();
  std::vector<double> u(batch.batch_size(), 0.0);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const std::span<const double> r(ref.data() + i * entry, entry);
    double acc = 0.0;
    for (std::size_t m = 0; m < batch.head_count(); ++m) {
      acc += mse(batch.entry(i, m), r);
    }
    u[i] = acc / static_cast<double>(batch.head_count());
  }
  return u;
}

std::vector<double> sample_uncertainty_classification(const HeadBatch& batch) {
  require_mode(batch, Mode::kClassification, "sample_uncertainty_classification");
  const auto ref = mean_reference(batch);
  const std::size_t classes = batch.entry_size();
  const double inv_m = 1.0 / static_cast<double>(batch.head_count());
  std::vector<double> u(batch.batch_size(), 0.0);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const double* mean = ref.data() + i * classes;
    double acc = 0.0;  // sum over classes of the population variance
    for (std::size_t m = 0; m < batch.head_count(); ++m) {
      const auto p = batch.entry(i, m);
      for (std::size_t j = 0; j < classes; ++j) {
        const double d = mean[j] - p[j];
        acc += d * d;
      }
    }
    u[i] = acc * inv_m / static_cast<double>(classes);
  }
  return u;
}

std::vector<double> sample_uncertainty(const HeadBatch& batch) {
  return batch.mode() == Mode::kRegression ? sample_uncertainty_regression(batch)
                                           : sample_uncertainty_classification(batch);
}

std::vector<double> long_tailed_weights(std::span<const double> uncertainties) {
  double max_u = 0.0;
  for (double u : uncertainties) {
    if (u < 0.0) throw InvalidInput("long_tailed_weights: negative uncertainty");
    if (!std::isfinite(u)) throw InvalidInput("long_tailed_weights: non-finite uncertainty");
    max_u = std::max(max_u, u);
  }
  std::vector<double> w(uncertainties.size(), 1.0);
  if (max_u < kMaxUncertaintyFloor) return w;  // dispersion-free batch
  for (std::size_t i = 0; i < uncertainties.size(); ++i) {
    w[i] = 1.0 / (uncertainties[i] / max_u + 1.0);
  }
  return w;
}

SampleUtility sample_utility(const HeadBatch& batch) {
  SampleUtility out;
  out.uncertainties = sample_uncertainty(batch);
  out.weights = long_tailed_weights(out.uncertainties);
  return out;
}

std::vector<double> head_uncertainty_regression(const HeadBatch& batch) {
  require_mode(batch, Mode::kRegression, "head_uncertainty_regression");
  const auto ref = mean_reference(batch);
  const std::size_t entry = batch.entry_size();
  std::vector<double> u(batch.head_count(), 0.0);
  for (std::size_t m = 0; m < batch.head_count(); ++m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < batch.batch_size(); ++i) {
      acc += mse(batch.entry(i, m), std::span<const double>(ref.data() + i * entry, entry));
    }
    u[m] = acc / static_cast<double>(batch.batch_size());
  }
  return u;
}

std::vector<double> head_uncertainty_classification(const HeadBatch& batch) {
  require_mode(batch, Mode::kClassification, "head_uncertainty_classification");
  const auto ref = mean_reference(batch);
  const std::size_t classes = batch.entry_size();
  std::vector<double> u(batch.head_count(), 0.0);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const std::size_t ref_class =
        argmax_index(std::span<const double>(ref.data() + i * classes, classes));
    for (std::size_t m = 0; m < batch.head_count(); ++m) {
      if (argmax_index(batch.entry(i, m)) != ref_class) u[m] += 1.0;
    }
  }
  for (double& v : u) v /= static_cast<double>(batch.batch_size());
  return u;
}

std::vector<double> head_uncertainty(const HeadBatch& batch) {
  return batch.mode() == Mode::kRegression ? head_uncertainty_regression(batch)
                                           : head_uncertainty_classification(batch);
}

std::vector<double> head_weights(std::span<const double> uncertainty, Mode mode) {
  if (uncertainty.size() < 2) throw InvalidInput("head_weights: M >= 2 required");
  std::vector<double> logits(uncertainty.size());
  const double m = static_cast<double>(uncertainty.size());
  for (std::size_t k = 0; k < uncertainty.size(); ++k) {
    logits[k] = mode == Mode::kRegression ? -uncertainty[k] : m - uncertainty[k];
  }
  return softmax(logits).values;
}

void ema_update(HeadWeightState& state, std::span<const double> instant) {
  if (!(state.decay > 0.0 && state.decay < 1.0)) {
    throw ConfigError("ema_update: decay must lie in (0, 1)");
  }
  if (instant.size() != state.ema_weights.size()) {
    throw InvalidInput("ema_update: weight-vector length mismatch");
  }
  double sum = std::accumulate(instant.begin(), instant.end(), 0.0);
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InvalidInput("ema_update: instant weights must sum to 1");
  }
  sum = 0.0;
  for (std::size_t m = 0; m < instant.size(); ++m) {
    state.ema_weights[m] = state.decay * state.ema_weights[m] + (1.0 - state.decay) * instant[m];
    sum += state.ema_weights[m];
  }
  for (double& w : state.ema_weights) w /= sum;
}

void update_head_state(HeadWeightState& state, const HeadBatch& batch) {
  state.raw_uncertainty = head_uncertainty(batch);
  state.instant_weights = head_weights(state.raw_uncertainty, batch.mode());
  ema_update(state, state.instant_weights);
}

}  // namespace ues
