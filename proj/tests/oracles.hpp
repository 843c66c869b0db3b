// Naive scalar-loop oracles. These reimplement every formula the engine
// vectorizes, in the most literal way possible, and stay independent of
// the library code paths they are used to check.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ues/rng.hpp"
#include "ues/uncertainty.hpp"

namespace oracle {

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
  return acc / static_cast<double>(a.size());
}

inline double cross_entropy(const std::vector<double>& pred, const std::vector<double>& target) {
  double acc = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    acc -= target[j] * std::log(pred[j] < 1e-12 ? 1e-12 : pred[j]);
  }
  return acc;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  double peak = logits[0];
  for (double v : logits) peak = v > peak ? v : peak;
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - peak);
    sum += out[j];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = j;
  }
  return best;
}

// Plain nested-index views of a B x M x E batch.
struct Batch {
  std::size_t samples = 0;
  std::size_t heads = 0;
  std::size_t entry = 0;
  std::vector<std::vector<std::vector<double>>> p;  // [i][m][j]
};

inline Batch unpack(const ues::HeadBatch& hb) {
  Batch b{hb.batch_size(), hb.head_count(), hb.entry_size(), {}};
  b.p.resize(b.samples);
  for (std::size_t i = 0; i < b.samples; ++i) {
    b.p[i].resize(b.heads);
    for (std::size_t m = 0; m < b.heads; ++m) {
      const auto e = hb.entry(i, m);
      b.p[i][m].assign(e.begin(), e.end());
    }
  }
  return b;
}

inline std::vector<std::vector<double>> mean_reference(const Batch& b) {
  std::vector<std::vector<double>> ref(b.samples, std::vector<double>(b.entry, 0.0));
  for (std::size_t i = 0; i < b.samples; ++i) {
    for (std::size_t j = 0; j < b.entry; ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < b.heads; ++m) acc += b.p[i][m][j];
      ref[i][j] = acc / static_cast<double>(b.heads);
    }
  }
  return ref;
}

inline std::vector<double> sample_uncertainty_regression(const Batch& b) {
  const auto ref = mean_reference(b);
  std::vector<double> u(b.samples, 0.0);
  for (std::size_t i = 0; i < b.samples; ++i) {
    for (std::size_t m = 0; m < b.heads; ++m) u[i] += mse(b.p[i][m], ref[i]);
    u[i] /= static_cast<double>(b.heads);
  }
  return u;
}

inline std::vector<double> sample_uncertainty_classification(const Batch& b) {
  std::vector<double> u(b.samples, 0.0);
  for (std::size_t i = 0; i < b.samples; ++i) {
    double var_sum = 0.0;
    for (std::size_t j = 0; j < b.entry; ++j) {
      double mean = 0.0;
      for (std::size_t m = 0; m < b.heads; ++m) mean += b.p[i][m][j];
      mean /= static_cast<double>(b.heads);
      double var = 0.0;
      for (std::size_t m = 0; m < b.heads; ++m) {
        var += (mean - b.p[i][m][j]) * (mean - b.p[i][m][j]);
      }
      var_sum += var / static_cast<double>(b.heads);
    }
    u[i] = var_sum / static_cast<double>(b.entry);
  }
  return u;
}

inline std::vector<double> long_tailed_weights(const std::vector<double>& u) {
  double max_u = 0.0;
  for (double v : u) max_u = v > max_u ? v : max_u;
  std::vector<double> w(u.size(), 1.0);
  if (max_u < 1e-12) return w;
  for (std::size_t i = 0; i < u.size(); ++i) w[i] = 1.0 / (u[i] / max_u + 1.0);
  return w;
}

inline std::vector<double> head_uncertainty_regression(const Batch& b) {
  const auto ref = mean_reference(b);
  std::vector<double> u(b.heads, 0.0);
  for (std::size_t m = 0; m < b.heads; ++m) {
    for (std::size_t i = 0; i < b.samples; ++i) u[m] += mse(b.p[i][m], ref[i]);
    u[m] /= static_cast<double>(b.samples);
  }
  return u;
}

inline std::vector<double> head_uncertainty_classification(const Batch& b) {
  const auto ref = mean_reference(b);
  std::vector<double> u(b.heads, 0.0);
  for (std::size_t m = 0; m < b.heads; ++m) {
    std::size_t misaligned = 0;
    for (std::size_t i = 0; i < b.samples; ++i) {
      if (argmax(b.p[i][m]) != argmax(ref[i])) ++misaligned;
    }
    u[m] = static_cast<double>(misaligned) / static_cast<double>(b.samples);
  }
  return u;
}

// Literal thresholded weighted ensemble, one sample at a time.
inline std::vector<std::vector<double>> ensemble(const Batch& b, const std::vector<double>& w,
                                                 double tau) {
  std::vector<std::vector<double>> out(b.samples, std::vector<double>(b.entry, 0.0));
  for (std::size_t i = 0; i < b.samples; ++i) {
    for (std::size_t m = 0; m < b.heads; ++m) {
      double peak = 0.0;
      for (std::size_t j = 0; j < b.entry; ++j) {
        const double c = w[m] * (b.p[i][m][j] < 1e-12 ? 1e-12 : b.p[i][m][j]);
        peak = c > peak ? c : peak;
      }
      if (!(peak > tau)) continue;
      for (std::size_t j = 0; j < b.entry; ++j) {
        out[i][j] += w[m] * b.p[i][m][j] / static_cast<double>(b.heads);
      }
    }
  }
  return out;
}

// Random batches for the formula-oracle suites.
inline ues::HeadBatch random_classification_batch(ues::Rng& rng, std::size_t max_b = 16,
                                                  std::size_t max_m = 8, std::size_t max_c = 10) {
  const std::size_t b = 1 + rng.uniform_index(max_b);
  const std::size_t m = 2 + rng.uniform_index(max_m - 1);
  const std::size_t c = 2 + rng.uniform_index(max_c - 1);
  auto batch = ues::HeadBatch::classification(b, m, c);
  std::vector<double> logits(c);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t h = 0; h < m; ++h) {
      for (auto& l : logits) l = rng.uniform(-4.0, 4.0);
      const auto probs = softmax(logits);
      std::copy(probs.begin(), probs.end(), batch.entry(i, h).begin());
    }
  }
  return batch;
}

inline ues::HeadBatch random_regression_batch(ues::Rng& rng, std::size_t max_b = 16,
                                              std::size_t max_m = 8, std::size_t max_hw = 8) {
  const std::size_t b = 1 + rng.uniform_index(max_b);
  const std::size_t m = 2 + rng.uniform_index(max_m - 1);
  const ues::GridShape grid{1 + rng.uniform_index(2), 1 + rng.uniform_index(max_hw),
                            1 + rng.uniform_index(max_hw)};
  auto batch = ues::HeadBatch::regression(b, m, grid);
  for (double& v : batch.flat()) v = rng.uniform();
  return batch;
}

}  // namespace oracle
