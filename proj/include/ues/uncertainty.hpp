#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ues/prob.hpp"

namespace ues {

enum class Mode { kClassification, kRegression };

std::string mode_name(Mode m);

// Predictions of M heads over a batch of B samples, stored as one flat
// B x M x entry_size tensor. Classification entries are class
// distributions; regression entries are flattened keypoint grids.
class HeadBatch {
 public:
  static HeadBatch classification(std::size_t batch, std::size_t heads, std::size_t classes);
  static HeadBatch regression(std::size_t batch, std::size_t heads, GridShape grid);

  Mode mode() const { return mode_; }
  std::size_t batch_size() const { return batch_; }
  std::size_t head_count() const { return heads_; }
  std::size_t entry_size() const { return entry_; }
  const GridShape& grid() const { return grid_; }
  std::size_t class_count() const { return entry_; }

  std::span<double> entry(std::size_t sample, std::size_t head) {
    return std::span<double>(values_).subspan((sample * heads_ + head) * entry_, entry_);
  }
  std::span<const double> entry(std::size_t sample, std::size_t head) const {
    return std::span<const double>(values_).subspan((sample * heads_ + head) * entry_, entry_);
  }

  std::span<double> flat() { return values_; }
  std::span<const double> flat() const { return values_; }

  // Copy of rows [begin, end); same heads and entry shape.
  HeadBatch rows(std::size_t begin, std::size_t end) const;

 private:
  HeadBatch(Mode mode, std::size_t batch, std::size_t heads, std::size_t entry, GridShape grid);

  Mode mode_;
  std::size_t batch_;
  std::size_t heads_;
  std::size_t entry_;
  GridShape grid_;
  std::vector<double> values_;
};

// Per-sample uncertainty u^S and its long-tailed weight w^S.
struct SampleUtility {
  std::vector<double> uncertainties;
  std::vector<double> weights;  // each in [0.5, 1.0]
};

// Per-head uncertainty, its softmax weight, and the EMA-smoothed weight
// actually used for ensembling. One logical owner mutates this.
struct HeadWeightState {
  std::vector<double> raw_uncertainty;
  std::vector<double> instant_weights;
  std::vector<double> ema_weights;
  double decay = 0.7;

  static HeadWeightState uniform(std::size_t heads, double decay = 0.7);
};

// p~_i = (1/M) sum_m p_(i,m), element-wise. Layout B x entry_size.
std::vector<double> mean_reference(const HeadBatch& batch);

// Per-sample mean over heads of the MSE to the mean reference.
std::vector<double> sample_uncertainty_regression(const HeadBatch& batch);

// Per-sample mean over classes of the across-head population variance.
std::vector<double> sample_uncertainty_classification(const HeadBatch& batch);

// Dispatch on batch mode.
std::vector<double> sample_uncertainty(const HeadBatch& batch);

// w_i = 1 / (u_i / max_u + 1). All weights are 1.0 when the batch max is
// below 1e-12. Output always lies in [0.5, 1.0].
std::vector<double> long_tailed_weights(std::span<const double> uncertainties);

SampleUtility sample_utility(const HeadBatch& batch);

// u^H_m = (1/B) sum_i MSE(p_(i,m), p~_i).
std::vector<double> head_uncertainty_regression(const HeadBatch& batch);

// u^H_m = fraction of samples whose argmax disagrees with the reference argmax.
std::vector<double> head_uncertainty_classification(const HeadBatch& batch);

std::vector<double> head_uncertainty(const HeadBatch& batch);

// Regression: softmax(-u). Classification: softmax(M - u). The two agree
// for equal u by shift invariance.
std::vector<double> head_weights(std::span<const double> uncertainty, Mode mode);

// ema <- decay * ema + (1 - decay) * instant, renormalized to sum 1.
void ema_update(HeadWeightState& state, std::span<const double> instant);

// Convenience: fills raw_uncertainty, instant_weights and smooths in one go.
void update_head_state(HeadWeightState& state, const HeadBatch& batch);

}  // namespace ues
