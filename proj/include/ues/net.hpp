#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ues/uncertainty.hpp"

namespace ues {

struct NetSpec {
  Mode mode = Mode::kClassification;
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t head_count = 5;
  std::size_t class_count = 2;   // classification output width
  GridShape grid = {1, 32, 32};  // regression output shape
  std::uint64_t seed = 1;

  std::size_t output_size() const {
    return mode == Mode::kClassification ? class_count : grid.size();
  }
  void validate() const;
  // Compatibility stamp stored in checkpoints.
  std::uint64_t hash() const;
};

// Shared-trunk multi-head MLP with manual backprop and SGD-with-momentum.
// The trunk is a stack of ReLU layers; each head is an independently
// initialized linear layer (distinct sub-seeds are the diversity source).
// Classification heads emit softmax distributions, regression heads
// sigmoid grids.
class MultiHeadNet {
 public:
  explicit MultiHeadNet(const NetSpec& spec);

  const NetSpec& spec() const { return spec_; }

  double learning_rate() const { return learning_rate_; }
  void set_learning_rate(double lr);
  double momentum() const { return momentum_; }
  void set_momentum(double m);

  struct Forward {
    HeadBatch outputs;                            // post-activation predictions
    std::vector<double> input;                    // B x input_dim
    std::vector<std::vector<double>> activations; // per trunk layer, B x width
  };

  // Pure given the current parameters; safe to call concurrently.
  Forward forward(std::span<const double> inputs, std::size_t batch_size) const;

  // grad holds d(loss)/d(pre-activation head outputs), laid out like
  // Forward::outputs. Trunk parameters receive the sum of all head
  // contributions; one SGD-with-momentum step is applied.
  void backward_and_step(const Forward& cache, std::span<const double> grad);

  void save_checkpoint(std::ostream& out) const;
  std::vector<std::uint8_t> checkpoint_bytes() const;
  static MultiHeadNet load_checkpoint(std::istream& in);
  static MultiHeadNet load_checkpoint(std::span<const std::uint8_t> bytes);

  std::size_t parameter_count() const;
  // Flat parameter access in declaration order (trunk then heads, weights
  // then bias per layer); used by the gradient-check harness.
  double get_parameter(std::size_t index) const;
  void set_parameter(std::size_t index, double value);

 private:
  struct Linear {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;
  };

  MultiHeadNet() = default;

  HeadBatch make_output_batch(std::size_t batch_size) const;
  std::vector<Linear*> layers();
  std::vector<const Linear*> layers() const;

  NetSpec spec_;
  std::vector<Linear> trunk_;
  std::vector<Linear> heads_;
  std::vector<Linear> velocity_;  // momentum buffers, same shapes
  double learning_rate_ = 0.03;
  double momentum_ = 0.9;
};

}  // namespace ues
