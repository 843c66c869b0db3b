#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "ues/prob.hpp"
#include "ues/rng.hpp"

using namespace ues;

TEST_CASE("softmax basics") {
  const auto even = softmax(std::vector<double>{0.0, 0.0});
  CHECK(even.values[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(even.values[1] == doctest::Approx(0.5).epsilon(1e-12));

  const auto a = softmax(std::vector<double>{1.0, 2.0});
  const auto b = softmax(std::vector<double>{101.0, 102.0});
  CHECK(a.values[0] == doctest::Approx(b.values[0]).epsilon(1e-15));
  CHECK(a.values[1] == doctest::Approx(b.values[1]).epsilon(1e-15));

  const auto forced = softmax(std::vector<double>{0.0, std::log(3.0)});
  CHECK(forced.values[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(forced.values[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("softmax rejects bad input") {
  CHECK_THROWS_AS(softmax(std::vector<double>{}), InvalidInput);
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, std::nan("")}), InvalidInput);
  CHECK_THROWS_AS(softmax(std::vector<double>{1.0, INFINITY}), InvalidInput);
}

TEST_CASE("softmax properties: normalization and shift invariance") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(12);
    std::vector<double> logits(n);
    for (auto& v : logits) v = rng.uniform(-30.0, 30.0);
    const auto p = softmax(logits);
    double sum = 0.0;
    for (double v : p.values) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

    const double c = rng.uniform(-50.0, 50.0);
    auto shifted = logits;
    for (auto& v : shifted) v += c;
    const auto q = softmax(shifted);
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(std::abs(p.values[j] - q.values[j]) < 1e-12);
    }
  }
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 0.0}) ==
        doctest::Approx(0.0).epsilon(1e-11));
  CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Hand evaluation: 0.5*ln 4 + 0.5*ln(4/3), cross-checked with the oracle.
  const std::vector<double> pred{0.25, 0.75};
  const std::vector<double> target{0.5, 0.5};
  const double expected = 0.5 * std::log(4.0) + 0.5 * std::log(4.0 / 3.0);
  CHECK(cross_entropy(pred, target) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(cross_entropy(pred, target) == doctest::Approx(oracle::cross_entropy(pred, target)));

  CHECK_THROWS_AS(cross_entropy(std::vector<double>{1.0}, std::vector<double>{1.0, 0.0}),
                  InvalidInput);
}

TEST_CASE("cross entropy against one-hot equals -log p") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(9);
    std::vector<double> logits(n);
    for (auto& v : logits) v = rng.uniform(-5.0, 5.0);
    const auto p = softmax(logits);
    const std::size_t hot = rng.uniform_index(n);
    std::vector<double> onehot(n, 0.0);
    onehot[hot] = 1.0;
    CHECK(std::abs(cross_entropy(p.values, onehot) + std::log(p.values[hot])) < 1e-12);
  }
}

TEST_CASE("mse") {
  CHECK(mse(std::vector<double>{0.3, 0.7}, std::vector<double>{0.3, 0.7}) == 0.0);
  CHECK(mse(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), InvalidInput);

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(32);
    std::vector<double> a(n), b(n);
    for (std::size_t j = 0; j < n; ++j) {
      a[j] = rng.uniform(-2.0, 2.0);
      b[j] = rng.uniform(-2.0, 2.0);
    }
    CHECK(std::abs(mse(a, b) - oracle::mse(a, b)) < 1e-12);
    CHECK(mse(a, b) == mse(b, a));  // symmetry
  }
}

TEST_CASE("argmax tie-breaking and scale invariance") {
  CHECK(argmax_index(std::vector<double>{0.1, 0.7, 0.2}) == 1);
  CHECK(argmax_index(std::vector<double>{0.5, 0.5}) == 0);
  for (std::size_t j = 0; j < 6; ++j) {
    std::vector<double> onehot(6, 0.0);
    onehot[j] = 1.0;
    CHECK(argmax_index(onehot) == j);
  }
  CHECK_THROWS_AS(argmax_index(std::vector<double>{}), InvalidInput);

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(3 + rng.uniform_index(8));
    for (auto& x : v) x = rng.uniform();
    const double scale = rng.uniform(0.1, 10.0);
    auto scaled = v;
    for (auto& x : scaled) x *= scale;
    CHECK(argmax_index(v) == argmax_index(scaled));
  }
}

TEST_CASE("heatmap peak") {
  GridShape shape{1, 24, 20};
  Heatmap h{shape, std::vector<double>(shape.size(), 0.0)};
  for (std::size_t r = 0; r < shape.height; ++r) {
    for (std::size_t c = 0; c < shape.width; ++c) {
      const double dx = static_cast<double>(c) - 10.0;
      const double dy = static_cast<double>(r) - 12.0;
      h.values[r * shape.width + c] = std::exp(-(dx * dx + dy * dy) / 8.0);
    }
  }
  const auto peak = heatmap_peak(h, 0);
  CHECK(peak.x == 10.0);
  CHECK(peak.y == 12.0);

  Heatmap uniform{GridShape{1, 4, 4}, std::vector<double>(16, 0.25)};
  const auto flat = heatmap_peak(uniform, 0);
  CHECK(flat.x == 0.0);
  CHECK(flat.y == 0.0);

  Heatmap two{GridShape{1, 8, 8}, std::vector<double>(64, 0.0)};
  two.values[3 * 8 + 3] = 1.0;
  two.values[5 * 8 + 5] = 1.0;
  const auto first = heatmap_peak(two, 0);
  CHECK(first.x == 3.0);
  CHECK(first.y == 3.0);

  CHECK_THROWS_AS(heatmap_peak(two, 1), InvalidInput);
}
