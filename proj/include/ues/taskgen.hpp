#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ues/prob.hpp"
#include "ues/rng.hpp"

namespace ues {

enum class Task { kMoons, kBlobs, kKeypoints };

std::string task_name(Task t);
Task parse_task(const std::string& name);

struct DatasetSpec {
  Task task = Task::kMoons;
  std::size_t total = 204;      // training samples, labeled + unlabeled
  std::size_t labeled = 4;
  std::size_t eval_count = 200; // held-out labeled samples, metrics only
  int mu = 7;                   // unlabeled : labeled ratio per batch
  double noise = 0.1;
  std::size_t classes = 2;      // moons fixes 2; blobs configurable
  GridShape grid = {1, 32, 32}; // keypoint task image/heatmap shape
  std::uint64_t seed = 1;

  bool is_classification() const { return task != Task::kKeypoints; }
  std::size_t feature_dim() const { return is_classification() ? 2 : grid.cells(); }
  void validate() const;
};

struct Sample {
  std::vector<double> features;       // 2-D point or H*W image, row-major
  std::size_t class_label = 0;
  std::vector<Point2D> keypoints;     // keypoint task ground truth
  bool is_labeled = false;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<Sample> train;
  std::vector<Sample> eval;
};

// Deterministic given spec.seed. Classification labeled picks are
// stratified by class so tiny labeled sets stay balanced.
Dataset generate(const DatasetSpec& spec);

// Deterministic transforms behind the random augmentations; tests drive
// these directly with identity parameters.
Sample jitter_point(const Sample& s, double dx, double dy);
Sample transform_image(const Sample& s, const GridShape& grid, double rot_deg, double scale);

Sample weak_augment(const Sample& s, const DatasetSpec& spec, Rng& rng);
Sample strong_augment(const Sample& s, const DatasetSpec& spec, Rng& rng);

struct BatchPair {
  std::vector<std::size_t> labeled;    // indices into Dataset::train
  std::vector<std::size_t> unlabeled;  // exactly mu * batch_size, cycling
};

// Shuffled epochs over the labeled set; each epoch covers every labeled
// sample exactly once. The unlabeled stream shuffles and cycles
// independently.
class BatchIterator {
 public:
  BatchIterator(const Dataset& ds, std::size_t batch_size, int mu, std::uint64_t seed);

  std::size_t batches_per_epoch() const;
  BatchPair next();

 private:
  void reshuffle_labeled();
  std::size_t next_unlabeled();

  const Dataset* ds_;
  std::size_t batch_size_;
  int mu_;
  Rng rng_;
  std::vector<std::size_t> labeled_;
  std::vector<std::size_t> unlabeled_;
  std::size_t labeled_pos_ = 0;
  std::size_t unlabeled_pos_ = 0;
};

// Point datasets as CSV; image datasets as flat little-endian f64 binary
// with a JSON sidecar describing {shape, dtype, order} plus labels.
void export_points_csv(std::span<const Sample> samples, const std::string& path);
std::vector<Sample> import_points_csv(const std::string& path);
void export_images(std::span<const Sample> samples, const GridShape& grid,
                   const std::string& base_path);
std::vector<Sample> import_images(const std::string& base_path);

}  // namespace ues
