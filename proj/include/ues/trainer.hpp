#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ues/loss.hpp"
#include "ues/metrics.hpp"
#include "ues/net.hpp"
#include "ues/train_config.hpp"

namespace ues {

struct EpochRecord {
  std::size_t epoch = 0;
  double loss_supervised = 0.0;
  double loss_ensemble = 0.0;
  double mask_rate = 0.0;
  double mean_sample_uncertainty = 0.0;
  std::optional<double> uncertainty_correlation;  // absent when undefined
  std::vector<double> head_weights;               // EMA snapshot in use
  // Task metric on the held-out eval set.
  double error_rate = 0.0;                        // classification
  double pose_mse = 0.0;                          // regression, mean point error
  double pose_pck = 0.0;                          // regression, PCK@0.2
  // Sample uncertainties of the epoch's last unlabeled batch (the
  // distribution snapshot the diagnostics plots are built from).
  std::vector<double> sample_uncertainties;
};

struct RunReport {
  std::string name = "ues";
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  bool diverged = false;
  std::vector<std::uint8_t> checkpoint;  // final, or last good on divergence
  double final_metric = 0.0;             // accuracy (classification) or PCK@0.2
};

struct EvalMetrics {
  Mode mode = Mode::kClassification;
  double error_rate = 0.0;
  double mse = 0.0;
  // PCK at the reporting thresholds, column order 0.5, 0.3, 0.2, 0.1.
  std::vector<std::pair<double, double>> pck_at;
};

// Supervision targets: one-hot rows or unit-peak gaussian heatmaps
// (sigma 1.5 px) rendered at the ground-truth keypoints.
TargetBatch targets_for(std::span<const Sample> samples, Mode mode, std::size_t class_count,
                        const GridShape& grid);

// Uniform mean-ensemble evaluation; pass EMA weights for the weighted
// variant.
EvalMetrics evaluate_model(const MultiHeadNet& net, std::span<const Sample> eval_set,
                           std::span<const double> head_weights = {});

// Runs the full semi-supervised loop: supervised pass on labeled weak
// views; on unlabeled data, head uncertainties -> EMA-smoothed head
// weights -> thresholded weighted ensemble pseudo-labels from weak views
// -> sample uncertainties -> long-tailed weights -> weighted ensemble
// loss on strong views. Writes report.json / metrics.csv / checkpoint.bin
// under cfg.out_dir when set.
RunReport train(const TrainConfig& cfg);

// The ablation rows as one command: neither / SW / SW+PHW, sharing the
// run seed. Artifacts land in per-variant subdirectories plus one
// combined report.json.
std::vector<RunReport> run_ablation(const TrainConfig& base);

std::string report_to_json(std::span<const RunReport> runs);
std::string metrics_to_csv(const RunReport& run);
void write_run_artifacts(std::span<const RunReport> runs, const std::string& out_dir);

}  // namespace ues
