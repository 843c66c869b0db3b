#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ues/net.hpp"
#include "ues/taskgen.hpp"

namespace ues {

// One run's knobs. A single seed drives every stream (data, init,
// batching, augmentation) through fixed sub-seed derivations, so a run is
// reproducible from (config, seed) alone.
struct TrainConfig {
  DatasetSpec data;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t heads = 5;
  std::size_t epochs = 60;
  std::size_t batch_size = 4;  // labeled batch size N_B
  double tau = 0.90;
  int warmup_epochs = 5;
  bool normalize_ensemble = false;
  bool ensemble_hard_labels = false;
  double ema_decay = 0.7;
  double lambda_u = 1.0;
  double learning_rate = 0.0;  // 0 = task-mode default
  double momentum = 0.9;
  bool use_sample_weights = true;
  bool use_head_weights = true;
  bool eval_weighted = false;    // evaluate with EMA head weights instead of uniform mean
  bool supervised_only = false;  // skip the unlabeled pass entirely
  std::uint64_t seed = 1;
  std::string out_dir;

  Mode mode() const { return data.is_classification() ? Mode::kClassification : Mode::kRegression; }
  std::size_t class_count() const { return data.task == Task::kMoons ? 2 : data.classes; }
  NetSpec net_spec() const;
  void validate() const;
};

// Flat key-value config files: one `key = value` per line, `#` comments.
// Unknown keys and bad values raise ConfigError naming the key.
TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config_file(const std::string& path);
void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value);

// All recognized keys with their defaults, for --help and the README.
std::vector<std::pair<std::string, std::string>> config_key_table();

nlohmann::ordered_json config_to_json(const TrainConfig& cfg);

}  // namespace ues
