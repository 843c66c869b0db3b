#include "ues/train_config.hpp"

#include <charconv>
#include <sstream>

#include "ues/io_util.hpp"
#include "ues/rng.hpp"

namespace ues {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError(key + ": not a non-negative integer: '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true/false: '" + value + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  if (trim(value).empty()) return out;
  std::istringstream in(value);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    out.push_back(static_cast<std::size_t>(parse_u64(key, trim(cell))));
  }
  return out;
}

}  // namespace

NetSpec TrainConfig::net_spec() const {
  NetSpec spec;
  spec.mode = mode();
  spec.input_dim = data.feature_dim();
  spec.hidden = hidden;
  spec.head_count = heads;
  spec.class_count = class_count();
  spec.grid = data.grid;
  spec.seed = mix_seed(seed, 11);
  return spec;
}

void TrainConfig::validate() const {
  data.validate();
  net_spec().validate();
  if (epochs == 0) throw ConfigError("epochs: must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size: must be >= 1");
  if (batch_size > data.labeled) throw ConfigError("batch_size: exceeds labeled count");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau: must lie in [0, 1]");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs: must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay: must lie in (0, 1)");
  if (lambda_u < 0.0) throw ConfigError("lambda_u: must be >= 0");
  if (learning_rate < 0.0) throw ConfigError("learning_rate: must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum: must lie in [0, 1)");
  if (data.eval_count == 0) throw ConfigError("eval_count: must be >= 1");
}

void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "task") cfg.data.task = parse_task(value);
  else if (key == "total") cfg.data.total = parse_u64(key, value);
  else if (key == "labeled") cfg.data.labeled = parse_u64(key, value);
  else if (key == "eval_count") cfg.data.eval_count = parse_u64(key, value);
  else if (key == "mu") cfg.data.mu = static_cast<int>(parse_u64(key, value));
  else if (key == "noise") cfg.data.noise = parse_double(key, value);
  else if (key == "classes") cfg.data.classes = parse_u64(key, value);
  else if (key == "keypoints") cfg.data.grid.keypoints = parse_u64(key, value);
  else if (key == "grid_height") cfg.data.grid.height = parse_u64(key, value);
  else if (key == "grid_width") cfg.data.grid.width = parse_u64(key, value);
  else if (key == "hidden") cfg.hidden = parse_size_list(key, value);
  else if (key == "heads") cfg.heads = parse_u64(key, value);
  else if (key == "epochs") cfg.epochs = parse_u64(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_u64(key, value);
  else if (key == "tau") cfg.tau = parse_double(key, value);
  else if (key == "warmup_epochs") cfg.warmup_epochs = static_cast<int>(parse_u64(key, value));
  else if (key == "normalize_ensemble") cfg.normalize_ensemble = parse_bool(key, value);
  else if (key == "ensemble_hard_labels") cfg.ensemble_hard_labels = parse_bool(key, value);
  else if (key == "ema_decay") cfg.ema_decay = parse_double(key, value);
  else if (key == "lambda_u") cfg.lambda_u = parse_double(key, value);
  else if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
  else if (key == "momentum") cfg.momentum = parse_double(key, value);
  else if (key == "use_sample_weights") cfg.use_sample_weights = parse_bool(key, value);
  else if (key == "use_head_weights") cfg.use_head_weights = parse_bool(key, value);
  else if (key == "eval_weighted") cfg.eval_weighted = parse_bool(key, value);
  else if (key == "supervised_only") cfg.supervised_only = parse_bool(key, value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "out_dir") cfg.out_dir = value;
  else throw ConfigError("unknown config key: " + key);
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_file_text(path));
}

std::vector<std::pair<std::string, std::string>> config_key_table() {
  const TrainConfig d;
  std::string hidden;
  for (std::size_t i = 0; i < d.hidden.size(); ++i) {
    hidden += (i ? "," : "") + std::to_string(d.hidden[i]);
  }
  return {
      {"task", task_name(d.data.task)},
      {"total", std::to_string(d.data.total)},
      {"labeled", std::to_string(d.data.labeled)},
      {"eval_count", std::to_string(d.data.eval_count)},
      {"mu", std::to_string(d.data.mu)},
      {"noise", format_double(d.data.noise)},
      {"classes", std::to_string(d.data.classes)},
      {"keypoints", std::to_string(d.data.grid.keypoints)},
      {"grid_height", std::to_string(d.data.grid.height)},
      {"grid_width", std::to_string(d.data.grid.width)},
      {"hidden", hidden},
      {"heads", std::to_string(d.heads)},
      {"epochs", std::to_string(d.epochs)},
      {"batch_size", std::to_string(d.batch_size)},
      {"tau", format_double(d.tau)},
      {"warmup_epochs", std::to_string(d.warmup_epochs)},
      {"normalize_ensemble", d.normalize_ensemble ? "true" : "false"},
      {"ensemble_hard_labels", d.ensemble_hard_labels ? "true" : "false"},
      {"ema_decay", format_double(d.ema_decay)},
      {"lambda_u", format_double(d.lambda_u)},
      {"learning_rate", format_double(d.learning_rate)},
      {"momentum", format_double(d.momentum)},
      {"use_sample_weights", d.use_sample_weights ? "true" : "false"},
      {"use_head_weights", d.use_head_weights ? "true" : "false"},
      {"eval_weighted", d.eval_weighted ? "true" : "false"},
      {"supervised_only", d.supervised_only ? "true" : "false"},
      {"seed", std::to_string(d.seed)},
      {"out_dir", ""},
  };
}

nlohmann::ordered_json config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["task"] = task_name(cfg.data.task);
  j["total"] = cfg.data.total;
  j["labeled"] = cfg.data.labeled;
  j["eval_count"] = cfg.data.eval_count;
  j["mu"] = cfg.data.mu;
  j["noise"] = cfg.data.noise;
  j["classes"] = cfg.data.classes;
  j["keypoints"] = cfg.data.grid.keypoints;
  j["grid_height"] = cfg.data.grid.height;
  j["grid_width"] = cfg.data.grid.width;
  j["hidden"] = cfg.hidden;
  j["heads"] = cfg.heads;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["tau"] = cfg.tau;
  j["warmup_epochs"] = cfg.warmup_epochs;
  j["normalize_ensemble"] = cfg.normalize_ensemble;
  j["ensemble_hard_labels"] = cfg.ensemble_hard_labels;
  j["ema_decay"] = cfg.ema_decay;
  j["lambda_u"] = cfg.lambda_u;
  j["learning_rate"] = cfg.learning_rate;
  j["momentum"] = cfg.momentum;
  j["use_sample_weights"] = cfg.use_sample_weights;
  j["use_head_weights"] = cfg.use_head_weights;
  j["eval_weighted"] = cfg.eval_weighted;
  j["supervised_only"] = cfg.supervised_only;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  return j;
}

}  // namespace ues
