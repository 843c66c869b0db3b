// Command-line surface: train / eval / score / plot.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ues/io_util.hpp"
#include "ues/scoring.hpp"
#include "ues/trainer.hpp"

namespace {

using ues::TrainConfig;

// Seed precedence: CLI flag > UES_SEED env var > config file.
void apply_seed_overrides(TrainConfig& cfg, const std::optional<std::uint64_t>& flag_seed) {
  if (const char* env = std::getenv("UES_SEED")) {
    ues::apply_config_key(cfg, "seed", env);
  }
  if (flag_seed) cfg.seed = *flag_seed;
}

ues::GridShape parse_shape(const std::string& text) {
  ues::GridShape g;
  if (std::sscanf(text.c_str(), "%zux%zux%zu", &g.keypoints, &g.height, &g.width) != 3 ||
      g.keypoints == 0 || g.height == 0 || g.width == 0) {
    throw ues::ConfigError("shape: expected KxHxW, got '" + text + "'");
  }
  return g;
}

int cmd_train(const std::string& config_path, const std::optional<std::uint64_t>& seed,
              const std::optional<std::size_t>& epochs, const std::optional<double>& tau,
              const std::string& out_dir, bool no_sample_weights, bool no_head_weights,
              bool supervised_only, bool ablation, const std::string& export_base, bool quiet) {
  TrainConfig cfg = ues::parse_config_file(config_path);
  apply_seed_overrides(cfg, seed);
  if (epochs) cfg.epochs = *epochs;
  if (tau) cfg.tau = *tau;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  if (no_sample_weights) cfg.use_sample_weights = false;
  if (no_head_weights) cfg.use_head_weights = false;
  if (supervised_only) cfg.supervised_only = true;
  cfg.validate();

  if (!export_base.empty()) {
    ues::DatasetSpec dspec = cfg.data;
    dspec.seed = ues::mix_seed(cfg.seed, 21);
    const ues::Dataset ds = ues::generate(dspec);
    if (dspec.is_classification()) {
      ues::export_points_csv(ds.train, export_base + "_train.csv");
      ues::export_points_csv(ds.eval, export_base + "_eval.csv");
    } else {
      ues::export_images(ds.train, dspec.grid, export_base + "_train");
      ues::export_images(ds.eval, dspec.grid, export_base + "_eval");
    }
  }

  const auto describe = [&](const ues::RunReport& r) {
    if (quiet) return;
    std::cout << r.name << ": ";
    if (r.diverged) {
      std::cout << "diverged after " << r.epochs.size() << " epochs";
    } else if (cfg.mode() == ues::Mode::kClassification) {
      std::cout << "final error_rate "
                << ues::format_double(r.epochs.empty() ? 1.0 : r.epochs.back().error_rate);
    } else {
      std::cout << "final mse "
                << ues::format_double(r.epochs.empty() ? 0.0 : r.epochs.back().pose_mse)
                << ", pck@0.2 " << ues::format_double(r.final_metric);
    }
    std::cout << '\n';
  };

  bool diverged = false;
  if (ablation) {
    for (const auto& r : ues::run_ablation(cfg)) {
      describe(r);
      diverged = diverged || r.diverged;
    }
  } else {
    const ues::RunReport r = ues::train(cfg);
    describe(r);
    diverged = r.diverged;
  }
  if (!cfg.out_dir.empty() && !quiet) std::cout << "artifacts: " << cfg.out_dir << '\n';
  if (diverged) {
    std::cerr << "error: training diverged; last good checkpoint retained\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path,
             const std::optional<std::uint64_t>& seed, bool weighted,
             const std::string& csv_path) {
  TrainConfig cfg = ues::parse_config_file(config_path);
  apply_seed_overrides(cfg, seed);

  std::ifstream in(checkpoint_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open checkpoint " << checkpoint_path << '\n';
    return 1;
  }
  const ues::MultiHeadNet net = ues::MultiHeadNet::load_checkpoint(in);

  ues::NetSpec expected = cfg.net_spec();
  expected.seed = net.spec().seed;  // seeds do not affect compatibility
  if (expected.hash() != net.spec().hash()) {
    std::cerr << "error: checkpoint spec hash mismatch (checkpoint "
              << net.spec().hash() << ", config " << expected.hash() << ")\n";
    return 2;
  }

  ues::DatasetSpec dspec = cfg.data;
  dspec.seed = ues::mix_seed(cfg.seed, 21);
  const ues::Dataset ds = ues::generate(dspec);

  // eval_weighted needs smoothed head weights, which live in the training
  // run, not the checkpoint; uniform is the reporting default anyway.
  (void)weighted;
  const ues::EvalMetrics m = ues::evaluate_model(net, ds.eval);

  std::ostringstream csv;
  if (m.mode == ues::Mode::kClassification) {
    std::cout << "error_rate " << ues::format_double(m.error_rate) << '\n';
    csv << "error_rate\n" << ues::format_double(m.error_rate) << '\n';
  } else {
    std::cout << "mse " << ues::format_double(m.mse) << '\n';
    csv << "mse";
    for (const auto& [t, v] : m.pck_at) csv << ",pck@" << ues::format_double(t);
    csv << '\n' << ues::format_double(m.mse);
    for (const auto& [t, v] : m.pck_at) {
      std::cout << "pck@" << ues::format_double(t) << ' ' << ues::format_double(v) << '\n';
      csv << ',' << ues::format_double(v);
    }
    csv << '\n';
  }
  if (!csv_path.empty()) ues::atomic_write_file(csv_path, csv.str());
  return 0;
}

int cmd_score(const std::string& input_path, const std::string& output_path,
              const ues::ScoreOptions& options, bool relabel,
              const ues::RelabelOptions& relabel_options) {
  std::ifstream file_in;
  std::istream* in = &std::cin;
  if (!input_path.empty() && input_path != "-") {
    file_in.open(input_path);
    if (!file_in) {
      std::cerr << "error: cannot open " << input_path << '\n';
      return 1;
    }
    in = &file_in;
  }

  // Scoring streams to a buffer first so a failing run never leaves a
  // partial output file behind.
  std::ostringstream buffer;
  std::ostream* out = output_path.empty() ? static_cast<std::ostream*>(&std::cout) : &buffer;
  const int rc = relabel ? ues::relabel_stream(*in, *out, relabel_options)
                         : ues::score_stream(*in, *out, options);
  if (!output_path.empty()) ues::atomic_write_file(output_path, buffer.str());
  return rc;
}

int cmd_plot(const std::string& report_path, const std::string& kind, const std::string& out_base,
             std::size_t bins, const std::optional<std::size_t>& epoch) {
  nlohmann::json report;
  try {
    report = nlohmann::json::parse(ues::read_file_text(report_path));
  } catch (const nlohmann::json::exception& e) {
    throw ues::CorruptStream("report: " + std::string(e.what()));
  }
  const auto& runs = report.at("runs");
  if (runs.empty()) throw ues::InvalidInput("report: no runs");

  std::ostringstream csv;
  std::string svg;

  if (kind == "histogram") {
    const auto& epochs = runs.at(0).at("epochs");
    if (epochs.empty()) throw ues::InvalidInput("report: no epochs");
    const std::size_t idx = epoch.value_or(epochs.size() - 1);
    if (idx >= epochs.size()) throw ues::InvalidInput("plot: epoch out of range");
    const auto values = epochs.at(idx).at("sample_uncertainties").get<std::vector<double>>();
    const auto counts = ues::histogram(values, bins);
    double max_v = 0.0;
    for (double v : values) max_v = std::max(max_v, v);
    std::vector<double> edges(bins + 1, 0.0);
    for (std::size_t i = 0; i <= bins; ++i) {
      edges[i] = max_v * static_cast<double>(i) / static_cast<double>(bins);
    }
    csv << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < bins; ++i) {
      csv << ues::format_double(edges[i]) << ',' << ues::format_double(edges[i + 1]) << ','
          << counts[i] << '\n';
    }
    svg = ues::svg::bar_chart("sample uncertainty, epoch " + std::to_string(idx),
                              "uncertainty", "count", edges, counts, csv.str());
  } else if (kind == "correlation") {
    ues::svg::Series series{"pearson(u, correct)", {}, {}};
    csv << "epoch,correlation\n";
    for (const auto& rec : runs.at(0).at("epochs")) {
      csv << rec.at("epoch").get<std::size_t>() << ',';
      const auto& c = rec.at("uncertainty_correlation");
      if (!c.is_null()) {
        series.xs.push_back(rec.at("epoch").get<double>());
        series.ys.push_back(c.get<double>());
        csv << ues::format_double(c.get<double>());
      }
      csv << '\n';
    }
    svg = ues::svg::line_chart("uncertainty vs correctness", "epoch", "pearson r", {series},
                               csv.str());
  } else if (kind == "curves") {
    std::vector<ues::svg::Series> series;
    std::size_t max_epochs = 0;
    for (const auto& run : runs) {
      ues::svg::Series s{run.at("name").get<std::string>(), {}, {}};
      const bool classification = run.at("config").at("task") != "keypoints";
      for (const auto& rec : run.at("epochs")) {
        s.xs.push_back(rec.at("epoch").get<double>());
        s.ys.push_back(classification ? rec.at("error_rate").get<double>()
                                      : rec.at("pck02").get<double>());
      }
      max_epochs = std::max(max_epochs, s.xs.size());
      series.push_back(std::move(s));
    }
    csv << "epoch";
    for (const auto& s : series) csv << ',' << s.label;
    csv << '\n';
    for (std::size_t e = 0; e < max_epochs; ++e) {
      csv << e;
      for (const auto& s : series) {
        csv << ',';
        if (e < s.ys.size()) csv << ues::format_double(s.ys[e]);
      }
      csv << '\n';
    }
    svg = ues::svg::line_chart("per-epoch metric", "epoch", "metric", series, csv.str());
  } else {
    throw ues::ConfigError("kind: unknown plot kind '" + kind + "'");
  }

  ues::atomic_write_file(out_base + ".svg", svg);
  ues::atomic_write_file(out_base + ".csv", csv.str());
  std::cout << out_base << ".svg " << out_base << ".csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uncertainty-weighted ensembling for semi-supervised training"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> tau;
  std::string config_path, out_dir, export_base;
  bool no_sample_weights = false, no_head_weights = false, supervised_only = false;
  bool ablation = false, quiet = false;

  auto* train = app.add_subcommand("train", "run the semi-supervised trainer");
  train->add_option("--config", config_path, "flat key=value config file")->required();
  train->add_option("--seed", seed, "seed override (beats UES_SEED and the config)");
  train->add_option("--epochs", epochs, "epoch-count override");
  train->add_option("--tau", tau, "confidence threshold override");
  train->add_option("--out", out_dir, "output directory override");
  train->add_flag("--no-sample-weights", no_sample_weights, "force all sample weights to 1");
  train->add_flag("--no-head-weights", no_head_weights, "force uniform head weights");
  train->add_flag("--supervised-only", supervised_only, "skip the unlabeled pass");
  train->add_flag("--ablation", ablation, "run neither / SW / SW+PHW as one command");
  train->add_option("--export-dataset", export_base, "also export the dataset to this base path");
  train->add_flag("--quiet", quiet, "suppress progress output");

  std::string checkpoint_path, eval_csv = "eval.csv";
  bool eval_weighted = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset spec");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval->add_option("--config", config_path, "config describing the dataset")->required();
  eval->add_option("--seed", seed, "seed override");
  eval->add_option("--csv", eval_csv, "metrics CSV path (empty to skip)");
  eval->add_flag("--weighted", eval_weighted, "reserved: weighted eval ensemble");

  ues::ScoreOptions score_options;
  std::string score_in, score_out, shape_text;
  bool relabel = false;
  std::string relabel_mode = "classification";
  auto* score = app.add_subcommand("score", "NDJSON batch scoring of external predictions");
  score->add_option("--input", score_in, "input NDJSON ('-' or empty for stdin)");
  score->add_option("--output", score_out, "output NDJSON (default stdout)");
  score->add_option("--tau", score_options.default_tau, "default threshold for lines without tau");
  score->add_option("--batch-size", score_options.batch_size, "cut batches after N requests");
  score->add_option("--decay", score_options.ema_decay, "EMA decay for head weights");
  score->add_flag("--normalize", score_options.normalize_ensemble, "normalize ensemble outputs");
  score->add_option("--state-file", score_options.state_file, "persist EMA state across runs");
  score->add_flag("--strict", score_options.strict, "exit nonzero if any line was rejected");
  score->add_flag("--relabel", relabel, "decode hard labels from score output lines");
  score->add_option("--mode", relabel_mode, "relabel mode: classification|regression");
  score->add_option("--shape", shape_text, "relabel grid shape KxHxW (regression)");

  std::string report_path, plot_kind, plot_out = "plot";
  std::size_t bins = 10;
  std::optional<std::size_t> plot_epoch;
  auto* plot = app.add_subcommand("plot", "render report.json diagnostics as SVG + CSV");
  plot->add_option("--report", report_path, "report.json path")->required();
  plot->add_option("--kind", plot_kind, "histogram | correlation | curves")->required();
  plot->add_option("--out", plot_out, "output base path");
  plot->add_option("--bins", bins, "histogram bin count");
  plot->add_option("--epoch", plot_epoch, "histogram epoch (default last)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return cmd_train(config_path, seed, epochs, tau, out_dir, no_sample_weights,
                       no_head_weights, supervised_only, ablation, export_base, quiet);
    }
    if (eval->parsed()) {
      return cmd_eval(checkpoint_path, config_path, seed, eval_weighted, eval_csv);
    }
    if (score->parsed()) {
      ues::RelabelOptions relabel_options;
      if (relabel) {
        if (relabel_mode == "classification") {
          relabel_options.mode = ues::Mode::kClassification;
        } else if (relabel_mode == "regression") {
          relabel_options.mode = ues::Mode::kRegression;
          if (shape_text.empty()) throw ues::ConfigError("shape: required for regression relabel");
          relabel_options.grid = parse_shape(shape_text);
        } else {
          throw ues::ConfigError("mode: expected classification|regression");
        }
      }
      return cmd_score(score_in, score_out, score_options, relabel, relabel_options);
    }
    if (plot->parsed()) {
      return cmd_plot(report_path, plot_kind, plot_out, bins, plot_epoch);
    }
  } catch (const ues::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
