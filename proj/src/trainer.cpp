#include "ues/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "ues/io_util.hpp"
#include "ues/pseudo_label.hpp"
#include "ues/rng.hpp"

namespace ues {

namespace {

constexpr double kTargetSigma = 1.5;      // unit-peak gaussian target radius, px
constexpr double kCorrectPckThreshold = 0.2;

std::vector<double> gather_features(std::span<const Sample> samples) {
  std::vector<double> out;
  if (samples.empty()) return out;
  out.reserve(samples.size() * samples[0].features.size());
  for (const auto& s : samples) out.insert(out.end(), s.features.begin(), s.features.end());
  return out;
}

// Weighted per-sample ensemble mean, no thresholding; empty weights = uniform.
std::vector<double> ensemble_mean(const HeadBatch& batch, std::span<const double> weights) {
  if (weights.empty()) return mean_reference(batch);
  if (weights.size() != batch.head_count()) {
    throw InvalidInput("ensemble_mean: weight-vector length != M");
  }
  const std::size_t entry = batch.entry_size();
  std::vector<double> out(batch.batch_size() * entry, 0.0);
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    double* row = out.data() + i * entry;
    for (std::size_t m = 0; m < batch.head_count(); ++m) {
      const auto p = batch.entry(i, m);
      for (std::size_t j = 0; j < entry; ++j) row[j] += weights[m] * p[j];
    }
  }
  return out;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TargetBatch targets_for(std::span<const Sample> samples, Mode mode, std::size_t class_count,
                        const GridShape& grid) {
  TargetBatch t;
  t.mode = mode;
  if (mode == Mode::kClassification) {
    std::vector<std::size_t> classes;
    classes.reserve(samples.size());
    for (const auto& s : samples) classes.push_back(s.class_label);
    return one_hot_targets(classes, class_count);
  }
  t.entry_size = grid.size();
  t.values.assign(samples.size() * t.entry_size, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.keypoints.size() != grid.keypoints) {
      throw InvalidInput("targets_for: keypoint count mismatch");
    }
    double* row = t.values.data() + i * t.entry_size;
    for (std::size_t k = 0; k < grid.keypoints; ++k) {
      double* cell = row + k * grid.cells();
      for (std::size_t r = 0; r < grid.height; ++r) {
        for (std::size_t c = 0; c < grid.width; ++c) {
          const double dx = static_cast<double>(c) - s.keypoints[k].x;
          const double dy = static_cast<double>(r) - s.keypoints[k].y;
          cell[r * grid.width + c] =
              std::exp(-(dx * dx + dy * dy) / (2.0 * kTargetSigma * kTargetSigma));
        }
      }
    }
  }
  return t;
}

EvalMetrics evaluate_model(const MultiHeadNet& net, std::span<const Sample> eval_set,
                           std::span<const double> head_weights) {
  if (eval_set.empty()) throw InvalidInput("evaluate_model: empty eval set");
  const auto features = gather_features(eval_set);
  const auto fwd = net.forward(features, eval_set.size());
  const auto mean = ensemble_mean(fwd.outputs, head_weights);
  const std::size_t entry = fwd.outputs.entry_size();

  EvalMetrics out;
  out.mode = net.spec().mode;
  if (out.mode == Mode::kClassification) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
      const std::span<const double> row(mean.data() + i * entry, entry);
      if (argmax_index(row) != eval_set[i].class_label) ++wrong;
    }
    out.error_rate = static_cast<double>(wrong) / static_cast<double>(eval_set.size());
    return out;
  }

  const GridShape& grid = net.spec().grid;
  std::vector<Point2D> preds, gts;
  preds.reserve(eval_set.size() * grid.keypoints);
  gts.reserve(eval_set.size() * grid.keypoints);
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    const std::span<const double> row(mean.data() + i * entry, entry);
    for (std::size_t k = 0; k < grid.keypoints; ++k) {
      preds.push_back(
          grid_peak(row.subspan(k * grid.cells(), grid.cells()), grid.height, grid.width));
      gts.push_back(eval_set[i].keypoints[k]);
    }
  }
  out.mse = mean_point_error(preds, gts);
  const double l = pck_reference_distance(grid);
  for (double t : {0.5, 0.3, 0.2, 0.1}) {
    out.pck_at.emplace_back(t, pck(preds, gts, l, t));
  }
  return out;
}

RunReport train(const TrainConfig& cfg) {
  cfg.validate();

  DatasetSpec dspec = cfg.data;
  dspec.seed = mix_seed(cfg.seed, 21);
  const Dataset ds = generate(dspec);

  MultiHeadNet net(cfg.net_spec());
  if (cfg.learning_rate > 0.0) net.set_learning_rate(cfg.learning_rate);
  net.set_momentum(cfg.momentum);

  BatchIterator batches(ds, cfg.batch_size, cfg.data.mu, mix_seed(cfg.seed, 22));
  Rng aug_rng(mix_seed(cfg.seed, 23));
  HeadWeightState hw = HeadWeightState::uniform(cfg.heads, cfg.ema_decay);
  const std::vector<double> uniform_w(cfg.heads, 1.0 / static_cast<double>(cfg.heads));

  const Mode mode = cfg.mode();
  const double pck_l = pck_reference_distance(cfg.data.grid);
  PseudoLabelConfig pl_cfg;
  pl_cfg.tau = cfg.tau;
  pl_cfg.warmup_epochs = cfg.warmup_epochs;
  pl_cfg.normalize_ensemble = cfg.normalize_ensemble;

  RunReport report;
  report.config = cfg;
  report.checkpoint = net.checkpoint_bytes();

  const std::size_t steps = batches.batches_per_epoch();
  for (std::size_t epoch = 0; epoch < cfg.epochs && !report.diverged; ++epoch) {
    double sum_ll = 0.0;
    double sum_le = 0.0;
    std::size_t mask_hits = 0;
    std::size_t unlabeled_seen = 0;
    std::vector<double> epoch_u;
    std::vector<double> epoch_correct;
    std::vector<double> last_batch_u;

    for (std::size_t step = 0; step < steps; ++step) {
      const BatchPair pair = batches.next();

      std::vector<Sample> labeled;
      labeled.reserve(pair.labeled.size());
      for (std::size_t idx : pair.labeled) {
        labeled.push_back(weak_augment(ds.train[idx], cfg.data, aug_rng));
      }
      const TargetBatch targets = targets_for(labeled, mode, cfg.class_count(), cfg.data.grid);

      const bool use_unlabeled = !cfg.supervised_only && !pair.unlabeled.empty();
      std::vector<Sample> unl_strong;
      std::optional<PseudoLabelBatch> pseudo;
      std::vector<double> sample_w;

      if (use_unlabeled) {
        std::vector<Sample> unl_weak;
        unl_weak.reserve(pair.unlabeled.size());
        unl_strong.reserve(pair.unlabeled.size());
        for (std::size_t idx : pair.unlabeled) {
          unl_weak.push_back(weak_augment(ds.train[idx], cfg.data, aug_rng));
          unl_strong.push_back(strong_augment(ds.train[idx], cfg.data, aug_rng));
        }

        // Pseudo-labels and all uncertainty statistics come from the weak
        // views; no gradient flows through this forward pass.
        const auto weak_fwd = net.forward(gather_features(unl_weak), unl_weak.size());
        std::span<const double> w_h(uniform_w);
        if (cfg.use_head_weights) {
          update_head_state(hw, weak_fwd.outputs);
          w_h = hw.ema_weights;
        }
        pseudo = ensemble_prediction(weak_fwd.outputs, w_h, pl_cfg, static_cast<int>(epoch));
        if (cfg.ensemble_hard_labels) *pseudo = harden_targets(*pseudo, kTargetSigma);

        const auto u_s = sample_uncertainty(weak_fwd.outputs);
        sample_w = cfg.use_sample_weights ? long_tailed_weights(u_s)
                                          : std::vector<double>(u_s.size(), 1.0);

        const auto ref = mean_reference(weak_fwd.outputs);
        const std::size_t entry = weak_fwd.outputs.entry_size();
        for (std::size_t i = 0; i < unl_weak.size(); ++i) {
          const std::span<const double> row(ref.data() + i * entry, entry);
          double correct = 0.0;
          if (mode == Mode::kClassification) {
            correct = argmax_index(row) == unl_weak[i].class_label ? 1.0 : 0.0;
          } else {
            double dist = 0.0;
            for (std::size_t k = 0; k < cfg.data.grid.keypoints; ++k) {
              const Point2D peak = grid_peak(
                  row.subspan(k * cfg.data.grid.cells(), cfg.data.grid.cells()),
                  cfg.data.grid.height, cfg.data.grid.width);
              dist += std::hypot(peak.x - unl_weak[i].keypoints[k].x,
                                 peak.y - unl_weak[i].keypoints[k].y);
            }
            dist /= static_cast<double>(cfg.data.grid.keypoints);
            correct = dist / pck_l <= kCorrectPckThreshold ? 1.0 : 0.0;
          }
          epoch_u.push_back(u_s[i]);
          epoch_correct.push_back(correct);
        }
        for (auto m : pseudo->mask) mask_hits += m ? 1 : 0;
        unlabeled_seen += pseudo->batch_size();
        last_batch_u = u_s;
      }

      // One forward over labeled weak views plus unlabeled strong views,
      // one combined gradient, one optimizer step.
      std::vector<double> inputs = gather_features(labeled);
      {
        const auto strong_features = gather_features(unl_strong);
        inputs.insert(inputs.end(), strong_features.begin(), strong_features.end());
      }
      const std::size_t total_rows = labeled.size() + unl_strong.size();
      const auto fwd = net.forward(inputs, total_rows);

      const LossGrad sup = supervised_loss(fwd.outputs.rows(0, labeled.size()), targets);
      LossGrad ens;
      if (use_unlabeled) {
        ens = ensemble_loss(fwd.outputs.rows(labeled.size(), total_rows), *pseudo, sample_w);
      }
      const double total = sup.value + cfg.lambda_u * ens.value;
      if (!std::isfinite(total)) {
        report.diverged = true;
        break;
      }

      std::vector<double> grad(fwd.outputs.flat().size(), 0.0);
      std::copy(sup.grad.begin(), sup.grad.end(), grad.begin());
      if (use_unlabeled) {
        double* dst = grad.data() + sup.grad.size();
        for (std::size_t j = 0; j < ens.grad.size(); ++j) dst[j] = cfg.lambda_u * ens.grad[j];
      }
      try {
        net.backward_and_step(fwd, grad);
      } catch (const DivergenceError&) {
        report.diverged = true;
        break;
      }
      sum_ll += sup.value;
      sum_le += ens.value;
    }
    if (report.diverged) break;  // last good checkpoint stays in the report

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_supervised = sum_ll / static_cast<double>(steps);
    rec.loss_ensemble = sum_le / static_cast<double>(steps);
    rec.mask_rate = unlabeled_seen == 0 ? 0.0
                                        : static_cast<double>(mask_hits) /
                                              static_cast<double>(unlabeled_seen);
    rec.mean_sample_uncertainty = mean_of(epoch_u);
    if (epoch_u.size() >= 2) rec.uncertainty_correlation = pearson(epoch_u, epoch_correct);
    rec.head_weights = cfg.use_head_weights ? hw.ema_weights : uniform_w;
    const EvalMetrics em = evaluate_model(
        net, ds.eval,
        cfg.eval_weighted ? std::span<const double>(hw.ema_weights) : std::span<const double>());
    if (mode == Mode::kClassification) {
      rec.error_rate = em.error_rate;
    } else {
      rec.pose_mse = em.mse;
      for (const auto& [t, v] : em.pck_at) {
        if (t == kCorrectPckThreshold) rec.pose_pck = v;
      }
    }
    rec.sample_uncertainties = std::move(last_batch_u);
    report.epochs.push_back(std::move(rec));
    report.checkpoint = net.checkpoint_bytes();
  }

  if (!report.epochs.empty()) {
    const auto& last = report.epochs.back();
    report.final_metric =
        mode == Mode::kClassification ? 1.0 - last.error_rate : last.pose_pck;
  }
  if (!cfg.out_dir.empty()) {
    write_run_artifacts(std::span<const RunReport>(&report, 1), cfg.out_dir);
  }
  return report;
}

std::vector<RunReport> run_ablation(const TrainConfig& base) {
  struct Variant {
    const char* name;
    bool sample_weights;
    bool head_weights;
  };
  static constexpr Variant kVariants[] = {
      {"neither", false, false},
      {"sw", true, false},
      {"sw_phw", true, true},
  };
  std::vector<RunReport> reports;
  for (const auto& v : kVariants) {
    TrainConfig cfg = base;
    cfg.use_sample_weights = v.sample_weights;
    cfg.use_head_weights = v.head_weights;
    if (!base.out_dir.empty()) cfg.out_dir = base.out_dir + "/" + v.name;
    RunReport r = train(cfg);
    r.name = v.name;
    reports.push_back(std::move(r));
  }
  if (!base.out_dir.empty()) {
    atomic_write_file(base.out_dir + "/report.json", report_to_json(reports));
  }
  return reports;
}

namespace {

nlohmann::ordered_json epoch_to_json(const EpochRecord& rec, Mode mode) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["loss_supervised"] = rec.loss_supervised;
  j["loss_ensemble"] = rec.loss_ensemble;
  j["mask_rate"] = rec.mask_rate;
  j["mean_sample_uncertainty"] = rec.mean_sample_uncertainty;
  if (rec.uncertainty_correlation) {
    j["uncertainty_correlation"] = *rec.uncertainty_correlation;
  } else {
    j["uncertainty_correlation"] = nullptr;
  }
  j["head_weights"] = rec.head_weights;
  if (mode == Mode::kClassification) {
    j["error_rate"] = rec.error_rate;
  } else {
    j["mse"] = rec.pose_mse;
    j["pck02"] = rec.pose_pck;
  }
  j["sample_uncertainties"] = rec.sample_uncertainties;
  return j;
}

}  // namespace

std::string report_to_json(std::span<const RunReport> runs) {
  nlohmann::ordered_json root;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& run : runs) {
    nlohmann::ordered_json j;
    j["name"] = run.name;
    j["config"] = config_to_json(run.config);
    j["diverged"] = run.diverged;
    j["final_metric"] = run.final_metric;
    auto epochs = nlohmann::ordered_json::array();
    for (const auto& rec : run.epochs) epochs.push_back(epoch_to_json(rec, run.config.mode()));
    j["epochs"] = epochs;
    arr.push_back(std::move(j));
  }
  root["runs"] = arr;
  return root.dump() + "\n";
}

std::string metrics_to_csv(const RunReport& run) {
  const Mode mode = run.config.mode();
  std::ostringstream out;
  out << "epoch,loss_supervised,loss_ensemble,mask_rate,mean_sample_uncertainty,"
         "uncertainty_correlation,";
  out << (mode == Mode::kClassification ? "error_rate" : "mse,pck02");
  for (std::size_t m = 0; m < run.config.heads; ++m) out << ",head_weight_" << m;
  out << '\n';
  for (const auto& rec : run.epochs) {
    out << rec.epoch << ',' << format_double(rec.loss_supervised) << ','
        << format_double(rec.loss_ensemble) << ',' << format_double(rec.mask_rate) << ','
        << format_double(rec.mean_sample_uncertainty) << ',';
    if (rec.uncertainty_correlation) out << format_double(*rec.uncertainty_correlation);
    out << ',';
    if (mode == Mode::kClassification) {
      out << format_double(rec.error_rate);
    } else {
      out << format_double(rec.pose_mse) << ',' << format_double(rec.pose_pck);
    }
    for (double w : rec.head_weights) out << ',' << format_double(w);
    out << '\n';
  }
  return out.str();
}

void write_run_artifacts(std::span<const RunReport> runs, const std::string& out_dir) {
  atomic_write_file(out_dir + "/report.json", report_to_json(runs));
  if (runs.size() == 1) {
    atomic_write_file(out_dir + "/metrics.csv", metrics_to_csv(runs[0]));
    atomic_write_file(out_dir + "/checkpoint.bin",
                      std::span<const std::uint8_t>(runs[0].checkpoint));
  }
}

}  // namespace ues
