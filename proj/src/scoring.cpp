#include "ues/scoring.hpp"

#include <cmath>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <variant>

#include "json.hpp"
#include "ues/io_util.hpp"
#include "ues/pseudo_label.hpp"

namespace ues {

namespace {

using json = nlohmann::ordered_json;

struct Request {
  std::string id;
  Mode mode = Mode::kClassification;
  std::size_t head_count = 0;
  std::size_t entry_size = 0;
  GridShape grid;
  bool has_grid = false;
  std::vector<double> values;  // M x entry_size
  std::optional<double> tau;
};

// A batch keeps every line in input order; error records flush alongside
// the responses they were interleaved with.
using Entry = std::variant<Request, json>;

std::string id_of(const json& line) {
  if (!line.is_object() || !line.contains("id")) return "";
  const auto& id = line["id"];
  if (id.is_string()) return id.get<std::string>();
  return id.dump();
}

json error_record(const std::string& id, const std::string& message) {
  json j;
  j["id"] = id.empty() ? json() : json(id);
  j["error"] = message;
  return j;
}

Entry parse_line(const std::string& text) {
  json line = json::parse(text, nullptr, false);
  if (line.is_discarded() || !line.is_object()) {
    return error_record("", "malformed JSON");
  }
  const std::string id = id_of(line);
  if (id.empty()) return error_record("", "missing id");

  Request req;
  req.id = id;
  if (!line.contains("mode") || !line["mode"].is_string()) {
    return error_record(id, "missing mode");
  }
  const std::string mode = line["mode"].get<std::string>();
  if (mode == "classification") {
    req.mode = Mode::kClassification;
  } else if (mode == "regression") {
    req.mode = Mode::kRegression;
  } else {
    return error_record(id, "unknown mode '" + mode + "'");
  }

  if (!line.contains("heads") || !line["heads"].is_array()) {
    return error_record(id, "missing heads array");
  }
  const auto& heads = line["heads"];
  if (heads.size() < 2) return error_record(id, "M >= 2 required");
  req.head_count = heads.size();
  for (const auto& head : heads) {
    if (!head.is_array() || head.empty()) return error_record(id, "heads must be nonempty arrays");
    if (req.entry_size == 0) {
      req.entry_size = head.size();
    } else if (head.size() != req.entry_size) {
      return error_record(id, "heads must share one shape");
    }
    for (const auto& v : head) {
      if (!v.is_number()) return error_record(id, "non-numeric head entry");
      const double x = v.get<double>();
      if (!std::isfinite(x)) return error_record(id, "non-finite head entry");
      req.values.push_back(x);
    }
  }

  if (req.mode == Mode::kRegression) {
    if (!line.contains("shape") || !line["shape"].is_array() || line["shape"].size() != 3) {
      return error_record(id, "regression requires shape [K, H, W]");
    }
    const auto& s = line["shape"];
    for (const auto& v : s) {
      if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0) {
        return error_record(id, "shape entries must be positive integers");
      }
    }
    req.grid = GridShape{s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<std::size_t>()};
    req.has_grid = true;
    if (req.grid.size() != req.entry_size) {
      return error_record(id, "shape does not match head length");
    }
  }

  if (line.contains("tau")) {
    if (!line["tau"].is_number()) return error_record(id, "tau must be a number");
    const double tau = line["tau"].get<double>();
    if (!(tau >= 0.0 && tau <= 1.0)) return error_record(id, "tau must lie in [0, 1]");
    req.tau = tau;
  }

  static const char* const kKnown[] = {"id", "mode", "heads", "shape", "tau"};
  for (const auto& [key, value] : line.items()) {
    (void)value;
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) return error_record(id, "unknown field '" + key + "'");
  }
  return req;
}

class BatchScorer {
 public:
  BatchScorer(std::ostream& out, const ScoreOptions& options) : out_(out), options_(options) {}

  bool had_errors() const { return had_errors_; }
  const std::optional<HeadWeightState>& state() const { return state_; }
  void restore_state(HeadWeightState s) { state_ = std::move(s); }

  void add_line(const std::string& text) {
    Entry e = parse_line(text);
    if (std::holds_alternative<json>(e)) had_errors_ = true;
    const bool is_request = std::holds_alternative<Request>(e);
    pending_.push_back(std::move(e));
    if (is_request) ++pending_requests_;
    if (options_.batch_size > 0 && pending_requests_ >= options_.batch_size) flush();
  }

  void flush() {
    if (pending_.empty()) return;
    std::vector<const Request*> requests;
    for (const auto& e : pending_) {
      if (const auto* r = std::get_if<Request>(&e)) requests.push_back(r);
    }
    std::vector<json> responses;
    std::optional<json> summary;
    if (!requests.empty()) score_batch(requests, responses, summary);

    std::size_t next = 0;
    for (const auto& e : pending_) {
      if (std::holds_alternative<json>(e)) {
        out_ << std::get<json>(e).dump() << '\n';
      } else {
        out_ << responses[next++].dump() << '\n';
      }
    }
    if (summary) out_ << summary->dump() << '\n';
    pending_.clear();
    pending_requests_ = 0;
  }

 private:
  void reject_batch(const std::vector<const Request*>& requests, const std::string& why,
                    std::vector<json>& responses) {
    had_errors_ = true;
    for (const auto* r : requests) responses.push_back(error_record(r->id, why));
  }

  void score_batch(const std::vector<const Request*>& requests, std::vector<json>& responses,
                   std::optional<json>& summary) {
    const Request& first = *requests.front();
    for (const auto* r : requests) {
      if (r->mode != first.mode || r->head_count != first.head_count ||
          r->entry_size != first.entry_size || (r->has_grid && !(r->grid == first.grid))) {
        reject_batch(requests, "inconsistent shapes within batch", responses);
        return;
      }
    }
    if (state_ && state_->ema_weights.size() != first.head_count) {
      reject_batch(requests, "head count differs from EMA state", responses);
      return;
    }
    if (!state_) state_ = HeadWeightState::uniform(first.head_count, options_.ema_decay);

    HeadBatch batch = first.mode == Mode::kClassification
                          ? HeadBatch::classification(requests.size(), first.head_count,
                                                      first.entry_size)
                          : HeadBatch::regression(requests.size(), first.head_count, first.grid);
    for (std::size_t i = 0; i < requests.size(); ++i) {
      std::copy(requests[i]->values.begin(), requests[i]->values.end(),
                batch.entry(i, 0).data());
    }

    const auto uncertainty = sample_uncertainty(batch);
    const auto weights = long_tailed_weights(uncertainty);
    update_head_state(*state_, batch);

    for (std::size_t i = 0; i < requests.size(); ++i) {
      PseudoLabelConfig cfg;
      cfg.tau = requests[i]->tau.value_or(options_.default_tau);
      cfg.warmup_epochs = 0;
      cfg.normalize_ensemble = options_.normalize_ensemble;
      const auto row = batch.rows(i, i + 1);
      const auto pseudo = ensemble_prediction(row, state_->ema_weights, cfg, 0);

      json r;
      r["id"] = requests[i]->id;
      r["sample_uncertainty"] = uncertainty[i];
      r["sample_weight"] = weights[i];
      r["mask"] = pseudo.mask[0] != 0;
      r["ensemble"] = pseudo.ensemble;
      responses.push_back(std::move(r));
    }

    json s;
    s["head_uncertainties"] = state_->raw_uncertainty;
    s["head_weights_instant"] = state_->instant_weights;
    s["head_weights_ema"] = state_->ema_weights;
    summary = std::move(s);
  }

  std::ostream& out_;
  ScoreOptions options_;
  std::vector<Entry> pending_;
  std::size_t pending_requests_ = 0;
  std::optional<HeadWeightState> state_;
  bool had_errors_ = false;
};

}  // namespace

int score_stream(std::istream& in, std::ostream& out, const ScoreOptions& options) {
  BatchScorer scorer(out, options);

  if (!options.state_file.empty() && std::filesystem::exists(options.state_file)) {
    try {
      const json state = json::parse(read_file_text(options.state_file));
      HeadWeightState s = HeadWeightState::uniform(state.at("ema_weights").size(),
                                                   state.at("decay").get<double>());
      s.ema_weights = state.at("ema_weights").get<std::vector<double>>();
      scorer.restore_state(std::move(s));
    } catch (const std::exception& e) {
      out.flush();
      throw ConfigError("state-file: unusable (" + std::string(e.what()) + ")");
    }
  }

  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      scorer.flush();
      continue;
    }
    scorer.add_line(line);
  }
  scorer.flush();

  if (!options.state_file.empty() && scorer.state()) {
    json state;
    state["decay"] = scorer.state()->decay;
    state["ema_weights"] = scorer.state()->ema_weights;
    atomic_write_file(options.state_file, state.dump() + "\n");
  }
  return options.strict && scorer.had_errors() ? 1 : 0;
}

int relabel_stream(std::istream& in, std::ostream& out, const RelabelOptions& options) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("ensemble")) {
      continue;  // summaries and error records pass through silently
    }
    json r;
    r["id"] = parsed.contains("id") ? parsed["id"] : json();
    const bool masked_in = parsed.value("mask", true);
    const auto ensemble = parsed["ensemble"].get<std::vector<double>>();
    if (!masked_in || ensemble.empty()) {
      r[options.mode == Mode::kClassification ? "label" : "points"] = nullptr;
    } else if (options.mode == Mode::kClassification) {
      r["label"] = argmax_index(ensemble);
    } else {
      if (ensemble.size() != options.grid.size()) {
        r["error"] = "ensemble length does not match shape";
        out << r.dump() << '\n';
        continue;
      }
      auto pts = json::array();
      for (std::size_t k = 0; k < options.grid.keypoints; ++k) {
        const auto pt = grid_peak(
            std::span<const double>(ensemble).subspan(k * options.grid.cells(),
                                                      options.grid.cells()),
            options.grid.height, options.grid.width);
        pts.push_back({pt.x, pt.y});
      }
      r["points"] = pts;
    }
    out << r.dump() << '\n';
  }
  return 0;
}

}  // namespace ues
