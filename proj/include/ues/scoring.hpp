#pragma once

#include <iosfwd>
#include <string>

#include "ues/uncertainty.hpp"

namespace ues {

// NDJSON scoring: one ScoreRequest per line
//   {"id": ..., "mode": "classification"|"regression", "heads": [[...], ...],
//    "shape": [K, H, W] (regression), "tau": optional}
// one ScoreResponse per request, in input order
//   {"id", "sample_uncertainty", "sample_weight", "mask", "ensemble"}
// plus one summary per batch
//   {"head_uncertainties", "head_weights_instant", "head_weights_ema"}
// A batch is the run of lines up to a blank line or the batch-size cutoff.
struct ScoreOptions {
  double default_tau = 0.0;      // used by lines without their own tau
  std::size_t batch_size = 0;    // 0: split on blank lines / EOF only
  double ema_decay = 0.7;
  bool normalize_ensemble = false;
  std::string state_file;        // EMA persistence across invocations
  bool strict = false;           // nonzero exit if any error record was emitted
};

// Returns a process exit code: 0 on success, 1 when strict and some line
// or batch was rejected, 2 on an unusable state file.
int score_stream(std::istream& in, std::ostream& out, const ScoreOptions& options);

// Verification pass: re-reads score OUTPUT lines and decodes hard labels
// from their ensemble arrays. Classification emits {"id", "label"};
// regression needs the grid shape and emits {"id", "points"}. Masked-out
// samples report null.
struct RelabelOptions {
  Mode mode = Mode::kClassification;
  GridShape grid;  // regression only
};

int relabel_stream(std::istream& in, std::ostream& out, const RelabelOptions& options);

}  // namespace ues
