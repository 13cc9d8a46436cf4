#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nexrl/dataset.hpp"
#include "nexrl/metrics.hpp"
#include "nexrl/network.hpp"

namespace nexrl {

struct TrainConfig {
  double initial_lr = 1e-4;
  double plateau_factor = 0.2;
  int plateau_patience = 10;
  int batch_size = 8;
  int epochs = 150;
  std::uint64_t seed = 1;
  InputMode input_mode = InputMode::kDual;
  Variant variant = Variant::kFull;
  int extract_width = 128;
  int bridge_width = 64;
  LossForm loss_form = LossForm::kProduct;
  double sum_lambda = 1.0;
  std::string checkpoint_dir;  // empty: keep checkpoints in memory only
  bool verbose = false;
};

struct EpochStats {
  int epoch = 0;        // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;      // lr used during this epoch
  double seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;          // epoch of the lowest validation loss
  double best_val_loss = 0.0;
};

struct TrainResult {
  NetworkParams params;       // after the final epoch
  NetworkParams best_params;  // lowest validation loss
  TrainingHistory history;
};

/// Seeded-shuffle epoch loop: forward -> magnitude loss -> backward -> Adam,
/// with the plateau scheduler driven by the epoch-mean training loss and the
/// validation loss logged each epoch. When checkpoint_dir is set, writes
/// last.nxd every epoch and best.nxd on improvement; resume_from restarts
/// from a last.nxd. Aborts with the offending batch on a non-finite loss.
TrainResult train(const TrainConfig& config, const Dataset& train_set,
                  const Dataset& val_set, const std::string& resume_from = "");

struct EvalResult {
  std::vector<MetricsRecord> records;  // one per slice
  MetricsSummary summary;
};

/// 2NEX-avg baseline: the complex average of the input pair vs the target.
EvalResult evaluate_baseline(const Dataset& set, const SsimConfig& cfg = {});

/// Eval-mode model output vs the target magnitude.
EvalResult evaluate_model(const NetworkParams& params, const Dataset& set,
                          const SsimConfig& cfg = {}, int batch_size = 8);

/// Model output vs the noiseless phantom oracle (unavailable on real data).
EvalResult evaluate_model_vs_clean(const NetworkParams& params,
                                   const Dataset& set,
                                   const SsimConfig& cfg = {},
                                   int batch_size = 8);

struct AblationRow {
  std::string label;
  MetricsSummary summary;
};

struct AblationReport {
  std::vector<AblationRow> variant_rows;  // Model, Model-Tra, Model-Res
  std::vector<AblationRow> input_rows;    // 2NEX-avg, dual, single
  std::vector<AblationRow> per_seed;      // every (label, seed) run
};

/// Trains {full, tra, res} dual-input models and a full single-input model
/// for each seed under identical budgets, evaluates on the test split, and
/// pools per-slice records across seeds.
AblationReport run_ablation(const TrainConfig& base, const Dataset& train_set,
                            const Dataset& test_set,
                            const std::vector<std::uint64_t>& seeds);

}  // namespace nexrl
