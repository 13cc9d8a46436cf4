#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nexrl/dataset.hpp"
#include "nexrl/trainer.hpp"

namespace nexrl {

/// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Runs fn, mapping exceptions to exit codes (UsageError -> 2, DataError
/// and I/O -> 3, NumericalError -> 4) and printing the message to stderr.
int run_guarded(const std::function<int()>& fn);

std::string to_string(LossForm form);
LossForm parse_loss_form(const std::string& s);

struct SimulateOptions {
  DatasetConfig dataset;
  std::string out_dir = "dataset";
};
/// Writes <out>/train.nxd, <out>/test.nxd, and a manifest; prints counts,
/// sigma0, and the calibrated baseline PSNR.
int cmd_simulate(const SimulateOptions& opt);

struct TrainOptions {
  TrainConfig config;
  std::string dataset_dir;
  std::string out_dir = "run";
  std::string resume;
};
/// Trains on <dataset>/train.nxd with <dataset>/test.nxd as validation;
/// writes best.nxd, last.nxd, history.csv, and a manifest.
int cmd_train(const TrainOptions& opt);

struct DenoiseOptions {
  std::string checkpoint;
  std::string dataset;  // one split container
  std::string out_dir = "denoised";
  bool export_pgm = false;
  int batch_size = 8;
};
/// Writes denoised magnitude containers (and optional PGM exports).
int cmd_denoise(const DenoiseOptions& opt);

struct EvaluateOptions {
  std::string checkpoint;
  std::string dataset;  // one split container
  std::string out_dir = "evaluation";
  int batch_size = 8;
};
/// Emits metrics.csv / metrics.json with the model row and the 2NEX-avg row.
int cmd_evaluate(const EvaluateOptions& opt);

struct AblateOptions {
  TrainConfig base;
  std::string dataset_dir;
  std::string out_dir = "ablation";
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};
int cmd_ablate(const AblateOptions& opt);

struct NoiseStatsOptions {
  std::string dataset;  // one split container
  std::string out_dir = "noise-stats";
  int volume = 0;
  int slice = 0;
  int bins = 60;
};
/// Emits the noise-statistics panels for one slice as CSV + PGM: signal
/// map, noise map, magnitude histogram with Rayleigh fit, squared-magnitude
/// histogram with noncentral-chi-squared fit, and the local variance map
/// (plus its correlation with gfactor^2 pooled over the whole split).
int cmd_noise_stats(const NoiseStatsOptions& opt);

}  // namespace nexrl
