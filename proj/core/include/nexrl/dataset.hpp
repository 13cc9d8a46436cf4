#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nexrl/image.hpp"
#include "nexrl/tensor.hpp"

namespace nexrl {

/// One training/evaluation sample. All tensors are float and already carry
/// the dataset's global intensity scale (255 / max 8-NEX-target magnitude of
/// the training split), so metric code sees the [0,255] convention directly.
struct SliceSample {
  int volume = 0;
  int slice = 0;
  Tensor input;   // [1,4,H,W]: Re1, Im1, Re2, Im2 of the 2-NEX pair
  Tensor target; // [1,2,H,W]: complex average of 8 independent acquisitions
  Tensor clean;   // [1,2,H,W]: noiseless phantom (evaluation oracle)
};

struct DatasetMeta {
  std::string split;           // "train" | "test"
  std::string plane;           // dataset family tag
  int volumes = 0;
  int slices_per_volume = 0;
  int height = 0;
  int width = 0;
  double sigma0 = 0.0;         // per-acquisition per-channel noise std
  double scale = 1.0;          // signal units -> [0,255]
  std::string gfactor_kind;    // "bump" | "constant"
  std::uint64_t seed = 0;
};

struct Dataset {
  DatasetMeta meta;
  Image gfactor;
  std::vector<SliceSample> samples;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

struct DatasetConfig {
  int train_volumes = 50;
  int test_volumes = 17;
  int slices_per_volume = 8;
  int height = 64;
  int width = 64;
  double sigma0 = 0.0;         // <= 0: calibrate from target_baseline_psnr
  double target_baseline_psnr = 31.0;
  std::string gfactor = "bump";
  std::string plane = "sagittal";
  std::uint64_t seed = 1;
};

/// Generates both splits with disjoint phantom seed streams (audited), one
/// shared g-factor map, ten independent acquisitions per slice (2 for the
/// input pair, 8 averaged into the target), and one global intensity scale
/// computed from the training split.
DatasetPair build_dataset(const DatasetConfig& config);

/// Bisection on sigma0 so the mean 2NEX-avg PSNR against the 8-NEX target
/// over a small probe set hits target_psnr (monotone decreasing in sigma0).
double calibrate_sigma0(const DatasetConfig& config, double target_psnr);

void save_dataset(const std::filesystem::path& path, const Dataset& set);
Dataset load_dataset(const std::filesystem::path& path);

// ---- tensor/image bridging helpers ----

/// Copies plane (n, c) of a float tensor into a double image.
Image plane_to_image(const Tensor& t, int n, int c);

/// Magnitude of a 2-channel complex sample: sqrt(re^2 + im^2), in double.
Image magnitude_plane(const Tensor& t, int n);

/// Magnitude of the 2-NEX complex average of a 4-channel input sample.
Image pair_average_magnitude(const Tensor& input, int n);

}  // namespace nexrl
