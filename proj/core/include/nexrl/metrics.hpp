#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nexrl/image.hpp"

namespace nexrl {

/// Constants of the structural-similarity index. The Gaussian window is
/// 11x11, std 1.5, normalized to sum 1; C1 = (0.01*L)^2, C2 = (0.03*L)^2.
struct SsimConfig {
  double dynamic_range = 255.0;
  int window = 11;
  double window_sigma = 1.5;

  double c1() const { return 0.01 * dynamic_range * 0.01 * dynamic_range; }
  double c2() const { return 0.03 * dynamic_range * 0.03 * dynamic_range; }
};

double mse(const Image& f, const Image& g);

/// PSNR = 10*log10(255^2 / MSE) on [0,255]-scaled images. Identical images
/// (MSE == 0) have no finite PSNR and yield an empty optional.
std::optional<double> psnr(const Image& f, const Image& g,
                           double peak = 255.0);

/// Mean SSIM over all windows that fit entirely inside the image.
double ssim(const Image& f, const Image& g, const SsimConfig& cfg = {});

/// The per-window SSIM map, size (H-10) x (W-10) for an 11-tap window.
Image ssim_map(const Image& f, const Image& g, const SsimConfig& cfg = {});

/// Analytic gradient of mean SSIM with respect to f.
Image ssim_grad(const Image& f, const Image& g, const SsimConfig& cfg = {});

/// Training-loss form. The product form is the primary definition; the
/// weighted-sum form exists only for comparison experiments.
enum class LossForm { kProduct, kSum };

struct LossConfig {
  SsimConfig ssim;
  LossForm form = LossForm::kProduct;
  double sum_lambda = 1.0;  // weight of (1 - SSIM) in the sum form
};

/// Product form: L = ||pred - target||_2^2 * (1 - SSIM(pred, target)).
/// Sum form:     L = ||pred - target||_2^2 + lambda * (1 - SSIM).
double combined_loss(const Image& pred, const Image& target,
                     const LossConfig& cfg = {});

/// dL/dpred for the selected form (product rule through both factors).
Image combined_loss_grad(const Image& pred, const Image& target,
                         const LossConfig& cfg = {});

/// Per-slice quality of one prediction against its reference.
struct MetricsRecord {
  std::optional<double> psnr;  // empty == identical images
  double ssim = 0.0;
};

struct MetricsSummary {
  std::size_t count = 0;
  std::size_t identical = 0;  // records without a finite PSNR
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
};

MetricsRecord evaluate_pair(const Image& pred, const Image& target,
                            const SsimConfig& cfg = {});

/// Sample mean and sample std (n-1 denominator; 0 for a single record).
/// Identical-image records are excluded from the PSNR moments and counted.
MetricsSummary aggregate(const std::vector<MetricsRecord>& records);

/// "31.4114±2.2761" style formatting; PSNR uses 4 decimals, SSIM 5.
std::string format_mean_std(double mean, double std, int decimals);

}  // namespace nexrl
