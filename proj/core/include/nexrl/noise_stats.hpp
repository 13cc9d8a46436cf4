#pragma once

#include <cstdint>
#include <vector>

#include "nexrl/image.hpp"

namespace nexrl {

/// Rayleigh moments of a noise-map magnitude whose complex components have
/// per-channel std sigma (= sqrt(2) * sigma0 for a two-acquisition
/// difference).
struct NoiseStats {
  double sigma = 0.0;
  double mu_r = 0.0;      // sigma * sqrt(pi/2)
  double sigma_r2 = 0.0;  // (2 - pi/2) * sigma^2
};

/// Parameters of a noncentral chi-squared fit (2 degrees of freedom) to
/// squared noise magnitudes, by moment matching.
struct Chi2Fit {
  double scale = 0.0;          // per-component variance s^2
  double noncentrality = 0.0;  // lambda = mu^2 / s^2, clamped >= 0
};

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

/// Each acquisition = clean + noise, with the real and imaginary noise parts
/// independent N(0, (sigma0 * gfactor[i,j])^2). The K realizations are
/// mutually independent and reproducible from the seed.
NexSet acquire_nex(const ComplexImage& clean, double sigma0,
                   const Image& gfactor, int k, std::uint64_t seed);

/// Complex sum of two acquisitions (signal adds coherently).
ComplexImage signal_strengthened_map(const ComplexImage& a,
                                     const ComplexImage& b);

/// Complex difference: the signal cancels, leaving pure noise with
/// per-component std sqrt(2) * sigma0 (locally scaled by the g-factor).
ComplexImage noise_map(const ComplexImage& a, const ComplexImage& b);

NoiseStats rayleigh_moments(double sigma);

/// Maximum-likelihood Rayleigh scale: sigma_hat = sqrt(mean(x^2) / 2).
double fit_rayleigh(const std::vector<double>& samples);

/// Per-pixel unbiased sample variance over a centered patch; borders use the
/// truncated (valid) neighborhood.
Image local_variance_map(const Image& mag_noise, int patch = 3);

/// Equal-width histogram over [min, max]; the right edge belongs to the last
/// bin so counts always sum to the sample count.
Histogram histogram(const std::vector<double>& samples, int bins);

/// Moment-matched noncentral chi-squared (2 dof) fit to squared magnitudes.
/// Needs >= 100 samples.
Chi2Fit chi2_overlay(const std::vector<double>& samples_squared);

/// Pearson correlation coefficient of two equal-shape maps.
double pearson_correlation(const Image& a, const Image& b);

/// Chi-squared goodness-of-fit statistic of samples against the fitted
/// Rayleigh(sigma_hat) law, over an equal-width histogram. Larger = worse fit.
double rayleigh_chi2_statistic(const std::vector<double>& samples,
                               double sigma_hat, int bins);

/// Element-wise mean of several equal-shape maps; pooling local-variance maps
/// over many independent noise maps sharpens the spatial variance estimate.
Image mean_image(const std::vector<Image>& maps);

}  // namespace nexrl
