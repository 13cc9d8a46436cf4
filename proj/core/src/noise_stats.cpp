#include "nexrl/noise_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nexrl/rng.hpp"

namespace nexrl {

NexSet acquire_nex(const ComplexImage& clean, double sigma0,
                   const Image& gfactor, int k, std::uint64_t seed) {
  if (sigma0 <= 0) throw DataError("acquire_nex: sigma0 must be > 0");
  if (k < 1) throw DataError("acquire_nex: need at least one acquisition");
  require_same_shape(clean.real, gfactor, "acquire_nex");
  for (double g : gfactor)
    if (!(g > 0)) throw DataError("acquire_nex: gfactor must be positive");

  NexSet set;
  set.sigma0 = sigma0;
  set.gfactor = gfactor;
  set.slices.reserve(static_cast<std::size_t>(k));
  const int h = clean.height(), w = clean.width();
  for (int a = 0; a < k; ++a) {
    Rng rng(substream(seed, "nex", static_cast<std::uint64_t>(a)));
    ComplexImage img(h, w);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double s = sigma0 * gfactor.at(i, j);
        img.real.at(i, j) = clean.real.at(i, j) + rng.normal(0.0, s);
        img.imag.at(i, j) = clean.imag.at(i, j) + rng.normal(0.0, s);
      }
    }
    set.slices.push_back(std::move(img));
  }
  return set;
}

ComplexImage signal_strengthened_map(const ComplexImage& a,
                                     const ComplexImage& b) {
  return complex_add(a, b);
}

ComplexImage noise_map(const ComplexImage& a, const ComplexImage& b) {
  return complex_sub(a, b);
}

NoiseStats rayleigh_moments(double sigma) {
  if (sigma <= 0) throw DataError("rayleigh_moments: sigma must be > 0");
  NoiseStats s;
  s.sigma = sigma;
  s.mu_r = sigma * std::sqrt(std::numbers::pi / 2.0);
  s.sigma_r2 = (2.0 - std::numbers::pi / 2.0) * sigma * sigma;
  return s;
}

double fit_rayleigh(const std::vector<double>& samples) {
  if (samples.size() < 2)
    throw DataError("fit_rayleigh: need at least 2 samples");
  double sum_sq = 0.0;
  bool any_nonzero = false;
  for (double x : samples) {
    if (x < 0) throw DataError("fit_rayleigh: samples must be non-negative");
    if (x > 0) any_nonzero = true;
    sum_sq += x * x;
  }
  if (!any_nonzero) throw DataError("fit_rayleigh: degenerate samples");
  return std::sqrt(sum_sq / (2.0 * static_cast<double>(samples.size())));
}

Image local_variance_map(const Image& mag_noise, int patch) {
  if (patch < 3 || patch % 2 == 0)
    throw DataError("local_variance_map: patch must be odd and >= 3");
  if (mag_noise.height() < patch || mag_noise.width() < patch)
    throw DataError("local_variance_map: patch larger than image");

  const int h = mag_noise.height(), w = mag_noise.width();
  const int r = patch / 2;
  Image out(h, w);
  for (int i = 0; i < h; ++i) {
    const int i0 = std::max(0, i - r), i1 = std::min(h - 1, i + r);
    for (int j = 0; j < w; ++j) {
      const int j0 = std::max(0, j - r), j1 = std::min(w - 1, j + r);
      const int n = (i1 - i0 + 1) * (j1 - j0 + 1);
      double sum = 0.0;
      for (int y = i0; y <= i1; ++y)
        for (int x = j0; x <= j1; ++x) sum += mag_noise.at(y, x);
      const double mean = sum / n;
      double ss = 0.0;
      for (int y = i0; y <= i1; ++y)
        for (int x = j0; x <= j1; ++x) {
          const double d = mag_noise.at(y, x) - mean;
          ss += d * d;
        }
      out.at(i, j) = ss / (n - 1);
    }
  }
  return out;
}

Histogram histogram(const std::vector<double>& samples, int bins) {
  if (samples.empty()) throw DataError("histogram: no samples");
  if (bins < 1) throw DataError("histogram: need at least one bin");

  double lo = samples[0], hi = samples[0];
  for (double x : samples) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi == lo) hi = lo + 1.0;  // degenerate range: everything in bin 0

  Histogram out;
  out.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b)
    out.edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * b / bins;
  out.counts.assign(static_cast<std::size_t>(bins), 0);
  const double scale = bins / (hi - lo);
  for (double x : samples) {
    int idx = static_cast<int>((x - lo) * scale);
    idx = std::clamp(idx, 0, bins - 1);  // right edge joins the last bin
    ++out.counts[static_cast<std::size_t>(idx)];
  }
  return out;
}

Chi2Fit chi2_overlay(const std::vector<double>& samples_squared) {
  if (samples_squared.size() < 100)
    throw DataError("chi2_overlay: need at least 100 samples");
  double sum = 0.0;
  for (double x : samples_squared) {
    if (x < 0) throw DataError("chi2_overlay: squared samples must be >= 0");
    sum += x;
  }
  const double n = static_cast<double>(samples_squared.size());
  const double m1 = sum / n;
  if (m1 <= 0) throw DataError("chi2_overlay: degenerate samples");
  double ss = 0.0;
  for (double x : samples_squared) {
    const double d = x - m1;
    ss += d * d;
  }
  const double var = ss / (n - 1.0);

  // Noncentral chi-squared with 2 dof scaled by s^2:
  //   mean = 2*s^2 + mu^2,  variance = 4*s^4 + 4*s^2*mu^2
  // Moment matching gives s^2 = (m1 - sqrt(m1^2 - var)) / 2.
  const double disc = std::max(0.0, m1 * m1 - var);
  double s2 = (m1 - std::sqrt(disc)) / 2.0;
  if (!(s2 > 0)) s2 = m1 / 2.0;  // central fallback
  Chi2Fit fit;
  fit.scale = s2;
  fit.noncentrality = std::max(0.0, m1 / s2 - 2.0);
  return fit;
}

double pearson_correlation(const Image& a, const Image& b) {
  require_same_shape(a, b, "pearson_correlation");
  const std::size_t n = a.size();
  if (n < 2) throw DataError("pearson_correlation: need at least 2 pixels");
  double ma = 0.0, mb = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    ma += a.data()[t];
    mb += b.data()[t];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double da = a.data()[t] - ma, db = b.data()[t] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa == 0.0 || sbb == 0.0)
    throw DataError("pearson_correlation: constant input");
  return sab / std::sqrt(saa * sbb);
}

double rayleigh_chi2_statistic(const std::vector<double>& samples,
                               double sigma_hat, int bins) {
  if (sigma_hat <= 0)
    throw DataError("rayleigh_chi2_statistic: sigma_hat must be > 0");
  const Histogram h = histogram(samples, bins);
  const double n = static_cast<double>(samples.size());
  const double inv2s2 = 1.0 / (2.0 * sigma_hat * sigma_hat);
  auto cdf = [&](double x) {
    return x <= 0 ? 0.0 : 1.0 - std::exp(-x * x * inv2s2);
  };
  double stat = 0.0;
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double expected = n * (cdf(h.edges[b + 1]) - cdf(h.edges[b]));
    if (expected <= 1e-12) continue;
    const double d = static_cast<double>(h.counts[b]) - expected;
    stat += d * d / expected;
  }
  return stat;
}

Image mean_image(const std::vector<Image>& maps) {
  if (maps.empty()) throw DataError("mean_image: no maps");
  Image out(maps[0].height(), maps[0].width());
  for (const Image& m : maps) {
    require_same_shape(m, out, "mean_image");
    for (std::size_t t = 0; t < out.size(); ++t) out.data()[t] += m.data()[t];
  }
  const double inv = 1.0 / static_cast<double>(maps.size());
  for (double& v : out) v *= inv;
  return out;
}

}  // namespace nexrl
