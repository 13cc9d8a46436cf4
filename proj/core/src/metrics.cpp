#include "nexrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace nexrl {
namespace {

std::vector<double> gaussian_window(int taps, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(taps));
  const double c = (taps - 1) / 2.0;
  double sum = 0.0;
  for (int t = 0; t < taps; ++t) {
    const double d = t - c;
    w[static_cast<std::size_t>(t)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[static_cast<std::size_t>(t)];
  }
  for (double& x : w) x /= sum;  // 2-D outer product then sums to 1
  return w;
}

// Valid-mode separable windowed correlation: output (H-taps+1) x (W-taps+1).
Image window_filter_valid(const Image& x, const std::vector<double>& w) {
  const int taps = static_cast<int>(w.size());
  const int h = x.height(), wd = x.width();
  const int hv = h - taps + 1, wv = wd - taps + 1;
  Image tmp(h, wv);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < wv; ++j) {
      double acc = 0.0;
      for (int t = 0; t < taps; ++t)
        acc += w[static_cast<std::size_t>(t)] * x.at(i, j + t);
      tmp.at(i, j) = acc;
    }
  Image out(hv, wv);
  for (int i = 0; i < hv; ++i)
    for (int j = 0; j < wv; ++j) {
      double acc = 0.0;
      for (int t = 0; t < taps; ++t)
        acc += w[static_cast<std::size_t>(t)] * tmp.at(i + t, j);
      out.at(i, j) = acc;
    }
  return out;
}

// Adjoint of window_filter_valid: scatters per-window values back onto the
// full image grid (out[x] = sum over windows containing x of w * q[window]).
Image window_filter_adjoint(const Image& q, const std::vector<double>& w,
                            int height, int width) {
  const int taps = static_cast<int>(w.size());
  const int hv = q.height(), wv = q.width();
  Image tmp(height, wv);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < wv; ++j) {
      double acc = 0.0;
      for (int t = 0; t < taps; ++t) {
        const int src = i - t;
        if (src >= 0 && src < hv)
          acc += w[static_cast<std::size_t>(t)] * q.at(src, j);
      }
      tmp.at(i, j) = acc;
    }
  Image out(height, width);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      double acc = 0.0;
      for (int t = 0; t < taps; ++t) {
        const int src = j - t;
        if (src >= 0 && src < wv)
          acc += w[static_cast<std::size_t>(t)] * tmp.at(i, src);
      }
      out.at(i, j) = acc;
    }
  return out;
}

struct SsimFields {
  Image mu_f, mu_g, mu_ff, mu_gg, mu_fg;
};

SsimFields ssim_fields(const Image& f, const Image& g,
                       const std::vector<double>& w) {
  Image ff(f.height(), f.width()), gg(f.height(), f.width()),
      fg(f.height(), f.width());
  for (std::size_t t = 0; t < f.size(); ++t) {
    ff.data()[t] = f.data()[t] * f.data()[t];
    gg.data()[t] = g.data()[t] * g.data()[t];
    fg.data()[t] = f.data()[t] * g.data()[t];
  }
  return {window_filter_valid(f, w), window_filter_valid(g, w),
          window_filter_valid(ff, w), window_filter_valid(gg, w),
          window_filter_valid(fg, w)};
}

void check_ssim_inputs(const Image& f, const Image& g, const SsimConfig& cfg) {
  require_same_shape(f, g, "ssim");
  if (f.height() < cfg.window || f.width() < cfg.window)
    throw ShapeError("ssim: image " + f.shape_str() +
                     " smaller than the window (" +
                     std::to_string(cfg.window) + ")");
}

}  // namespace

double mse(const Image& f, const Image& g) {
  require_same_shape(f, g, "mse");
  if (f.size() == 0) throw DataError("mse: empty images");
  double acc = 0.0;
  for (std::size_t t = 0; t < f.size(); ++t) {
    const double d = f.data()[t] - g.data()[t];
    acc += d * d;
  }
  return acc / static_cast<double>(f.size());
}

std::optional<double> psnr(const Image& f, const Image& g, double peak) {
  const double m = mse(f, g);
  if (m == 0.0) return std::nullopt;  // identical images
  return 10.0 * std::log10(peak * peak / m);
}

Image ssim_map(const Image& f, const Image& g, const SsimConfig& cfg) {
  check_ssim_inputs(f, g, cfg);
  const auto w = gaussian_window(cfg.window, cfg.window_sigma);
  const SsimFields s = ssim_fields(f, g, w);
  const double c1 = cfg.c1(), c2 = cfg.c2();

  Image out(s.mu_f.height(), s.mu_f.width());
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double mf = s.mu_f.data()[t], mg = s.mu_g.data()[t];
    const double var_f = s.mu_ff.data()[t] - mf * mf;
    const double var_g = s.mu_gg.data()[t] - mg * mg;
    const double cov = s.mu_fg.data()[t] - mf * mg;
    const double a1 = 2.0 * mf * mg + c1;
    const double a2 = 2.0 * cov + c2;
    const double b1 = mf * mf + mg * mg + c1;
    const double b2 = var_f + var_g + c2;
    out.data()[t] = (a1 * a2) / (b1 * b2);
  }
  return out;
}

double ssim(const Image& f, const Image& g, const SsimConfig& cfg) {
  const Image map = ssim_map(f, g, cfg);
  double acc = 0.0;
  for (double v : map) acc += v;
  return acc / static_cast<double>(map.size());
}

Image ssim_grad(const Image& f, const Image& g, const SsimConfig& cfg) {
  check_ssim_inputs(f, g, cfg);
  const auto w = gaussian_window(cfg.window, cfg.window_sigma);
  const SsimFields s = ssim_fields(f, g, w);
  const double c1 = cfg.c1(), c2 = cfg.c2();

  // Mean SSIM depends on f only through the window moments mu_f, mu_ff,
  // mu_fg; q1/q2/q3 are dS/d(those moments) per window, scattered back
  // through the window weights.
  const int hv = s.mu_f.height(), wv = s.mu_f.width();
  Image q1(hv, wv), q2(hv, wv), q3(hv, wv);
  for (std::size_t t = 0; t < q1.size(); ++t) {
    const double mf = s.mu_f.data()[t], mg = s.mu_g.data()[t];
    const double var_f = s.mu_ff.data()[t] - mf * mf;
    const double var_g = s.mu_gg.data()[t] - mg * mg;
    const double cov = s.mu_fg.data()[t] - mf * mg;
    const double a1 = 2.0 * mf * mg + c1;
    const double a2 = 2.0 * cov + c2;
    const double b1 = mf * mf + mg * mg + c1;
    const double b2 = var_f + var_g + c2;
    const double d = b1 * b2;
    const double ss = (a1 * a2) / d;
    q1.data()[t] =
        2.0 * mg * (a2 - a1) / d + 2.0 * mf * ss * (1.0 / b2 - 1.0 / b1);
    q2.data()[t] = -ss / b2;
    q3.data()[t] = 2.0 * a1 / d;
  }
  const Image t1 = window_filter_adjoint(q1, w, f.height(), f.width());
  const Image t2 = window_filter_adjoint(q2, w, f.height(), f.width());
  const Image t3 = window_filter_adjoint(q3, w, f.height(), f.width());

  Image out(f.height(), f.width());
  const double inv_p = 1.0 / static_cast<double>(hv * wv);
  for (std::size_t t = 0; t < out.size(); ++t)
    out.data()[t] = inv_p * (t1.data()[t] + 2.0 * f.data()[t] * t2.data()[t] +
                             g.data()[t] * t3.data()[t]);
  return out;
}

double combined_loss(const Image& pred, const Image& target,
                     const LossConfig& cfg) {
  require_same_shape(pred, target, "combined_loss");
  double sse = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double d = pred.data()[t] - target.data()[t];
    sse += d * d;
  }
  const double s = ssim(pred, target, cfg.ssim);
  if (cfg.form == LossForm::kProduct) return sse * (1.0 - s);
  return sse + cfg.sum_lambda * (1.0 - s);
}

Image combined_loss_grad(const Image& pred, const Image& target,
                         const LossConfig& cfg) {
  require_same_shape(pred, target, "combined_loss_grad");
  double sse = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double d = pred.data()[t] - target.data()[t];
    sse += d * d;
  }
  const double s = ssim(pred, target, cfg.ssim);
  const Image ds = ssim_grad(pred, target, cfg.ssim);

  Image out(pred.height(), pred.width());
  if (cfg.form == LossForm::kProduct) {
    const double one_minus = 1.0 - s;
    for (std::size_t t = 0; t < out.size(); ++t) {
      const double d = pred.data()[t] - target.data()[t];
      out.data()[t] = 2.0 * d * one_minus - sse * ds.data()[t];
    }
  } else {
    for (std::size_t t = 0; t < out.size(); ++t) {
      const double d = pred.data()[t] - target.data()[t];
      out.data()[t] = 2.0 * d - cfg.sum_lambda * ds.data()[t];
    }
  }
  return out;
}

MetricsRecord evaluate_pair(const Image& pred, const Image& target,
                            const SsimConfig& cfg) {
  MetricsRecord r;
  r.psnr = psnr(pred, target);
  r.ssim = ssim(pred, target, cfg);
  return r;
}

MetricsSummary aggregate(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw DataError("aggregate: empty record set");
  MetricsSummary s;
  s.count = records.size();

  double psum = 0.0, ssum = 0.0;
  std::size_t pn = 0;
  for (const MetricsRecord& r : records) {
    if (r.psnr) {
      psum += *r.psnr;
      ++pn;
    } else {
      ++s.identical;
    }
    ssum += r.ssim;
  }
  s.ssim_mean = ssum / static_cast<double>(records.size());
  if (pn > 0) s.psnr_mean = psum / static_cast<double>(pn);

  double pss = 0.0, sss = 0.0;
  for (const MetricsRecord& r : records) {
    if (r.psnr) {
      const double d = *r.psnr - s.psnr_mean;
      pss += d * d;
    }
    const double d = r.ssim - s.ssim_mean;
    sss += d * d;
  }
  if (pn > 1) s.psnr_std = std::sqrt(pss / static_cast<double>(pn - 1));
  if (records.size() > 1)
    s.ssim_std = std::sqrt(sss / static_cast<double>(records.size() - 1));
  return s;
}

std::string format_mean_std(double mean, double std, int decimals) {
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%.*f±%.*f", decimals, mean, decimals,
                std);
  return buf;
}

}  // namespace nexrl
