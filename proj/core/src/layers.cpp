#include "nexrl/layers.hpp"

#include <algorithm>
#include <cmath>

namespace nexrl {
namespace {

// Adds one 3x3-filtered input plane into an output plane. Row variants are
// instantiated per boundary case so the interior loop stays branch-free and
// vectorizable.
template <typename T, bool kHasTop, bool kHasBot>
void conv_row(const T* __restrict xm, const T* __restrict x0,
              const T* __restrict xp, T* __restrict y, const T* __restrict k,
              int w) {
  {
    T acc = k[4] * x0[0];
    if (w > 1) acc += k[5] * x0[1];
    if constexpr (kHasTop) {
      acc += k[1] * xm[0];
      if (w > 1) acc += k[2] * xm[1];
    }
    if constexpr (kHasBot) {
      acc += k[7] * xp[0];
      if (w > 1) acc += k[8] * xp[1];
    }
    y[0] += acc;
  }
  for (int j = 1; j + 1 < w; ++j) {
    T acc = k[3] * x0[j - 1] + k[4] * x0[j] + k[5] * x0[j + 1];
    if constexpr (kHasTop)
      acc += k[0] * xm[j - 1] + k[1] * xm[j] + k[2] * xm[j + 1];
    if constexpr (kHasBot)
      acc += k[6] * xp[j - 1] + k[7] * xp[j] + k[8] * xp[j + 1];
    y[j] += acc;
  }
  if (w > 1) {
    const int j = w - 1;
    T acc = k[3] * x0[j - 1] + k[4] * x0[j];
    if constexpr (kHasTop) acc += k[0] * xm[j - 1] + k[1] * xm[j];
    if constexpr (kHasBot) acc += k[6] * xp[j - 1] + k[7] * xp[j];
    y[j] += acc;
  }
}

template <typename T>
void conv_plane_accumulate(const T* x, T* y, const T* k, int h, int w) {
  for (int i = 0; i < h; ++i) {
    const T* xm = x + static_cast<std::ptrdiff_t>(i - 1) * w;
    const T* x0 = x + static_cast<std::ptrdiff_t>(i) * w;
    const T* xp = x + static_cast<std::ptrdiff_t>(i + 1) * w;
    T* yr = y + static_cast<std::ptrdiff_t>(i) * w;
    const bool top = i > 0;
    const bool bot = i + 1 < h;
    if (top && bot)
      conv_row<T, true, true>(xm, x0, xp, yr, k, w);
    else if (top)
      conv_row<T, true, false>(xm, x0, nullptr, yr, k, w);
    else if (bot)
      conv_row<T, false, true>(nullptr, x0, xp, yr, k, w);
    else
      conv_row<T, false, false>(nullptr, x0, nullptr, yr, k, w);
  }
}

// Dot product accumulated in independent lanes; the lanes have no
// cross-iteration dependency, so the loop vectorizes in strict FP mode.
template <typename T>
T lane_dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  T lanes[kLanes] = {};
  std::size_t base = 0;
  for (; base + kLanes <= n; base += kLanes)
    for (std::size_t k = 0; k < kLanes; ++k)
      lanes[k] += a[base + k] * b[base + k];
  T total = T(0);
  for (; base < n; ++base) total += a[base] * b[base];
  for (std::size_t k = 0; k < kLanes; ++k) total += lanes[k];
  return total;
}

}  // namespace

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvParamsT<T>& p) {
  if (x.channels() != p.in_channels)
    throw ShapeError("conv2d_forward: input has " +
                     std::to_string(x.channels()) + " channels, kernels expect " +
                     std::to_string(p.in_channels));
  if (x.height() < 1 || x.width() < 1)
    throw ShapeError("conv2d_forward: empty spatial extent " + x.shape_str());

  const int h = x.height(), w = x.width();
  TensorT<T> y(x.batch(), p.out_channels, h, w);
  for (int n = 0; n < x.batch(); ++n) {
    for (int co = 0; co < p.out_channels; ++co) {
      T* yp = y.plane(n, co);
      std::fill(yp, yp + y.plane_size(), p.bias[co]);
      for (int ci = 0; ci < p.in_channels; ++ci)
        conv_plane_accumulate(x.plane(n, ci), yp, p.kernel(co, ci), h, w);
    }
  }
  return y;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& grad_out,
                               const TensorT<T>& cached_x,
                               const ConvParamsT<T>& p) {
  if (cached_x.channels() != p.in_channels ||
      grad_out.channels() != p.out_channels ||
      grad_out.batch() != cached_x.batch() ||
      grad_out.height() != cached_x.height() ||
      grad_out.width() != cached_x.width())
    throw ShapeError("conv2d_backward: grad_out " + grad_out.shape_str() +
                     " does not match x " + cached_x.shape_str());

  const int h = cached_x.height(), w = cached_x.width();
  Conv2dGrads<T> grads{TensorT<T>::zeros_like(cached_x),
                       ConvParamsT<T>(p.out_channels, p.in_channels)};

  // grad_x: full correlation of grad_out with the 180-degree rotated kernels.
  for (int n = 0; n < cached_x.batch(); ++n) {
    for (int ci = 0; ci < p.in_channels; ++ci) {
      T* gx = grads.x.plane(n, ci);
      for (int co = 0; co < p.out_channels; ++co) {
        const T* k = p.kernel(co, ci);
        T rot[kKernelTaps];
        for (int t = 0; t < kKernelTaps; ++t) rot[t] = k[kKernelTaps - 1 - t];
        conv_plane_accumulate(grad_out.plane(n, co), gx, rot, h, w);
      }
    }
  }

  // grad_bias.
  for (int co = 0; co < p.out_channels; ++co) {
    T bias_acc = T(0);
    for (int n = 0; n < grad_out.batch(); ++n) {
      const T* go = grad_out.plane(n, co);
      for (std::size_t t = 0; t < grad_out.plane_size(); ++t) bias_acc += go[t];
    }
    grads.params.bias[co] = bias_acc;
  }

  // grad_kernels: lay both planes out with two spare columns so every tap
  // becomes one contiguous dot product (the spare columns of the grad plane
  // are zero, cancelling the wrapped-around products), then accumulate in
  // fixed-width lanes that vectorize without reordering a scalar reduction.
  const int pw = w + 2;
  const std::size_t plane_len = static_cast<std::size_t>(h) * pw;
  std::vector<T> xpad(static_cast<std::size_t>(h + 4) * pw, T(0));
  std::vector<T> gq(static_cast<std::size_t>(p.out_channels) * plane_len,
                    T(0));
  for (int n = 0; n < grad_out.batch(); ++n) {
    for (int co = 0; co < p.out_channels; ++co) {
      const T* go = grad_out.plane(n, co);
      T* dst = gq.data() + static_cast<std::size_t>(co) * plane_len;
      for (int i = 0; i < h; ++i)
        std::copy(go + static_cast<std::ptrdiff_t>(i) * w,
                  go + static_cast<std::ptrdiff_t>(i + 1) * w,
                  dst + static_cast<std::ptrdiff_t>(i) * pw);
    }
    for (int ci = 0; ci < p.in_channels; ++ci) {
      const T* xp = cached_x.plane(n, ci);
      for (int i = 0; i < h; ++i)
        std::copy(xp + static_cast<std::ptrdiff_t>(i) * w,
                  xp + static_cast<std::ptrdiff_t>(i + 1) * w,
                  xpad.begin() + static_cast<std::ptrdiff_t>(i + 1) * pw + 1);
      for (int co = 0; co < p.out_channels; ++co) {
        const T* gplane = gq.data() + static_cast<std::size_t>(co) * plane_len;
        T* gk = grads.params.kernel(co, ci);
        for (int di = 0; di < kKernelExtent; ++di)
          for (int dj = 0; dj < kKernelExtent; ++dj)
            gk[di * kKernelExtent + dj] += lane_dot(
                gplane, xpad.data() + static_cast<std::ptrdiff_t>(di) * pw + dj,
                plane_len);
      }
    }
  }
  return grads;
}

template <typename T>
TensorT<T> batchnorm_forward_eval(const TensorT<T>& x,
                                  const BatchNormParamsT<T>& p) {
  if (x.channels() != p.channels)
    throw ShapeError("batchnorm: input has " + std::to_string(x.channels()) +
                     " channels, params expect " + std::to_string(p.channels));
  TensorT<T> y = TensorT<T>::zeros_like(x);
  for (int c = 0; c < p.channels; ++c) {
    const T inv_std =
        T(1) / std::sqrt(p.running_var[c] + p.epsilon);
    const T g = p.gamma[c] * inv_std;
    const T b = p.beta[c] - p.running_mean[c] * g;
    for (int n = 0; n < x.batch(); ++n) {
      const T* xp = x.plane(n, c);
      T* yp = y.plane(n, c);
      for (std::size_t t = 0; t < x.plane_size(); ++t) yp[t] = g * xp[t] + b;
    }
  }
  return y;
}

template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, BatchNormParamsT<T>& p,
                             Mode mode, BatchNormCache<T>* cache) {
  if (mode == Mode::kEval) return batchnorm_forward_eval(x, p);
  if (x.channels() != p.channels)
    throw ShapeError("batchnorm: input has " + std::to_string(x.channels()) +
                     " channels, params expect " + std::to_string(p.channels));
  const std::size_t m =
      static_cast<std::size_t>(x.batch()) * x.plane_size();
  if (m <= 1)
    throw ShapeError(
        "batchnorm_forward: train mode needs N*H*W > 1 per channel, got " +
        x.shape_str());

  TensorT<T> y = TensorT<T>::zeros_like(x);
  BatchNormCache<T> local;
  BatchNormCache<T>& c_ = cache ? *cache : local;
  c_.train = true;
  c_.x_hat = TensorT<T>::zeros_like(x);
  c_.inv_std.assign(p.channels, T(0));
  c_.batch_mean.assign(p.channels, T(0));
  c_.batch_var.assign(p.channels, T(0));

  for (int c = 0; c < p.channels; ++c) {
    double sum = 0.0, sum_sq = 0.0;
    for (int n = 0; n < x.batch(); ++n) {
      const T* xp = x.plane(n, c);
      for (std::size_t t = 0; t < x.plane_size(); ++t) {
        const double v = static_cast<double>(xp[t]);
        sum += v;
        sum_sq += v * v;
      }
    }
    const double mean = sum / static_cast<double>(m);
    const double var =
        std::max(0.0, sum_sq / static_cast<double>(m) - mean * mean);
    const T inv_std = T(1.0 / std::sqrt(var + static_cast<double>(p.epsilon)));
    c_.batch_mean[c] = T(mean);
    c_.batch_var[c] = T(var);
    c_.inv_std[c] = inv_std;

    for (int n = 0; n < x.batch(); ++n) {
      const T* xp = x.plane(n, c);
      T* xh = c_.x_hat.plane(n, c);
      T* yp = y.plane(n, c);
      const T mu = T(mean);
      for (std::size_t t = 0; t < x.plane_size(); ++t) {
        const T h = (xp[t] - mu) * inv_std;
        xh[t] = h;
        yp[t] = p.gamma[c] * h + p.beta[c];
      }
    }

    const double var_unbiased =
        var * static_cast<double>(m) / static_cast<double>(m - 1);
    p.running_mean[c] =
        (T(1) - p.momentum) * p.running_mean[c] + p.momentum * T(mean);
    p.running_var[c] =
        (T(1) - p.momentum) * p.running_var[c] + p.momentum * T(var_unbiased);
  }
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const TensorT<T>& grad_out,
                                     const BatchNormCache<T>& cache,
                                     const BatchNormParamsT<T>& p) {
  if (!cache.train)
    throw ShapeError(
        "batchnorm_backward: gradients are defined for train-mode caches only");
  require_same_shape(grad_out, cache.x_hat, "batchnorm_backward");

  const std::size_t m =
      static_cast<std::size_t>(grad_out.batch()) * grad_out.plane_size();
  BatchNormGrads<T> grads{TensorT<T>::zeros_like(grad_out),
                          std::vector<T>(p.channels, T(0)),
                          std::vector<T>(p.channels, T(0))};

  for (int c = 0; c < p.channels; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int n = 0; n < grad_out.batch(); ++n) {
      const T* go = grad_out.plane(n, c);
      const T* xh = cache.x_hat.plane(n, c);
      for (std::size_t t = 0; t < grad_out.plane_size(); ++t) {
        sum_g += static_cast<double>(go[t]);
        sum_gx += static_cast<double>(go[t]) * static_cast<double>(xh[t]);
      }
    }
    grads.beta[c] = T(sum_g);
    grads.gamma[c] = T(sum_gx);

    const T mean_g = T(sum_g / static_cast<double>(m));
    const T mean_gx = T(sum_gx / static_cast<double>(m));
    const T scale = p.gamma[c] * cache.inv_std[c];
    for (int n = 0; n < grad_out.batch(); ++n) {
      const T* go = grad_out.plane(n, c);
      const T* xh = cache.x_hat.plane(n, c);
      T* gx = grads.x.plane(n, c);
      for (std::size_t t = 0; t < grad_out.plane_size(); ++t)
        gx[t] = scale * (go[t] - mean_g - xh[t] * mean_gx);
    }
  }
  return grads;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  TensorT<T> y = TensorT<T>::zeros_like(x);
  const T* xp = x.data();
  T* yp = y.data();
  for (std::size_t t = 0; t < x.size(); ++t) yp[t] = xp[t] > T(0) ? xp[t] : T(0);
  return y;
}

template <typename T>
TensorT<T> relu_backward(const TensorT<T>& grad_out,
                         const TensorT<T>& cached_x) {
  require_same_shape(grad_out, cached_x, "relu_backward");
  TensorT<T> g = TensorT<T>::zeros_like(grad_out);
  const T* go = grad_out.data();
  const T* xp = cached_x.data();
  T* gp = g.data();
  for (std::size_t t = 0; t < grad_out.size(); ++t)
    gp[t] = xp[t] > T(0) ? go[t] : T(0);
  return g;
}

template <typename T>
TensorT<T> channel_concat(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.batch() != b.batch() || a.height() != b.height() ||
      a.width() != b.width())
    throw ShapeError("channel_concat: mismatched N/H/W " + a.shape_str() +
                     " vs " + b.shape_str());
  TensorT<T> y(a.batch(), a.channels() + b.channels(), a.height(), a.width());
  for (int n = 0; n < a.batch(); ++n) {
    for (int c = 0; c < a.channels(); ++c)
      std::copy(a.plane(n, c), a.plane(n, c) + a.plane_size(), y.plane(n, c));
    for (int c = 0; c < b.channels(); ++c)
      std::copy(b.plane(n, c), b.plane(n, c) + b.plane_size(),
                y.plane(n, a.channels() + c));
  }
  return y;
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> channel_concat_backward(
    const TensorT<T>& grad_out, int channels_a, int channels_b) {
  if (grad_out.channels() != channels_a + channels_b)
    throw ShapeError("channel_concat_backward: grad has " +
                     std::to_string(grad_out.channels()) +
                     " channels, expected " +
                     std::to_string(channels_a + channels_b));
  TensorT<T> ga(grad_out.batch(), channels_a, grad_out.height(),
                grad_out.width());
  TensorT<T> gb(grad_out.batch(), channels_b, grad_out.height(),
                grad_out.width());
  for (int n = 0; n < grad_out.batch(); ++n) {
    for (int c = 0; c < channels_a; ++c)
      std::copy(grad_out.plane(n, c), grad_out.plane(n, c) + ga.plane_size(),
                ga.plane(n, c));
    for (int c = 0; c < channels_b; ++c)
      std::copy(grad_out.plane(n, channels_a + c),
                grad_out.plane(n, channels_a + c) + gb.plane_size(),
                gb.plane(n, c));
  }
  return {std::move(ga), std::move(gb)};
}

template <typename T>
TensorT<T> elementwise_add(const TensorT<T>& a, const TensorT<T>& b) {
  require_same_shape(a, b, "elementwise_add");
  TensorT<T> y = TensorT<T>::zeros_like(a);
  const T* ap = a.data();
  const T* bp = b.data();
  T* yp = y.data();
  for (std::size_t t = 0; t < a.size(); ++t) yp[t] = ap[t] + bp[t];
  return y;
}

template <typename T>
TensorT<T> channel_mean_pair(const TensorT<T>& x) {
  if (x.channels() % 2 != 0)
    throw ShapeError("channel_mean_pair: channel count " +
                     std::to_string(x.channels()) + " is not divisible by 2");
  const int half = x.channels() / 2;
  TensorT<T> y(x.batch(), half, x.height(), x.width());
  for (int n = 0; n < x.batch(); ++n) {
    for (int c = 0; c < half; ++c) {
      const T* a = x.plane(n, c);
      const T* b = x.plane(n, c + half);
      T* yp = y.plane(n, c);
      for (std::size_t t = 0; t < x.plane_size(); ++t)
        yp[t] = (a[t] + b[t]) * T(0.5);
    }
  }
  return y;
}

template <typename T>
TensorT<T> channel_mean_pair_backward(const TensorT<T>& grad_out) {
  const int half = grad_out.channels();
  TensorT<T> g(grad_out.batch(), 2 * half, grad_out.height(),
               grad_out.width());
  for (int n = 0; n < grad_out.batch(); ++n) {
    for (int c = 0; c < half; ++c) {
      const T* go = grad_out.plane(n, c);
      T* a = g.plane(n, c);
      T* b = g.plane(n, c + half);
      for (std::size_t t = 0; t < grad_out.plane_size(); ++t) {
        const T v = go[t] * T(0.5);
        a[t] = v;
        b[t] = v;
      }
    }
  }
  return g;
}

template <typename T>
TensorT<T> magnitude(const TensorT<T>& x, T eps) {
  if (x.channels() != 2)
    throw ShapeError("magnitude: expected 2 channels (re, im), got " +
                     x.shape_str());
  TensorT<T> y(x.batch(), 1, x.height(), x.width());
  for (int n = 0; n < x.batch(); ++n) {
    const T* re = x.plane(n, 0);
    const T* im = x.plane(n, 1);
    T* yp = y.plane(n, 0);
    for (std::size_t t = 0; t < x.plane_size(); ++t)
      yp[t] = std::sqrt(re[t] * re[t] + im[t] * im[t] + eps);
  }
  return y;
}

template <typename T>
TensorT<T> magnitude_backward(const TensorT<T>& grad_out,
                              const TensorT<T>& cached_x, T eps) {
  if (cached_x.channels() != 2 || grad_out.channels() != 1 ||
      grad_out.batch() != cached_x.batch() ||
      grad_out.height() != cached_x.height() ||
      grad_out.width() != cached_x.width())
    throw ShapeError("magnitude_backward: grad " + grad_out.shape_str() +
                     " does not match input " + cached_x.shape_str());
  TensorT<T> g = TensorT<T>::zeros_like(cached_x);
  for (int n = 0; n < cached_x.batch(); ++n) {
    const T* re = cached_x.plane(n, 0);
    const T* im = cached_x.plane(n, 1);
    const T* go = grad_out.plane(n, 0);
    T* gre = g.plane(n, 0);
    T* gim = g.plane(n, 1);
    for (std::size_t t = 0; t < cached_x.plane_size(); ++t) {
      const T r = std::sqrt(re[t] * re[t] + im[t] * im[t] + eps);
      gre[t] = go[t] * re[t] / r;
      gim[t] = go[t] * im[t] / r;
    }
  }
  return g;
}

template <typename T>
void accumulate(TensorT<T>& dst, const TensorT<T>& src) {
  require_same_shape(dst, src, "accumulate");
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t t = 0; t < dst.size(); ++t) d[t] += s[t];
}

template <typename T>
TensorT<T> scaled(const TensorT<T>& x, T factor) {
  TensorT<T> y = TensorT<T>::zeros_like(x);
  const T* xp = x.data();
  T* yp = y.data();
  for (std::size_t t = 0; t < x.size(); ++t) yp[t] = xp[t] * factor;
  return y;
}

#define NEXRL_INSTANTIATE_LAYERS(T)                                          \
  template TensorT<T> conv2d_forward<T>(const TensorT<T>&,                   \
                                        const ConvParamsT<T>&);              \
  template Conv2dGrads<T> conv2d_backward<T>(                                \
      const TensorT<T>&, const TensorT<T>&, const ConvParamsT<T>&);          \
  template TensorT<T> batchnorm_forward<T>(const TensorT<T>&,                \
                                           BatchNormParamsT<T>&, Mode,       \
                                           BatchNormCache<T>*);              \
  template TensorT<T> batchnorm_forward_eval<T>(const TensorT<T>&,           \
                                                const BatchNormParamsT<T>&); \
  template BatchNormGrads<T> batchnorm_backward<T>(                          \
      const TensorT<T>&, const BatchNormCache<T>&,                           \
      const BatchNormParamsT<T>&);                                           \
  template TensorT<T> relu<T>(const TensorT<T>&);                            \
  template TensorT<T> relu_backward<T>(const TensorT<T>&, const TensorT<T>&);\
  template TensorT<T> channel_concat<T>(const TensorT<T>&,                   \
                                        const TensorT<T>&);                  \
  template std::pair<TensorT<T>, TensorT<T>> channel_concat_backward<T>(     \
      const TensorT<T>&, int, int);                                          \
  template TensorT<T> elementwise_add<T>(const TensorT<T>&,                  \
                                         const TensorT<T>&);                 \
  template TensorT<T> channel_mean_pair<T>(const TensorT<T>&);               \
  template TensorT<T> channel_mean_pair_backward<T>(const TensorT<T>&);      \
  template TensorT<T> magnitude<T>(const TensorT<T>&, T);                    \
  template TensorT<T> magnitude_backward<T>(const TensorT<T>&,               \
                                            const TensorT<T>&, T);           \
  template void accumulate<T>(TensorT<T>&, const TensorT<T>&);               \
  template TensorT<T> scaled<T>(const TensorT<T>&, T);

NEXRL_INSTANTIATE_LAYERS(float)
NEXRL_INSTANTIATE_LAYERS(double)

#undef NEXRL_INSTANTIATE_LAYERS

}  // namespace nexrl
