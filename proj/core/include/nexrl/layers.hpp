#pragma once

#include <utility>
#include <vector>

#include "nexrl/tensor.hpp"

namespace nexrl {

/// Every convolution in the model is 3x3, stride 1, zero padding 1.
inline constexpr int kKernelExtent = 3;
inline constexpr int kKernelTaps = kKernelExtent * kKernelExtent;

template <typename T>
struct ConvParamsT {
  int out_channels = 0;
  int in_channels = 0;
  std::vector<T> kernels;  // [Cout, Cin, 3, 3]
  std::vector<T> bias;     // [Cout]

  ConvParamsT() = default;
  ConvParamsT(int cout, int cin)
      : out_channels(cout),
        in_channels(cin),
        kernels(static_cast<std::size_t>(cout) * cin * kKernelTaps, T(0)),
        bias(cout, T(0)) {}

  T* kernel(int co, int ci) {
    return kernels.data() +
           (static_cast<std::size_t>(co) * in_channels + ci) * kKernelTaps;
  }
  const T* kernel(int co, int ci) const {
    return kernels.data() +
           (static_cast<std::size_t>(co) * in_channels + ci) * kKernelTaps;
  }
};

template <typename T>
struct BatchNormParamsT {
  int channels = 0;
  std::vector<T> gamma;
  std::vector<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T epsilon = T(1e-5);

  BatchNormParamsT() = default;
  explicit BatchNormParamsT(int c)
      : channels(c),
        gamma(c, T(1)),
        beta(c, T(0)),
        running_mean(c, T(0)),
        running_var(c, T(1)) {}
};

enum class Mode { kTrain, kEval };

using ConvParams = ConvParamsT<float>;
using BatchNormParams = BatchNormParamsT<float>;

// ---- convolution ----

/// Same-size 3x3 convolution with zero padding 1:
///   out[n,co,i,j] = bias[co] + sum_{ci,di,dj} x[n,ci,i+di-1,j+dj-1] * k[co,ci,di,dj]
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const ConvParamsT<T>& p);

template <typename T>
struct Conv2dGrads {
  TensorT<T> x;
  ConvParamsT<T> params;  // gradient holder, same shapes as the parameters
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& grad_out,
                               const TensorT<T>& cached_x,
                               const ConvParamsT<T>& p);

// ---- batch normalization ----

template <typename T>
struct BatchNormCache {
  bool train = false;
  TensorT<T> x_hat;        // normalized input
  std::vector<T> inv_std;  // per channel, 1/sqrt(batch_var + eps)
  std::vector<T> batch_mean;
  std::vector<T> batch_var;  // biased (1/M) batch variance
};

/// Train mode normalizes with batch statistics over (N,H,W) per channel,
/// updates p.running_* by exponential moving average (running_var uses the
/// unbiased variance), and fills the cache. Eval mode uses running stats.
/// Train mode rejects batches with N*H*W == 1.
template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, BatchNormParamsT<T>& p,
                             Mode mode, BatchNormCache<T>* cache = nullptr);

/// Eval-only forward over const parameters.
template <typename T>
TensorT<T> batchnorm_forward_eval(const TensorT<T>& x,
                                  const BatchNormParamsT<T>& p);

template <typename T>
struct BatchNormGrads {
  TensorT<T> x;
  std::vector<T> gamma;
  std::vector<T> beta;
};

/// Analytic gradients including the dependence of the batch mean/variance on
/// x. Rejects caches written by an eval-mode forward.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const TensorT<T>& grad_out,
                                     const BatchNormCache<T>& cache,
                                     const BatchNormParamsT<T>& p);

// ---- activation ----

template <typename T>
TensorT<T> relu(const TensorT<T>& x);

/// Subgradient at exactly 0 is 0: grad passes only where x > 0.
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& grad_out, const TensorT<T>& cached_x);

// ---- structural ops ----

template <typename T>
TensorT<T> channel_concat(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
std::pair<TensorT<T>, TensorT<T>> channel_concat_backward(
    const TensorT<T>& grad_out, int channels_a, int channels_b);

template <typename T>
TensorT<T> elementwise_add(const TensorT<T>& a, const TensorT<T>& b);

/// Averages channel i with channel i + C/2; [N,2k,H,W] -> [N,k,H,W].
template <typename T>
TensorT<T> channel_mean_pair(const TensorT<T>& x);

/// Backward of channel_mean_pair: each half receives grad/2.
template <typename T>
TensorT<T> channel_mean_pair_backward(const TensorT<T>& grad_out);

// ---- complex magnitude ----

/// x has exactly 2 channels (real, imaginary);
/// out = sqrt(re^2 + im^2 + eps), eps removes the gradient singularity at 0.
template <typename T>
TensorT<T> magnitude(const TensorT<T>& x, T eps);

template <typename T>
TensorT<T> magnitude_backward(const TensorT<T>& grad_out,
                              const TensorT<T>& cached_x, T eps);

// ---- small helpers ----

/// dst += src (shapes must match).
template <typename T>
void accumulate(TensorT<T>& dst, const TensorT<T>& src);

template <typename T>
TensorT<T> scaled(const TensorT<T>& x, T factor);

}  // namespace nexrl
