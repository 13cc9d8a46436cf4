#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "nexrl/layers.hpp"
#include "nexrl/rng.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

namespace nexrl {
namespace {

using testing::check_gradient;
using testing::conv3x3_reference;
using testing::project;
using testing::random_projection;
using testing::random_tensor;

using DTensor = TensorT<double>;
using DConv = ConvParamsT<double>;
using DBatchNorm = BatchNormParamsT<double>;

DConv identity_conv(int channels) {
  DConv p(channels, channels);
  for (int c = 0; c < channels; ++c) p.kernel(c, c)[4] = 1.0;  // center tap
  return p;
}

TEST(Conv, IdentityKernelReproducesInput) {
  Rng rng(11);
  const DTensor x = random_tensor(rng, 2, 3, 5, 7);
  const DTensor y = conv2d_forward(x, identity_conv(3));
  ASSERT_TRUE(y.same_shape(x));
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_DOUBLE_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv, IdentityKernelComposedManyTimesIsExact) {
  Rng rng(12);
  DTensor x = random_tensor(rng, 1, 2, 6, 6);
  const DTensor original = x;
  const DConv id = identity_conv(2);
  for (int step = 0; step < 10; ++step) x = conv2d_forward(x, id);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_EQ(x.data()[i], original.data()[i]);
}

// All-ones kernel over an all-ones 3x3 image counts the in-bounds taps:
// 9 at the center, 6 on edges, 4 in corners.
TEST(Conv, OnesKernelCountsInBoundsNeighbors) {
  DTensor x(1, 1, 3, 3, 1.0);
  DConv p(1, 1);
  for (int t = 0; t < kKernelTaps; ++t) p.kernel(0, 0)[t] = 1.0;
  const DTensor y = conv2d_forward(x, p);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 1), 9.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 1), 6.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 0), 6.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 2, 2), 4.0);
}

TEST(Conv, ZeroKernelLeavesBias) {
  Rng rng(13);
  const DTensor x = random_tensor(rng, 1, 4, 4, 4);
  DConv p(2, 4);
  p.bias[0] = 2.5;
  p.bias[1] = -1.0;
  const DTensor y = conv2d_forward(x, p);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      EXPECT_DOUBLE_EQ(y.at(0, 0, i, j), 2.5);
      EXPECT_DOUBLE_EQ(y.at(0, 1, i, j), -1.0);
    }
}

TEST(Conv, MatchesBruteForceReference) {
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    const DTensor x = random_tensor(rng, 2, 3, 6, 5);
    DConv p(4, 3);
    for (double& v : p.kernels) v = rng.uniform(-1.0, 1.0);
    for (double& v : p.bias) v = rng.uniform(-1.0, 1.0);
    const DTensor fast = conv2d_forward(x, p);
    const DTensor ref = conv3x3_reference(x, p.kernels, p.bias, 4);
    ASSERT_TRUE(fast.same_shape(ref));
    for (std::size_t i = 0; i < fast.size(); ++i)
      EXPECT_NEAR(fast.data()[i], ref.data()[i], 1e-12);
  }
}

TEST(Conv, IsLinearInTheInput) {
  Rng rng(15);
  const DTensor x = random_tensor(rng, 1, 2, 5, 5);
  DConv p(3, 2);
  for (double& v : p.kernels) v = rng.uniform(-1.0, 1.0);
  const DTensor y1 = conv2d_forward(x, p);
  const DTensor y3 = conv2d_forward(scaled(x, 3.0), p);
  for (std::size_t i = 0; i < y1.size(); ++i)
    EXPECT_NEAR(y3.data()[i], 3.0 * y1.data()[i], 1e-12);
}

TEST(Conv, GradientsMatchFiniteDifferences) {
  Rng rng(16);
  DTensor x = random_tensor(rng, 2, 3, 4, 4);
  DConv p(2, 3);
  for (double& v : p.kernels) v = rng.uniform(-1.0, 1.0);
  for (double& v : p.bias) v = rng.uniform(-1.0, 1.0);
  const DTensor r = random_projection(rng, conv2d_forward(x, p));

  const auto loss = [&] { return project(conv2d_forward(x, p), r); };
  const Conv2dGrads<double> g = conv2d_backward(r, x, p);

  const auto gx = check_gradient(loss, x.data(), g.x.data(), x.size());
  EXPECT_LT(gx.max_rel_err, 1e-6);
  const auto gk = check_gradient(loss, p.kernels.data(),
                                 g.params.kernels.data(), p.kernels.size());
  EXPECT_LT(gk.max_rel_err, 1e-6);
  const auto gb = check_gradient(loss, p.bias.data(), g.params.bias.data(),
                                 p.bias.size());
  EXPECT_LT(gb.max_rel_err, 1e-6);
}

TEST(BatchNorm, NormalizesToZeroMeanUnitVariance) {
  Rng rng(21);
  DTensor x = random_tensor(rng, 4, 3, 6, 6, -2.0, 2.0);
  DBatchNorm p(3);
  BatchNormCache<double> cache;
  const DTensor y = batchnorm_forward(x, p, Mode::kTrain, &cache);

  const std::size_t m = 4 * 6 * 6;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) mean += y.at(n, c, i, j);
    mean /= static_cast<double>(m);
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
          const double d = y.at(n, c, i, j) - mean;
          var += d * d;
        }
    var /= static_cast<double>(m);
    EXPECT_LT(std::abs(mean), 1e-10);
    // Variance misses 1 only by the epsilon regularizer: v/(v+eps).
    EXPECT_LT(std::abs(var - 1.0), 1e-4);
  }
}

TEST(BatchNorm, ZeroGammaOutputsConstantBeta) {
  Rng rng(22);
  DTensor x = random_tensor(rng, 2, 2, 4, 4);
  DBatchNorm p(2);
  p.gamma.assign(2, 0.0);
  p.beta = {0.7, -0.3};
  const DTensor y = batchnorm_forward(x, p, Mode::kTrain);
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        EXPECT_DOUBLE_EQ(y.at(n, 0, i, j), 0.7);
        EXPECT_DOUBLE_EQ(y.at(n, 1, i, j), -0.3);
      }
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  Rng rng(23);
  DTensor x = random_tensor(rng, 3, 2, 4, 4);
  const DTensor r = random_projection(rng, x);

  DBatchNorm p(2);
  for (double& v : p.gamma) v = rng.uniform(0.5, 1.5);
  for (double& v : p.beta) v = rng.uniform(-0.5, 0.5);

  // Fresh parameter copy per evaluation: train mode mutates running stats.
  const auto loss = [&] {
    DBatchNorm fresh = p;
    return project(batchnorm_forward(x, fresh, Mode::kTrain), r);
  };

  DBatchNorm used = p;
  BatchNormCache<double> cache;
  batchnorm_forward(x, used, Mode::kTrain, &cache);
  const BatchNormGrads<double> g = batchnorm_backward(r, cache, p);

  const auto gx = check_gradient(loss, x.data(), g.x.data(), x.size());
  EXPECT_LT(gx.max_rel_err, 1e-5);
  const auto gg =
      check_gradient(loss, p.gamma.data(), g.gamma.data(), p.gamma.size());
  EXPECT_LT(gg.max_rel_err, 1e-6);
  const auto gb =
      check_gradient(loss, p.beta.data(), g.beta.data(), p.beta.size());
  EXPECT_LT(gb.max_rel_err, 1e-6);
}

TEST(BatchNorm, RejectsSingleElementTrainBatches) {
  DTensor x(1, 3, 1, 1, 1.0);
  DBatchNorm p(3);
  EXPECT_THROW(batchnorm_forward(x, p, Mode::kTrain), ShapeError);
  // The same shape is fine in eval mode.
  EXPECT_NO_THROW(batchnorm_forward(x, p, Mode::kEval));
}

TEST(BatchNorm, RejectsEvalCacheInBackward) {
  Rng rng(24);
  DTensor x = random_tensor(rng, 2, 2, 3, 3);
  DBatchNorm p(2);
  BatchNormCache<double> cache;
  batchnorm_forward(x, p, Mode::kEval, &cache);
  EXPECT_THROW(batchnorm_backward(x, cache, p), ShapeError);
}

TEST(BatchNorm, ConstantChannelBackpropagatesFiniteZeros) {
  DTensor x(2, 1, 3, 3, 4.2);  // zero batch variance
  DBatchNorm p(1);
  BatchNormCache<double> cache;
  const DTensor y = batchnorm_forward(x, p, Mode::kTrain, &cache);
  EXPECT_TRUE(y.all_finite());

  DTensor grad(2, 1, 3, 3, 1.0);
  const BatchNormGrads<double> g = batchnorm_backward(grad, cache, p);
  EXPECT_TRUE(g.x.all_finite());
  for (double v : g.x) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(BatchNorm, EvalModeUsesRunningStatistics) {
  DBatchNorm p(1);
  p.running_mean = {2.0};
  p.running_var = {4.0};
  DTensor x(1, 1, 2, 2, 6.0);
  const DTensor y = batchnorm_forward(x, p, Mode::kEval);
  // (6 - 2) / sqrt(4 + 1e-5) ~= 2.
  EXPECT_NEAR(y.at(0, 0, 0, 0), 2.0, 1e-5);
}

TEST(Relu, ClampsNegativesAndGatesGradient) {
  DTensor x(1, 3, 1, 1);
  x.at(0, 0, 0, 0) = -1.0;
  x.at(0, 1, 0, 0) = 0.0;
  x.at(0, 2, 0, 0) = 2.0;
  const DTensor y = relu(x);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(y.at(0, 1, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(y.at(0, 2, 0, 0), 2.0);

  DTensor grad(1, 3, 1, 1, 5.0);
  const DTensor gx = relu_backward(grad, x);
  EXPECT_DOUBLE_EQ(gx.at(0, 0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(gx.at(0, 1, 0, 0), 0.0);  // subgradient at 0 is 0
  EXPECT_DOUBLE_EQ(gx.at(0, 2, 0, 0), 5.0);
}

TEST(Relu, GradientMatchesFiniteDifferencesAwayFromKink) {
  Rng rng(31);
  DTensor x = random_tensor(rng, 2, 2, 4, 4);
  for (double& v : x)
    if (std::abs(v) < 0.05) v = 0.1;  // keep clear of the kink
  const DTensor r = random_projection(rng, x);
  const auto loss = [&] { return project(relu(x), r); };
  const DTensor g = relu_backward(r, x);
  const auto res = check_gradient(loss, x.data(), g.data(), x.size());
  EXPECT_LT(res.max_rel_err, 1e-6);
}

TEST(Structural, ConcatStacksChannelsAndSplitsGradient) {
  Rng rng(41);
  const DTensor a = random_tensor(rng, 1, 2, 3, 3);
  const DTensor b = random_tensor(rng, 1, 3, 3, 3);
  const DTensor y = channel_concat(a, b);
  ASSERT_EQ(y.channels(), 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(y.at(0, 0, i, j), a.at(0, 0, i, j));
      EXPECT_EQ(y.at(0, 1, i, j), a.at(0, 1, i, j));
      EXPECT_EQ(y.at(0, 2, i, j), b.at(0, 0, i, j));
      EXPECT_EQ(y.at(0, 4, i, j), b.at(0, 2, i, j));
    }

  const auto [ga, gb] = channel_concat_backward(y, 2, 3);
  ASSERT_TRUE(ga.same_shape(a));
  ASSERT_TRUE(gb.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(ga.data()[i], a.data()[i]);
  for (std::size_t i = 0; i < b.size(); ++i)
    EXPECT_EQ(gb.data()[i], b.data()[i]);
}

TEST(Structural, AddWithZeroIsIdentity) {
  Rng rng(42);
  const DTensor x = random_tensor(rng, 2, 2, 3, 3);
  const DTensor zero = DTensor::zeros_like(x);
  const DTensor y = elementwise_add(x, zero);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_EQ(y.data()[i], x.data()[i]);
}

TEST(Structural, MeanPairAveragesChannelHalves) {
  DTensor x(1, 4, 1, 2);
  // Channels: Re1 Im1 Re2 Im2.
  x.at(0, 0, 0, 0) = 1.0;
  x.at(0, 1, 0, 0) = 2.0;
  x.at(0, 2, 0, 0) = 3.0;
  x.at(0, 3, 0, 0) = 6.0;
  const DTensor y = channel_mean_pair(x);
  ASSERT_EQ(y.channels(), 2);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 2.0);
  EXPECT_DOUBLE_EQ(y.at(0, 1, 0, 0), 4.0);

  // A duplicated pair averages to itself.
  Rng rng(43);
  DTensor pair(1, 4, 3, 3);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double v = rng.uniform(-1.0, 1.0);
        pair.at(0, c, i, j) = v;
        pair.at(0, c + 2, i, j) = v;
      }
  const DTensor same = channel_mean_pair(pair);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        EXPECT_EQ(same.at(0, c, i, j), pair.at(0, c, i, j));

  // Backward: each half receives grad/2.
  DTensor grad(1, 2, 1, 2, 3.0);
  const DTensor gx = channel_mean_pair_backward(grad);
  ASSERT_EQ(gx.channels(), 4);
  for (int c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(gx.at(0, c, 0, 0), 1.5);
}

TEST(Magnitude, ComputesComplexModulus) {
  DTensor x(1, 2, 1, 2);
  x.at(0, 0, 0, 0) = 3.0;
  x.at(0, 1, 0, 0) = 4.0;
  x.at(0, 0, 0, 1) = 0.0;
  x.at(0, 1, 0, 1) = 0.0;
  const DTensor y = magnitude(x, 1e-12);
  ASSERT_EQ(y.channels(), 1);
  EXPECT_NEAR(y.at(0, 0, 0, 0), 5.0, 1e-12);
  // The epsilon floor keeps the origin differentiable: sqrt(eps) = 1e-6.
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 1), 1e-6);

  EXPECT_THROW(magnitude(DTensor(1, 3, 2, 2), 1e-12), ShapeError);
}

TEST(Magnitude, GradientMatchesFiniteDifferences) {
  Rng rng(51);
  DTensor x = random_tensor(rng, 2, 2, 4, 4);
  for (double& v : x) v += (v >= 0 ? 0.5 : -0.5);  // stay away from 0 modulus
  const DTensor r = random_projection(rng, magnitude(x, 1e-12));
  const auto loss = [&] { return project(magnitude(x, 1e-12), r); };
  const DTensor g = magnitude_backward(r, x, 1e-12);
  const auto res = check_gradient(loss, x.data(), g.data(), x.size());
  EXPECT_LT(res.max_rel_err, 1e-6);
}

TEST(Helpers, AccumulateAndScale) {
  Rng rng(61);
  DTensor a = random_tensor(rng, 1, 2, 2, 2);
  const DTensor b = random_tensor(rng, 1, 2, 2, 2);
  DTensor sum = a;
  accumulate(sum, b);
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_DOUBLE_EQ(sum.data()[i], a.data()[i] + b.data()[i]);
  const DTensor twice = scaled(a, 2.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    EXPECT_DOUBLE_EQ(twice.data()[i], 2.0 * a.data()[i]);
}

}  // namespace
}  // namespace nexrl
