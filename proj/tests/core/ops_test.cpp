#include "shiftlab/core/ops.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "shiftlab/core/grad_check.hpp"
#include "shiftlab/core/random.hpp"

namespace shiftlab::ops {
namespace {

using D = BasicTensor<double>;
constexpr double kH = 1e-3;
constexpr double kTol = 1e-3;

double weighted_sum(const D& out, const D& weights) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}

// Straight loop over output cells, independent of the accumulator layout in conv2d.
D reference_conv(const D& in, const D& k) {
  const long H = in.dim(0), W = in.dim(1), Ci = in.dim(2), K = k.dim(0), Co = k.dim(3);
  D out({in.dim(0), in.dim(1), k.dim(3)});
  for (long h = 0; h < H; ++h)
    for (long w = 0; w < W; ++w)
      for (long o = 0; o < Co; ++o) {
        double s = 0;
        for (long dh = 0; dh < K; ++dh)
          for (long dw = 0; dw < K; ++dw)
            for (long i = 0; i < Ci; ++i) {
              const long y = h + dh - K / 2, x = w + dw - K / 2;
              if (y < 0 || x < 0 || y >= H || x >= W) continue;
              s += in.at(y, x, i) * k.at(dh, dw, i, o);
            }
        out.at(h, w, o) = s;
      }
  return out;
}

TEST(Conv2d, IdentityKernelIsIdentity) {
  Rng rng(1);
  const Tensor in = uniform_tensor<float>({7, 5, 1}, -2, 2, rng);
  Tensor k({3, 3, 1, 1});
  k.at(1, 1, 0, 0) = 1.0f;
  EXPECT_EQ(conv2d(in, k), in);
}

TEST(Conv2d, ZeroInputGivesZeroOutput) {
  Rng rng(2);
  const Tensor k = uniform_tensor<float>({5, 5, 2, 3}, -1, 1, rng);
  const Tensor out = conv2d(Tensor({6, 6, 2}), k);
  for (float v : out.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(out.shape(), (Shape{6, 6, 3}));
}

TEST(Conv2d, MatchesReferenceLoop) {
  Rng rng(3);
  const D in = uniform_tensor<double>({6, 7, 3}, -1, 1, rng);
  const D k = uniform_tensor<double>({5, 5, 3, 2}, -1, 1, rng);
  const D a = conv2d(in, k), b = reference_conv(in, k);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Conv2d, ShapeMismatchNamesAxis) {
  try {
    conv2d(Tensor({4, 4, 2}), Tensor({3, 3, 3, 1}));
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("axis 2"), std::string::npos);
  }
  EXPECT_THROW(conv2d(Tensor({4, 4, 1}), Tensor({2, 2, 1, 1})), DimensionError);
}

struct ConvCase {
  Shape input, kernel;
};

class Conv2dGradient : public ::testing::TestWithParam<ConvCase> {};

TEST_P(Conv2dGradient, MatchesFiniteDifferences) {
  Rng rng(11);
  const auto& c = GetParam();
  const D in = uniform_tensor<double>(c.input, -1, 1, rng);
  const D k = uniform_tensor<double>(c.kernel, -1, 1, rng);
  const D w = uniform_tensor<double>({c.input[0], c.input[1], c.kernel[3]}, -1, 1, rng);
  const auto g = conv2d_backward(in, k, w);
  const auto r = grad_check<double>(
      [&](const std::vector<D>& x) { return weighted_sum(conv2d(x[0], x[1]), w); }, {in, k},
      {g.input, g.kernel}, kH);
  EXPECT_LT(r.max_relative_error, kTol);
}

INSTANTIATE_TEST_SUITE_P(Shapes, Conv2dGradient,
                         ::testing::Values(ConvCase{{6, 6, 2}, {3, 3, 2, 2}},
                                           ConvCase{{5, 7, 1}, {5, 5, 1, 3}},
                                           ConvCase{{4, 4, 3}, {3, 3, 3, 1}}));

TEST(Conv2d, FloatPathTracksDoublePath) {
  Rng rng(4);
  const D in = uniform_tensor<double>({8, 8, 4}, -1, 1, rng);
  const D k = uniform_tensor<double>({5, 5, 4, 4}, -1, 1, rng);
  const Tensor out_f = conv2d(in.cast<float>(), k.cast<float>());
  const D out_d = conv2d(in.cast<float>().cast<double>(), k.cast<float>().cast<double>());
  for (std::size_t i = 0; i < out_f.size(); ++i) EXPECT_NEAR(out_f[i], out_d[i], 1e-5);
}

TEST(Conv2d, Deterministic) {
  Rng rng(5);
  const Tensor in = uniform_tensor<float>({14, 14, 10}, -1, 1, rng);
  const Tensor k = uniform_tensor<float>({5, 5, 10, 10}, -1, 1, rng);
  EXPECT_EQ(conv2d(in, k), conv2d(in, k));
}

TEST(Dense, IdentityAndBiasOnly) {
  Tensor x({3}, {1.5f, -2.0f, 0.25f});
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0f;
  EXPECT_EQ(dense(x, eye, Tensor({3})), x);
  Tensor b({2}, {0.5f, -3.0f});
  EXPECT_EQ(dense(x, Tensor({3, 2}), b), b);
  EXPECT_THROW(dense(x, Tensor({2, 2}), b), DimensionError);
}

TEST(Dense, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  for (auto [din, dout] : {std::pair<std::size_t, std::size_t>{4, 3}, {7, 5}}) {
    const D x = uniform_tensor<double>({din}, -1, 1, rng);
    const D W = uniform_tensor<double>({din, dout}, -1, 1, rng);
    const D b = uniform_tensor<double>({dout}, -1, 1, rng);
    const D w = uniform_tensor<double>({dout}, -1, 1, rng);
    const auto g = dense_backward(x, W, w);
    const auto r = grad_check<double>(
        [&](const std::vector<D>& in) { return weighted_sum(dense(in[0], in[1], in[2]), w); },
        {x, W, b}, {g.input, g.weights, g.bias}, kH);
    EXPECT_LT(r.max_relative_error, kTol) << din << "->" << dout;
  }
}

TEST(Elementwise, ReluAndSigmoidValues) {
  const Tensor x({3}, {-1.0f, 2.0f, 0.0f});
  const Tensor r = relu(x);
  EXPECT_EQ(r[0], 0.0f);
  EXPECT_EQ(r[1], 2.0f);
  EXPECT_EQ(sigmoid(0.0f), 0.5f);
  const Tensor s = sigmoid(Tensor({2}, {-80.0f, 80.0f}));
  EXPECT_GT(s[0], 0.0f);
  EXPECT_LT(s[0], 1e-30f);
  EXPECT_EQ(s[1], 1.0f);
  const Tensor g = relu_backward(x, Tensor({3}, {1, 1, 1}));
  EXPECT_EQ(g[0], 0.0f);
  EXPECT_EQ(g[1], 1.0f);
  EXPECT_EQ(g[2], 0.0f);  // subgradient at exactly zero
}

TEST(Elementwise, ReluOutputNonNegativeSigmoidInOpenInterval) {
  Rng rng(7);
  const Tensor x = uniform_tensor<float>({1000}, -10, 10, rng);
  const Tensor r = relu(x), s = sigmoid(x);
  for (float v : r.values()) EXPECT_GE(v, 0.0f);
  for (float v : s.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Elementwise, ReluCompositeGradient) {
  // relu(conv(x)) on two shapes; inputs bounded away from the kink.
  Rng rng(8);
  for (Shape s : {Shape{5, 5, 2}, Shape{6, 4, 1}}) {
    const D x = uniform_tensor<double>(s, -1, 1, rng);
    const D k = uniform_tensor<double>({3, 3, s[2], 2}, -1, 1, rng);
    const D w = uniform_tensor<double>({s[0], s[1], 2}, -1, 1, rng);
    const D z = conv2d(x, k);
    const D gz = relu_backward(z, w);
    const auto g = conv2d_backward(x, k, gz);
    const auto r = grad_check<double>(
        [&](const std::vector<D>& in) { return weighted_sum(relu(conv2d(in[0], in[1])), w); },
        {x, k}, {g.input, g.kernel}, kH);
    EXPECT_LT(r.max_relative_error, kTol);
  }
}

TEST(Elementwise, SigmoidGradient) {
  Rng rng(9);
  for (Shape s : {Shape{6}, Shape{3, 4}}) {
    const D x = uniform_tensor<double>(s, -3, 3, rng);
    const D w = uniform_tensor<double>(s, -1, 1, rng);
    const D g = sigmoid_backward(sigmoid(x), w);
    const auto r = grad_check<double>(
        [&](const std::vector<D>& in) { return weighted_sum(sigmoid(in[0]), w); }, {x}, {g}, kH);
    EXPECT_LT(r.max_relative_error, kTol);
  }
}

TEST(BroadcastMul, OnesAndZeros) {
  Rng rng(10);
  const Tensor f = uniform_tensor<float>({4, 4, 3}, -1, 1, rng);
  EXPECT_EQ(broadcast_mul(Tensor({4, 4, 1}, 1.0f), f), f);
  const Tensor z = broadcast_mul(Tensor({4, 4}), f);
  for (float v : z.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_THROW(broadcast_mul(Tensor({4, 3, 1}), f), DimensionError);
}

TEST(BroadcastMul, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  for (Shape s : {Shape{4, 4, 3}, Shape{3, 5, 2}}) {
    const D m = uniform_tensor<double>({s[0], s[1], 1}, -1, 1, rng);
    const D f = uniform_tensor<double>(s, -1, 1, rng);
    const D w = uniform_tensor<double>(s, -1, 1, rng);
    D gm, gf;
    broadcast_mul_backward(m, f, w, &gm, &gf);
    const auto r = grad_check<double>(
        [&](const std::vector<D>& in) { return weighted_sum(broadcast_mul(in[0], in[1]), w); },
        {m, f}, {gm, gf}, kH);
    EXPECT_LT(r.max_relative_error, kTol);
  }
}

TEST(ChannelDot, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  for (Shape s : {Shape{4, 4, 3}, Shape{2, 5, 6}}) {
    const D f = uniform_tensor<double>(s, -1, 1, rng);
    const D v = uniform_tensor<double>({s[2]}, -1, 1, rng);
    const D w = uniform_tensor<double>({s[0], s[1]}, -1, 1, rng);
    D gf;
    std::vector<double> gv(s[2]);
    channel_dot_backward(f, v, w, &gf, std::span<double>(gv));
    const auto r = grad_check<double>(
        [&](const std::vector<D>& in) { return weighted_sum(channel_dot(in[0], in[1]), w); },
        {f, v}, {gf, from_accumulator<double>({s[2]}, gv)}, kH);
    EXPECT_LT(r.max_relative_error, kTol);
  }
}

TEST(Bce, FixedValues) {
  EXPECT_NEAR(bce_with_logits(Tensor({3, 3}), Tensor({3, 3}, 1.0f)), std::log(2.0), 1e-12);
  const double big = bce_with_logits(Tensor({2, 2}, 40.0f), Tensor({2, 2}, 1.0f));
  EXPECT_TRUE(std::isfinite(big));
  EXPECT_LT(big, 1e-15);
  const double wrong = bce_with_logits(Tensor({1}, 40.0f), Tensor({1}, 0.0f));
  EXPECT_NEAR(wrong, 40.0, 1e-9);
  EXPECT_THROW(bce_with_logits(Tensor({2}), Tensor({2}, 0.5f)), ValidationError);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
  Rng rng(14);
  for (Shape s : {Shape{5, 5}, Shape{3, 7}}) {
    const D z = uniform_tensor<double>(s, -4, 4, rng);
    D t(s);
    for (auto& v : t.values()) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
    const D g = bce_with_logits_backward(z, t);
    const auto r = grad_check<double>(
        [&](const std::vector<D>& in) { return bce_with_logits(in[0], t); }, {z}, {g}, kH);
    EXPECT_LT(r.max_relative_error, kTol);
  }
}

TEST(Pooling, PoolCropAndBiasGradients) {
  Rng rng(15);
  const D x = uniform_tensor<double>({8, 8, 2}, -1, 1, rng);
  const D b = uniform_tensor<double>({2}, -1, 1, rng);
  const D w = uniform_tensor<double>({2, 2, 2}, -1, 1, rng);
  auto f = [&](const std::vector<D>& in) {
    return weighted_sum(center_crop(avg_pool2(add_channel_bias(in[0], in[1])), 2), w);
  };
  const D gp = center_crop_backward(w, {4, 4, 2});
  const D gx = avg_pool2_backward(gp);
  std::vector<double> gb(2);
  add_channel_bias_backward(gx, std::span<double>(gb));
  const auto r = grad_check<double>(f, {x, b}, {gx, from_accumulator<double>({2}, gb)}, kH);
  EXPECT_LT(r.max_relative_error, kTol);
  EXPECT_THROW(avg_pool2(Tensor({3, 4, 1})), DimensionError);
  EXPECT_THROW(center_crop(Tensor({5, 5, 1}), 2), DimensionError);
}

TEST(GradCheck, RelativeErrorFormula) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 3.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-9 / 1e-8);
}

TEST(GradCheck, DetectsWrongGradient) {
  const D x({2}, {0.5, -0.25});
  const D wrong({2}, {1.0, 1.0});
  auto f = [](const std::vector<D>& in) { return in[0][0] * in[0][0] + 3 * in[0][1]; };
  EXPECT_GT(grad_check<double>(f, {x}, {wrong}, kH).max_relative_error, 0.1);
  const D right({2}, {1.0, 3.0});
  EXPECT_LT(grad_check<double>(f, {x}, {right}, kH).max_relative_error, 1e-9);
}

}  // namespace
}  // namespace shiftlab::ops
