#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "distag/errors.hpp"
#include "distag/ops.hpp"
#include "gradcheck.hpp"

using namespace distag;
using distag::test::grad_check;
using distag::test::make_param;
using distag::test::random_tensor;

namespace {

// Scalar oracle: softmax of a two-element vector by direct exp arithmetic.
std::pair<double, double> softmax2(double a, double b, double t) {
  const double ea = std::exp(a / t), eb = std::exp(b / t);
  return {ea / (ea + eb), eb / (ea + eb)};
}

// Random projection so any-shaped op output becomes a scalar loss.
Var project(Tape& tape, const Var& out, unsigned seed) {
  std::mt19937_64 rng(seed);
  auto w = tape.constant(random_tensor(out.shape(), rng));
  return sum(mul(out, w));
}

}  // namespace

TEST(Softmax, TwoElementExamples) {
  auto [p0, p1] = softmax2(2, 0, 1);
  auto s1 = softmax_with_temperature(Tensor::vector({2, 0}), 1.0);
  EXPECT_NEAR(s1[0], p0, 1e-12);
  EXPECT_NEAR(s1[1], p1, 1e-12);
  EXPECT_NEAR(s1[0], 0.8808, 1e-3);
  EXPECT_NEAR(s1[1], 0.1192, 1e-3);

  auto [q0, q1] = softmax2(2, 0, 3);
  auto s3 = softmax_with_temperature(Tensor::vector({2, 0}), 3.0);
  EXPECT_NEAR(s3[0], q0, 1e-12);
  EXPECT_NEAR(s3[0], 0.6607, 1e-3);
  EXPECT_NEAR(s3[1], 0.3393, 1e-3);

  for (double t : {0.5, 1.0, 3.0, 17.0}) {
    auto u = softmax_with_temperature(Tensor::vector({0, 0}), t);
    EXPECT_EQ(u[0], 0.5);
    EXPECT_EQ(u[1], 0.5);
  }
}

TEST(Softmax, RejectsNonPositiveTemperature) {
  EXPECT_THROW(softmax_with_temperature(Tensor::vector({1, 2}), 0.0), InvalidArgument);
  EXPECT_THROW(softmax_with_temperature(Tensor::vector({1, 2}), -1.0), InvalidArgument);
}

TEST(Softmax, RowsSumToOneAndStayFinite) {
  std::mt19937_64 rng(7);
  auto logits = random_tensor({6, 9}, rng, -800, 800);
  auto p = softmax_with_temperature(logits, 1.0);
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0;
    for (double v : p.row(r)) {
      EXPECT_TRUE(std::isfinite(v));
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(CrossEntropy, Examples) {
  EXPECT_NEAR(cross_entropy(Tensor::vector({0.5, 0.5}), Tensor::vector({0.5, 0.5})),
              std::log(2.0), 1e-15);
  EXPECT_NEAR(cross_entropy(Tensor::vector({1, 0}), Tensor::vector({0.8808, 0.1192})),
              -std::log(0.8808), 1e-15);
  EXPECT_NEAR(cross_entropy(Tensor::vector({1, 0}), Tensor::vector({0.8808, 0.1192})), 0.1269,
              1e-3);

  auto [p0, p1] = softmax2(2, 0, 3);
  const double oracle = -(p0 * std::log(p0) + p1 * std::log(p1));
  auto p = Tensor::vector({p0, p1});
  EXPECT_NEAR(cross_entropy(p, p), oracle, 1e-12);
  EXPECT_NEAR(cross_entropy(p, p), 0.6406, 1e-3);
}

TEST(CrossEntropy, ZeroProbabilityIsClampedNotNaN) {
  const double h = cross_entropy(Tensor::vector({1, 0}), Tensor::vector({0, 1}));
  EXPECT_TRUE(std::isfinite(h));
  EXPECT_NEAR(h, -std::log(kLogClamp), 1e-9);
}

TEST(CrossEntropy, BatchedIsMeanOfRows) {
  auto p = Tensor::matrix(2, 2, {1, 0, 0.5, 0.5});
  auto q = Tensor::matrix(2, 2, {0.8, 0.2, 0.5, 0.5});
  EXPECT_NEAR(cross_entropy(p, q), 0.5 * (-std::log(0.8) + std::log(2.0)), 1e-15);
}

TEST(CrossEntropy, GibbsInequality) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = softmax_with_temperature(random_tensor({5}, rng, -3, 3), 1.0);
    auto q = softmax_with_temperature(random_tensor({5}, rng, -3, 3), 1.0);
    EXPECT_GE(cross_entropy(p, q), entropy(p) - 1e-15);
  }
}

TEST(Backward, LinearExample) {
  auto w = make_param("w", Tensor::vector({2.0}));
  Tape tape;
  auto loss = sum(mul(tape.constant(Tensor::vector({3.0})), tape.parameter(w)));
  EXPECT_EQ(loss.value()[0], 6.0);
  tape.backward(loss);
  EXPECT_EQ(w.grad[0], 3.0);
}

TEST(Backward, SoftmaxCrossEntropyGradientIsPMinusY) {
  auto w = make_param("w", Tensor::vector({0.0, 0.0}));
  Tape tape;
  auto loss = cross_entropy(tape.constant(Tensor::vector({1, 0})), softmax(tape.parameter(w)));
  tape.backward(loss);
  EXPECT_NEAR(w.grad[0], -0.5, 1e-15);
  EXPECT_NEAR(w.grad[1], 0.5, 1e-15);
}

TEST(Backward, TwiceWithoutResetThrows) {
  auto w = make_param("w", Tensor::vector({1.0}));
  Tape tape;
  auto loss = sum(tape.parameter(w));
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), TapeError);
  tape.reset();
  auto again = sum(tape.parameter(w));
  EXPECT_NO_THROW(tape.backward(again));
  EXPECT_EQ(w.grad[0], 2.0);
}

TEST(Backward, NonScalarLossThrows) {
  auto w = make_param("w", Tensor::vector({1.0, 2.0}));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.parameter(w)), TapeError);
}

TEST(Backward, FrozenParameterGetsNoGradient) {
  auto w = make_param("w", Tensor::vector({1.0, 2.0}));
  w.frozen = true;
  Tape tape;
  tape.backward(sum(tape.parameter(w)));
  EXPECT_EQ(w.grad[0], 0.0);
  EXPECT_EQ(w.grad[1], 0.0);
}

// Finite-difference agreement for every op on a random 5-element input.
class OpGradient : public ::testing::TestWithParam<const char*> {};

Var apply_op(const std::string& op, Tape& tape, Parameter& a, Parameter& b, Parameter& c) {
  auto x = tape.parameter(a);
  if (op == "matmul") return matmul(x, tape.parameter(b));
  if (op == "add") return add(x, tape.parameter(c));
  if (op == "add_bias") return add(tape.parameter(b), slice_cols(x, 0, 3));
  if (op == "mul") return mul(x, tape.parameter(c));
  if (op == "scale") return scale(x, -1.7);
  if (op == "tanh") return tanh(x);
  if (op == "sigmoid") return sigmoid(x);
  if (op == "gelu") return gelu(x);
  if (op == "relu") return relu(x);
  if (op == "layer_norm") return layer_norm(x, tape.parameter(c), tape.parameter(a), 1e-5);
  if (op == "softmax") return softmax(x, 2.3);
  if (op == "cross_entropy") return cross_entropy(softmax(tape.parameter(c)), softmax(x, 1.4));
  if (op == "embedding") {
    const int ids[] = {4, 1, 1, 0};
    return embedding(tape.parameter(b), ids);
  }
  if (op == "concat") return concat({x, tape.parameter(c), x});
  if (op == "slice") return slice_cols(x, 1, 4);
  if (op == "gather_rows") {
    const std::size_t rows[] = {2, 0, 2};
    return gather_rows(tape.parameter(b), rows);
  }
  if (op == "mean") return mean(x);
  throw std::runtime_error("unknown op " + op);
}

TEST_P(OpGradient, MatchesCentralDifferences) {
  const std::string op = GetParam();
  std::mt19937_64 rng(11);
  auto a = make_param("a", random_tensor({5}, rng));
  auto b = make_param("b", random_tensor({5, 3}, rng));
  auto c = make_param("c", random_tensor({5}, rng));
  // keep relu inputs away from the kink
  if (op == "relu") {
    for (auto& v : a.value.values()) v += (v >= 0 ? 0.1 : -0.1);
  }
  auto result = grad_check(
      [&](Tape& tape) { return project(tape, apply_op(op, tape, a, b, c), 99); }, {&a, &b, &c});
  EXPECT_LT(result.max_rel_error, 1e-4) << op << ": " << result.worst;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient,
                         ::testing::Values("matmul", "add", "add_bias", "mul", "scale", "tanh",
                                           "sigmoid", "gelu", "relu", "layer_norm", "softmax",
                                           "cross_entropy", "embedding", "concat", "slice",
                                           "gather_rows", "mean"));

TEST(OpGradient, RandomShapesProperty) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 8);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t rows = dim(rng), cols = dim(rng) + 1, out = dim(rng);
    auto x = make_param("x", random_tensor({rows, cols}, rng));
    auto w = make_param("w", random_tensor({cols, out}, rng));
    auto bias = make_param("bias", random_tensor({out}, rng));
    auto gain = make_param("gain", random_tensor({out}, rng, 0.5, 1.5));
    auto shift = make_param("shift", random_tensor({out}, rng));
    auto target = make_param("target", random_tensor({rows, out}, rng));
    auto fn = [&](Tape& tape) {
      auto h = add(matmul(tape.parameter(x), tape.parameter(w)), tape.parameter(bias));
      auto n = layer_norm(tanh(h), tape.parameter(gain), tape.parameter(shift), 1e-5);
      auto g = mul(gelu(n), sigmoid(h));
      auto probs = softmax(concat({g, slice_cols(n, 0, 1)}), 1.5);
      auto tgt = softmax(concat({tape.parameter(target), slice_cols(h, 0, 1)}), 1.0);
      return cross_entropy(tgt, probs);
    };
    auto result = grad_check(fn, {&x, &w, &bias, &gain, &shift, &target});
    EXPECT_LT(result.max_rel_error, 1e-4)
        << "trial " << trial << " shape " << rows << "x" << cols << ": " << result.worst;
  }
}

TEST(OpGradient, MultiHeadAttentionWithPadding) {
  std::mt19937_64 rng(5);
  const std::size_t seq = 4, hidden = 6, heads = 2;
  const std::size_t lengths[] = {4, 2};
  auto q = make_param("q", random_tensor({2 * seq, hidden}, rng));
  auto k = make_param("k", random_tensor({2 * seq, hidden}, rng));
  auto v = make_param("v", random_tensor({2 * seq, hidden}, rng));
  auto result = grad_check(
      [&](Tape& tape) {
        auto out = multi_head_attention(tape.parameter(q), tape.parameter(k), tape.parameter(v),
                                        heads, seq, lengths);
        return project(tape, out, 17);
      },
      {&q, &k, &v});
  EXPECT_LT(result.max_rel_error, 1e-4) << result.worst;

  // padded keys/values of sequence 1 get no gradient
  for (std::size_t r = seq + 2; r < 2 * seq; ++r) {
    for (std::size_t c = 0; c < hidden; ++c) {
      EXPECT_EQ(k.grad.at(r, c), 0.0);
      EXPECT_EQ(v.grad.at(r, c), 0.0);
    }
  }
}

TEST(Temperature, EntropyStrictlyIncreasesWithTemperature) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    auto t = random_tensor({7}, rng, -5, 5);
    const double h1 = entropy(softmax_with_temperature(t, 1));
    const double h2 = entropy(softmax_with_temperature(t, 2));
    const double h3 = entropy(softmax_with_temperature(t, 3));
    EXPECT_LT(h1, h2);
    EXPECT_LT(h2, h3);
  }
}

TEST(Temperature, ArgmaxInvariant) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> temp(0.05, 20.0);
  for (int trial = 0; trial < 1000; ++trial) {
    auto t = random_tensor({6}, rng, -5, 5);
    auto p = softmax_with_temperature(t, temp(rng));
    auto arg = [](std::span<const double> v) {
      return std::max_element(v.begin(), v.end()) - v.begin();
    };
    EXPECT_EQ(arg(t.values()), arg(p.values()));
  }
}

TEST(Determinism, SameInputsGiveBitIdenticalOutputs) {
  auto run = [] {
    std::mt19937_64 rng(42);
    auto x = make_param("x", random_tensor({3, 4}, rng));
    auto w = make_param("w", random_tensor({4, 4}, rng));
    Tape tape;
    auto out = softmax(gelu(matmul(tape.parameter(x), tape.parameter(w))), 3.0);
    auto loss = cross_entropy(out, softmax(tape.parameter(x)));
    tape.backward(loss);
    return std::make_pair(out.value(), w.grad);
  };
  EXPECT_EQ(run(), run());
}
