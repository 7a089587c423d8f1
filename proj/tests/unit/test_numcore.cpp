#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "wsda/error.hpp"
#include "wsda/num/gradcheck.hpp"
#include "wsda/num/ops.hpp"

using namespace wsda;
using namespace wsda::num;
using wsda::testing::random_tensor;

TEST(Tensor, DataLengthMustMatchShape) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), DimensionError);
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_TRUE(t.all_finite());
}

TEST(Conv3d, IdentityKernelReturnsInput) {
  std::mt19937_64 rng(3);
  Tape tape;
  Tensor x = random_tensor({1, 3, 4, 5}, rng);
  Var out = conv3d(tape.constant(x), tape.constant(Tensor({1, 1, 1, 1, 1}, 1.0)),
                   tape.constant(Tensor({1}, 0.0)), {1, 1, 1}, {0, 0, 0});
  EXPECT_EQ(out.value(), x);
}

TEST(Conv3d, AllOnesWindowSumsToEight) {
  Tape tape;
  Var out = conv3d(tape.constant(Tensor({1, 2, 2, 2}, 1.0)),
                   tape.constant(Tensor({1, 1, 2, 2, 2}, 1.0)), tape.constant(Tensor({1}, 0.0)),
                   {1, 1, 1}, {0, 0, 0});
  ASSERT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(out.value()[0], 8.0);
}

TEST(Conv3d, ZeroKernelGivesZeroOutput) {
  std::mt19937_64 rng(4);
  Tape tape;
  Var out = conv3d(tape.constant(random_tensor({2, 4, 4, 4}, rng)),
                   tape.constant(Tensor({3, 2, 3, 3, 3}, 0.0)), tape.constant(Tensor({3}, 0.0)),
                   {2, 1, 1}, {1, 1, 1});
  EXPECT_EQ(out.shape(), (Shape{3, 2, 4, 4}));
  for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv3d, MatchesPaddedReferenceAndShapeFormula) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    std::uniform_int_distribution<std::size_t> ext(2, 6), ks(1, 3), st(1, 3), pd(0, 2),
        ch(1, 3);
    const std::size_t C = ch(rng), O = ch(rng);
    const Shape xs{C, ext(rng), ext(rng), ext(rng)};
    const Triple k{ks(rng), ks(rng), ks(rng)}, s{st(rng), st(rng), st(rng)},
        p{pd(rng), pd(rng), pd(rng)};
    bool ok = true;
    for (int a = 0; a < 3; ++a) ok = ok && k[a] <= xs[a + 1] + 2 * p[a];
    if (!ok) continue;
    Tensor x = random_tensor(xs, rng), w = random_tensor({O, C, k[0], k[1], k[2]}, rng),
           b = random_tensor({O}, rng);
    Tape tape;
    Var out = conv3d(tape.constant(x), tape.constant(w), tape.constant(b), s, p);
    for (int a = 0; a < 3; ++a) {
      EXPECT_EQ(out.shape()[a + 1], (xs[a + 1] + 2 * p[a] - k[a]) / s[a] + 1);
    }
    Tensor ref = wsda::testing::naive_conv3d(x, w, b, s[0], s[1], s[2], p[0], p[1], p[2]);
    ASSERT_EQ(ref.shape(), out.shape());
    for (std::size_t i = 0; i < ref.numel(); ++i) EXPECT_NEAR(out.value()[i], ref[i], 1e-12);
  }
}

TEST(Conv3d, ShapeErrorsNameTheAxis) {
  Tape tape;
  Var x = tape.constant(Tensor({1, 2, 4, 4}, 1.0));
  try {
    conv3d(x, tape.constant(Tensor({1, 1, 3, 3, 3}, 1.0)), tape.constant(Tensor({1}, 0.0)),
           {1, 1, 1}, {0, 0, 0});
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("time"), std::string::npos) << e.what();
  }
  EXPECT_THROW(conv3d(x, tape.constant(Tensor({1, 2, 1, 1, 1}, 1.0)),
                      tape.constant(Tensor({1}, 0.0)), {1, 1, 1}, {0, 0, 0}),
               DimensionError);
  EXPECT_THROW(conv3d(x, tape.constant(Tensor({1, 1, 1, 1, 1}, 1.0)),
                      tape.constant(Tensor({1}, 0.0)), {1, 0, 1}, {0, 0, 0}),
               DimensionError);
}

TEST(Affine, HandExamples) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({1.0, 1.0}));
  Var w = tape.constant(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
  Var out = affine(x, w, tape.constant(Tensor({2}, 0.0)));
  EXPECT_EQ(out.value().values(), (std::vector<double>{3.0, 7.0}));

  Var ident = affine(tape.constant(Tensor::vector({0.5, -2.0})),
                     tape.constant(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0})),
                     tape.constant(Tensor({2}, 0.0)));
  EXPECT_EQ(ident.value().values(), (std::vector<double>{0.5, -2.0}));

  Var zero = affine(x, tape.constant(Tensor({3, 2}, 0.0)), tape.constant(Tensor::vector({1, 2, 3})));
  EXPECT_EQ(zero.value().values(), (std::vector<double>{1.0, 2.0, 3.0}));

  EXPECT_THROW(affine(tape.constant(Tensor::vector({1, 2, 3})), w, tape.constant(Tensor({2}, 0.0))),
               DimensionError);
}

TEST(Activation, Definitions) {
  Tape tape;
  EXPECT_EQ(relu(tape.constant(Tensor::vector({-1.0, 2.0}))).value().values(),
            (std::vector<double>{0.0, 2.0}));
  EXPECT_DOUBLE_EQ(sigmoid(tape.constant(Tensor::scalar(0.0))).value()[0], 0.5);
  EXPECT_NEAR(sigmoid(tape.constant(Tensor::scalar(std::log(3.0)))).value()[0], 0.75, 1e-15);
  EXPECT_THROW(parse_activation("tanh"), ConfigError);
  EXPECT_THROW(activation(static_cast<Activation>(7), tape.constant(Tensor::scalar(1.0))),
               ConfigError);
}

TEST(TemporalReduce, MeanMaxAndTies) {
  Tape tape;
  Var single = tape.leaf(Tensor({1, 3}, {1.0, -2.0, 4.0}));
  EXPECT_EQ(temporal_reduce(single, Reduce::mean).value().values(),
            (std::vector<double>{1.0, -2.0, 4.0}));
  EXPECT_EQ(temporal_reduce(single, Reduce::max).value().values(),
            (std::vector<double>{1.0, -2.0, 4.0}));
  EXPECT_DOUBLE_EQ(temporal_reduce(tape.constant(Tensor({2, 1}, {1.0, 3.0})), Reduce::mean).value()[0],
                   2.0);

  Var x = tape.leaf(Tensor({3, 1}, {1.0, 3.0, 3.0}));
  Var m = temporal_reduce(x, Reduce::max);
  EXPECT_DOUBLE_EQ(m.value()[0], 3.0);
  tape.backward(m);
  EXPECT_EQ(tape.grad(x).values(), (std::vector<double>{0.0, 1.0, 0.0}));
}

TEST(Losses, MseExamples) {
  Tape tape;
  Var p = tape.constant(Tensor::vector({1.0, 3.0}));
  EXPECT_DOUBLE_EQ(mse(p, p).value()[0], 0.0);
  EXPECT_DOUBLE_EQ(mse(p, tape.constant(Tensor::vector({0.0, 1.0}))).value()[0], 2.5);
  EXPECT_DOUBLE_EQ(
      mse(tape.constant(Tensor::scalar(3.0)), tape.constant(Tensor::scalar(1.0))).value()[0], 4.0);
  EXPECT_THROW(mse(p, tape.constant(Tensor::scalar(1.0))), DimensionError);
}

TEST(Losses, LogisticExamples) {
  Tape tape;
  Var z0 = tape.constant(Tensor::scalar(0.0));
  EXPECT_NEAR(logistic_loss(z0, 0).value()[0], 0.693147180559945, 1e-12);
  EXPECT_NEAR(logistic_loss(z0, 1).value()[0], std::log(2.0), 1e-15);
  EXPECT_LT(logistic_loss(tape.constant(Tensor::scalar(20.0)), 1).value()[0], 1e-8);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 50; ++i) {
    const double z = n(rng);
    EXPECT_NEAR(logistic_loss(tape.constant(Tensor::scalar(z)), 1).value()[0],
                logistic_loss(tape.constant(Tensor::scalar(-z)), 0).value()[0], 1e-15);
  }
  EXPECT_THROW(logistic_loss(z0, 2), DomainError);
}

TEST(Backward, MseGradientVanishesAtTarget) {
  Tape tape;
  Var p = tape.leaf(Tensor::vector({0.3, -1.2, 4.0}));
  Var loss = mse(p, tape.constant(Tensor::vector({0.3, -1.2, 4.0})));
  auto g = backward(tape, loss, std::vector<Var>{p});
  for (double v : g[0].data()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, NonScalarSeedIsAContractError) {
  Tape tape;
  Var p = tape.leaf(Tensor::vector({1.0, 2.0}));
  EXPECT_THROW(tape.backward(relu(p)), ContractError);
}

TEST(Backward, UnusedParametersGetZeroGradient) {
  Tape tape;
  Var used = tape.leaf(Tensor::vector({1.0, 2.0}));
  Var unused = tape.leaf(Tensor({2, 2}, 3.0));
  Var loss = mse(used, tape.constant(Tensor::vector({0.0, 0.0})));
  auto g = backward(tape, loss, std::vector<Var>{used, unused});
  EXPECT_EQ(g[1], Tensor({2, 2}, 0.0));
}

TEST(Backward, LinearInTheSeed) {
  std::mt19937_64 rng(8);
  Tape tape;
  Var w = tape.leaf(random_tensor({3, 4}, rng));
  Var b = tape.leaf(random_tensor({3}, rng));
  Var x = tape.constant(random_tensor({4}, rng));
  Var loss = mse(sigmoid(affine(x, w, b)), tape.constant(Tensor({3}, 0.2)));
  std::vector<Var> ps{w, b};
  auto g1 = backward(tape, loss, ps, 1.0);
  auto g3 = backward(tape, loss, ps, -3.0);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < g1[t].numel(); ++i) EXPECT_NEAR(g3[t][i], -3.0 * g1[t][i], 1e-15);
}

TEST(GradCheck, SigmoidAffineChain) {
  std::mt19937_64 rng(21);
  std::vector<Tensor> point{random_tensor({3, 4}, rng), random_tensor({3}, rng),
                            random_tensor({4}, rng)};
  GraphFn f = [](Tape& tape, std::span<const Var> v) {
    return mse(sigmoid(affine(v[2], v[0], v[1])), tape.constant(Tensor::vector({0.1, 0.5, 0.9})));
  };
  EXPECT_LT(finite_difference_check(f, point, 1e-5).max_rel_error, 1e-6);
}

TEST(GradCheck, LinearFunctionIsExactToRoundoff) {
  std::mt19937_64 rng(22);
  std::vector<Tensor> point{random_tensor({2, 3}, rng), random_tensor({2}, rng)};
  const Tensor x = Tensor::vector({0.5, -1.0, 2.0});
  GraphFn lin = [&x](Tape& tape, std::span<const Var> v) {
    Var y = affine(tape.constant(x), v[0], v[1]);
    Var ones = tape.constant(Tensor({1, 2}, {2.0, -3.0}));
    return affine(y, ones, tape.constant(Tensor({1}, 0.5)));
  };
  EXPECT_LT(finite_difference_check(lin, point, 1e-5).max_rel_error, 1e-10);
}

TEST(GradCheck, SmallConvReluAffineMse) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor> point{random_tensor({2, 1, 3, 3, 3}, rng), random_tensor({2}, rng),
                              random_tensor({1, 2}, rng), random_tensor({1}, rng),
                              random_tensor({1, 4, 4, 4}, rng)};
    GraphFn f = [](Tape& tape, std::span<const Var> v) {
      Var h = relu(conv3d(v[4], v[0], v[1], {2, 1, 1}, {1, 1, 1}));
      Var feats = spatial_mean(h);
      Var pred = reshape(affine(feats, v[2], v[3]), {2});
      return mse(pred, tape.constant(Tensor::vector({1.0, -0.5})));
    };
    auto r = finite_difference_check(f, point, 1e-5);
    if (r.kink_margin < 1e-3) continue;
    EXPECT_LT(r.max_rel_error, 1e-6) << "seed " << seed;
  }
}

TEST(GradCheck, NegatedGradientIsCaught) {
  std::mt19937_64 rng(23);
  std::vector<Tensor> point{random_tensor({3}, rng)};
  // backward deliberately returns -g
  GraphFn broken = [](Tape& tape, std::span<const Var> v) {
    Var y = tape.record(v[0].value(), {v[0]},
                        [](const BackwardContext& ctx) {
                          auto d = ctx.parent_grads[0]->data();
                          for (std::size_t i = 0; i < d.size(); ++i) d[i] -= ctx.upstream[i];
                        },
                        "negated_identity");
    return mse(y, tape.constant(Tensor({3}, 0.0)));
  };
  auto r = finite_difference_check(broken, point, 1e-5);
  EXPECT_NEAR(r.max_rel_error, 2.0, 1e-6);
}

TEST(Determinism, ForwardIsBitIdentical) {
  std::mt19937_64 rng(30);
  Tensor x = random_tensor({2, 4, 6, 6}, rng), k = random_tensor({3, 2, 3, 3, 3}, rng),
         b = random_tensor({3}, rng);
  Tape t1, t2;
  Var a = conv3d(t1.constant(x), t1.constant(k), t1.constant(b), {2, 2, 2}, {1, 1, 1});
  Var c = conv3d(t2.constant(x), t2.constant(k), t2.constant(b), {2, 2, 2}, {1, 1, 1});
  EXPECT_EQ(a.value(), c.value());
}

TEST(Tape, RecordsInTopologicalOrder) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.0, 2.0}));
  Var y = relu(scale(x, 2.0));
  Var z = mse(y, tape.constant(Tensor::vector({0.0, 0.0})));
  for (std::size_t id = 0; id < tape.size(); ++id) {
    for (const Var& p : tape.parents(Var(&tape, id))) EXPECT_LT(p.id(), id);
  }
  tape.backward(z);
  EXPECT_EQ(tape.grad(y).shape(), y.shape());
  EXPECT_EQ(tape.grad(x).shape(), x.shape());
}
