#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "support/oracles.hpp"
#include "wsda/error.hpp"
#include "wsda/net/checkpoint.hpp"
#include "wsda/net/model.hpp"

using namespace wsda;
using namespace wsda::net;
using num::Tape;
using wsda::testing::random_tensor;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.height = 4;
  c.width = 4;
  c.window = 4;
  c.blocks = {{3, {3, 3, 3}, 2, 1}, {4, {3, 3, 3}, 2, 1}};
  c.head_hidden = 5;
  c.seed = 7;
  return c;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("wsda_milnet_" + name);
}

}  // namespace

TEST(Grl, ForwardIsIdentity) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.2, -0.3}));
  EXPECT_EQ(grl(x, 0.7).value(), x.value());
}

TEST(Grl, BackwardScalesByMinusLambda) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({1.2, -0.3}));
  Var y = grl(x, 0.5);
  Var w = tape.constant(Tensor({1, 2}, {1.0, 2.0}));
  tape.backward(num::affine(y, w, tape.constant(Tensor({1}, 0.0))));
  EXPECT_EQ(tape.grad(x).values(), (std::vector<double>{-0.5, -1.0}));
}

TEST(Grl, ZeroLambdaBlocksGradientAndNegativeIsRejected) {
  Tape tape;
  Var x = tape.leaf(Tensor::vector({3.0}));
  Var y = grl(x, 0.0);
  tape.backward(num::mse(y, tape.constant(Tensor::vector({0.0}))));
  EXPECT_EQ(tape.grad(x).values(), (std::vector<double>{0.0}));
  EXPECT_THROW(grl(x, -0.1), ConfigError);
}

TEST(ModelConfig, Validation) {
  ModelConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.feature_steps(), 1u);
  EXPECT_EQ(c.feature_dim(), 4u);
  c.window = 6;  // not divisible by 4
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.blocks[0].kernel = {2, 3, 3};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, FeatureShapeAndDeterminism) {
  ModelConfig c = ModelConfig{};
  const ModelParams p = init_params(c);
  std::mt19937_64 rng(2);
  const Tensor window = random_tensor(c.window_shape(), rng);
  Tape t1, t2;
  Var f1 = features(c, bind(t1, p).f, t1.constant(window));
  Var f2 = features(c, bind(t2, p).f, t2.constant(window));
  EXPECT_EQ(f1.shape(), (num::Shape{c.feature_steps(), c.feature_dim()}));
  EXPECT_EQ(f1.value(), f2.value());
  EXPECT_THROW(features(c, bind(t1, p).f, t1.constant(Tensor({1, 4, 8, 8}, 0.0))),
               DimensionError);
}

TEST(Model, ZeroWindowWithZeroBiasesGivesZeroFeatures) {
  ModelConfig c = small_config();
  const ModelParams p = init_params(c);  // biases start at zero
  Tape tape;
  Var f = features(c, bind(tape, p).f, tape.constant(Tensor(c.window_shape(), 0.0)));
  for (double v : f.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Model, LabelHeadHandComputed) {
  Tape tape;
  std::vector<Var> theta{tape.constant(Tensor({2, 2}, {1.0, -1.0, 0.5, 2.0})),
                         tape.constant(Tensor::vector({0.0, -1.0})),
                         tape.constant(Tensor({1, 2}, {2.0, 3.0})),
                         tape.constant(Tensor::vector({0.25}))};
  // feats [1,2] = (2, 1): hidden = relu(1, 2) = (1, 2); out = 2 + 6 + 0.25
  Var out = label_head(theta, tape.constant(Tensor({1, 2}, {2.0, 1.0})));
  EXPECT_EQ(out.shape(), (num::Shape{1}));
  EXPECT_DOUBLE_EQ(out.value()[0], 8.25);
  // feats (0, 1): hidden = relu(-1, 1) = (0, 1); out = 3 + 0.25
  Var two = label_head(theta, tape.constant(Tensor({2, 2}, {2.0, 1.0, 0.0, 1.0})));
  EXPECT_EQ(two.value().values(), (std::vector<double>{8.25, 3.25}));
  // constant-in-time features: the weak head equals the 1-step label head
  Var weak = weak_head(theta, tape.constant(Tensor({3, 2}, {2.0, 1.0, 2.0, 1.0, 2.0, 1.0})));
  EXPECT_DOUBLE_EQ(weak.value().item(), 8.25);
}

TEST(Model, HeadsOnZeroFeaturesWithZeroFinalBias) {
  ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  Tape tape;
  BoundParams b = bind(tape, p);
  Var zero = tape.constant(Tensor({c.feature_steps(), c.feature_dim()}, 0.0));
  for (double v : label_head(b.l, zero).value().data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(weak_head(b.wl, zero).value().item(), 0.0);
  EXPECT_EQ(domain_head(b.d, zero, 0.4).value().item(), 0.0);
}

TEST(Model, DomainLogitIndependentOfLambda) {
  ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  std::mt19937_64 rng(3);
  const Tensor window = random_tensor(c.window_shape(), rng);
  double first = 0.0;
  for (double lambda : {0.0, 0.3, 1.0, 5.0}) {
    Tape tape;
    BoundParams b = bind(tape, p);
    const double v = domain_head(b.d, features(c, b.f, tape.constant(window)), lambda).value().item();
    if (lambda == 0.0) first = v;
    EXPECT_EQ(v, first);
  }
}

TEST(Model, GrlGradientIsMinusLambdaTimesIdentityGraph) {
  ModelConfig c = small_config();
  c.init_scale = 2.0;
  const ModelParams p = init_params(c);
  std::mt19937_64 rng(4);
  const Tensor window = random_tensor(c.window_shape(), rng);
  for (double lambda : {0.0, 0.3, 1.0}) {
    Tape tg;
    BoundParams bg = bind(tg, p);
    Var lg = num::logistic_loss(domain_head(bg.d, features(c, bg.f, tg.constant(window)), lambda), 1);
    auto grads_grl = num::backward(tg, lg, bg.f);

    // same head architecture without the reversal layer
    Tape ti;
    BoundParams bi = bind(ti, p);
    Var li = num::logistic_loss(weak_head(bi.d, features(c, bi.f, ti.constant(window))), 1);
    auto grads_id = num::backward(ti, li, bi.f);

    EXPECT_EQ(lg.value(), li.value());
    for (std::size_t t = 0; t < grads_grl.size(); ++t) {
      for (std::size_t i = 0; i < grads_grl[t].numel(); ++i) {
        EXPECT_NEAR(grads_grl[t][i], -lambda * grads_id[t][i], 1e-12);
      }
    }
  }
}

TEST(Model, DomainHeadGradientUnreversed) {
  ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  std::mt19937_64 rng(5);
  const Tensor window = random_tensor(c.window_shape(), rng, 0.0, 1.0);
  Tape tg, ti;
  BoundParams bg = bind(tg, p), bi = bind(ti, p);
  auto g = num::backward(
      tg, num::logistic_loss(domain_head(bg.d, features(c, bg.f, tg.constant(window)), 0.0), 0), bg.d);
  auto h = num::backward(
      ti, num::logistic_loss(weak_head(bi.d, features(c, bi.f, ti.constant(window))), 0), bi.d);
  for (std::size_t t = 0; t < g.size(); ++t) EXPECT_EQ(g[t], h[t]);
}

TEST(Model, FeaturesNeverSeeTheDomainTag) {
  // the tag only enters through the loss label; features are a function of the window
  ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  std::mt19937_64 rng(6);
  const Tensor window = random_tensor(c.window_shape(), rng);
  Tape tape;
  BoundParams b = bind(tape, p);
  Var f = features(c, b.f, tape.constant(window));
  Var logit = domain_head(b.d, f, 1.0);
  const double as_source = num::logistic_loss(logit, 0).value().item();
  const double as_target = num::logistic_loss(logit, 1).value().item();
  EXPECT_NE(as_source, as_target);
  Tape again;
  EXPECT_EQ(features(c, bind(again, p).f, again.constant(window)).value(), f.value());
}

TEST(Params, InitDeterminismAndScale) {
  ModelConfig c = small_config();
  EXPECT_EQ(init_params(c), init_params(c));
  ModelConfig other = c;
  other.seed = 8;
  EXPECT_FALSE(init_params(c) == init_params(other));

  const ModelParams p = init_params(c);
  const auto& w = p.theta_f[0].value;  // [3,1,3,3,3], fan-in 27
  const double bound = 1.0 / std::sqrt(27.0);
  for (double v : w.data()) EXPECT_LE(std::abs(v), bound);
  for (double v : p.theta_f[1].value.data()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(p.all_finite());
}

TEST(Params, NamesAndFlatRoundTrip) {
  ModelConfig c = small_config();
  const ModelParams p = init_params(c);
  const auto flat = p.flatten();
  ASSERT_EQ(flat.size(), 4u + 4u + 4u + 4u);
  EXPECT_EQ(flat[0].name, "conv0.weight");
  EXPECT_EQ(flat[4].name, "label.fc1.weight");
  EXPECT_EQ(flat[8].name, "weak.fc1.weight");
  EXPECT_EQ(flat[15].name, "domain.fc2.bias");
  EXPECT_EQ(ModelParams::from_flat(c, flat), p);

  auto wrong = flat;
  wrong[2].value = Tensor({1}, 0.0);
  EXPECT_THROW(ModelParams::from_flat(c, wrong), FormatError);
  wrong = flat;
  wrong[5].name = "label.fc9.bias";
  EXPECT_THROW(ModelParams::from_flat(c, wrong), FormatError);
}

TEST(Checkpoint, RoundTripIsExact) {
  ModelConfig c = small_config();
  c.init_scale = 3.0;
  const ModelParams p = init_params(c);
  const auto path = temp_file("roundtrip.ckpt");
  save_params(path, p);
  EXPECT_EQ(load_params(path, c), p);
  std::filesystem::remove(path);
}

TEST(Checkpoint, ByteLayout) {
  const auto path = temp_file("layout.ckpt");
  write_checkpoint(path, {{"ab", Tensor({2}, {1.0, -2.0})}});
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  // magic 4 + version 4 + name len 8 + name 2 + rank 8 + extent 8 + values 16
  ASSERT_EQ(bytes.size(), 50u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "WSDA");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[16], 'a');
  EXPECT_EQ(bytes[18], 1);
  EXPECT_EQ(bytes[26], 2);
  // 1.0 little-endian: 00 .. 00 f0 3f
  EXPECT_EQ(bytes[34 + 7], 0x3f);
  EXPECT_EQ(bytes[34 + 6], 0xf0);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto path = temp_file("bad.ckpt");
  {
    std::ofstream out(path, std::ios::binary);
    out << "WSDB";
  }
  EXPECT_THROW(read_checkpoint(path), FormatError);

  write_checkpoint(path, {{"x", Tensor({3}, 1.0)}});
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(read_checkpoint(path), FormatError);

  write_checkpoint(path, {{"x", Tensor({3}, 1.0)}});
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(4);
    f.put(static_cast<char>(9));
  }
  EXPECT_THROW(read_checkpoint(path), FormatError);
  std::filesystem::remove(path);

  EXPECT_THROW(read_checkpoint(temp_file("does_not_exist.ckpt")), IoError);
}
