#include "wsda/net/model.hpp"

#include <cmath>
#include <random>

#include "wsda/error.hpp"

namespace wsda::net {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

struct ParamSpec {
  std::string name;
  num::Shape shape;
  std::size_t fan_in;  // 0 marks a bias
};

std::vector<ParamSpec> feature_specs(const ModelConfig& c) {
  std::vector<ParamSpec> specs;
  std::size_t in = c.in_channels;
  for (std::size_t i = 0; i < c.blocks.size(); ++i) {
    const auto& b = c.blocks[i];
    const std::string p = "conv" + std::to_string(i);
    const std::size_t fan = in * b.kernel[0] * b.kernel[1] * b.kernel[2];
    specs.push_back({p + ".weight", {b.channels, in, b.kernel[0], b.kernel[1], b.kernel[2]}, fan});
    specs.push_back({p + ".bias", {b.channels}, 0});
    in = b.channels;
  }
  return specs;
}

std::vector<ParamSpec> head_specs(const std::string& prefix, std::size_t in, std::size_t hidden) {
  return {{prefix + ".fc1.weight", {hidden, in}, in},
          {prefix + ".fc1.bias", {hidden}, 0},
          {prefix + ".fc2.weight", {1, hidden}, hidden},
          {prefix + ".fc2.bias", {1}, 0}};
}

std::vector<std::vector<ParamSpec>> all_specs(const ModelConfig& c) {
  return {feature_specs(c), head_specs("label", c.feature_dim(), c.head_hidden),
          head_specs("weak", c.feature_dim(), c.head_hidden),
          head_specs("domain", c.feature_dim(), c.head_hidden)};
}

std::vector<std::vector<NamedTensor>*> groups(ModelParams& p) {
  return {&p.theta_f, &p.theta_l, &p.theta_wl, &p.theta_d};
}

Var head_mlp(std::span<const Var> theta, Var x) {
  if (theta.size() != 4) throw DimensionError("head expects 4 parameter tensors");
  Var h = num::relu(num::affine(x, theta[0], theta[1]));
  return num::affine(h, theta[2], theta[3]);
}

void check_feats(Var feats, const char* who) {
  if (feats.value().rank() != 2) {
    throw DimensionError(std::string(who) + " expects features [T',F], got " +
                         num::shape_string(feats.shape()));
  }
}

}  // namespace

void ModelConfig::validate() const {
  require(in_channels > 0 && height > 0 && width > 0 && window > 0,
          "model input extents must be positive");
  require(!blocks.empty(), "model needs at least one conv block");
  require(head_hidden > 0, "head hidden size must be positive");
  require(init_scale > 0.0 && std::isfinite(init_scale), "init scale must be positive");
  std::size_t t = window, h = height, w = width;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string tag = "block " + std::to_string(i) + ": ";
    require(b.channels > 0, tag + "channels must be positive");
    require(b.temporal_stride > 0 && b.spatial_stride > 0, tag + "strides must be positive");
    for (std::size_t k : b.kernel) require(k > 0 && k % 2 == 1, tag + "kernel extents must be odd");
    require(t % b.temporal_stride == 0,
            tag + "window length not divisible by the temporal downsample factors");
    t = num::conv_output_extent(t, b.kernel[0], b.temporal_stride, b.kernel[0] / 2);
    h = num::conv_output_extent(h, b.kernel[1], b.spatial_stride, b.kernel[1] / 2);
    w = num::conv_output_extent(w, b.kernel[2], b.spatial_stride, b.kernel[2] / 2);
  }
  require(t == window / temporal_factor(), "temporal output length is not window / prod(dt)");
}

std::size_t ModelConfig::temporal_factor() const {
  std::size_t f = 1;
  for (const auto& b : blocks) f *= b.temporal_stride;
  return f;
}

std::size_t ModelConfig::feature_steps() const { return window / temporal_factor(); }

std::size_t ModelConfig::feature_dim() const { return blocks.empty() ? 0 : blocks.back().channels; }

num::Shape ModelConfig::window_shape() const { return {in_channels, window, height, width}; }

std::vector<NamedTensor> ModelParams::flatten() const {
  std::vector<NamedTensor> out;
  for (const auto* g : {&theta_f, &theta_l, &theta_wl, &theta_d}) {
    out.insert(out.end(), g->begin(), g->end());
  }
  return out;
}

ModelParams ModelParams::from_flat(const ModelConfig& config, std::span<const NamedTensor> tensors) {
  config.validate();
  ModelParams p;
  auto specs = all_specs(config);
  auto gs = groups(p);
  std::size_t k = 0;
  for (std::size_t g = 0; g < specs.size(); ++g) {
    for (const auto& s : specs[g]) {
      if (k >= tensors.size()) throw FormatError("missing parameter tensor '" + s.name + "'");
      const NamedTensor& nt = tensors[k++];
      if (nt.name != s.name) {
        throw FormatError("expected parameter '" + s.name + "', found '" + nt.name + "'");
      }
      if (nt.value.shape() != s.shape) {
        throw FormatError("parameter '" + s.name + "' has shape " +
                          num::shape_string(nt.value.shape()) + ", expected " +
                          num::shape_string(s.shape));
      }
      gs[g]->push_back(nt);
    }
  }
  if (k != tensors.size()) throw FormatError("unexpected extra parameter tensors");
  return p;
}

bool ModelParams::all_finite() const {
  for (const auto& nt : flatten())
    if (!nt.value.all_finite()) return false;
  return true;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& nt : flatten()) n += nt.value.numel();
  return n;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  auto fa = a.flatten();
  auto fb = b.flatten();
  if (fa.size() != fb.size()) return false;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    if (fa[i].name != fb[i].name || !(fa[i].value == fb[i].value)) return false;
  }
  return true;
}

ModelParams init_params(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  ModelParams p;
  auto specs = all_specs(config);
  auto gs = groups(p);
  for (std::size_t g = 0; g < specs.size(); ++g) {
    for (const auto& s : specs[g]) {
      Tensor t(s.shape, 0.0);
      if (s.fan_in > 0) {
        const double bound = config.init_scale / std::sqrt(static_cast<double>(s.fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& v : t.data()) v = u(rng);
      }
      gs[g]->push_back({s.name, std::move(t)});
    }
  }
  return p;
}

std::vector<Var> BoundParams::all() const {
  std::vector<Var> out;
  for (const auto* g : {&f, &l, &wl, &d}) out.insert(out.end(), g->begin(), g->end());
  return out;
}

BoundParams bind(num::Tape& tape, const ModelParams& params) {
  BoundParams b;
  auto put = [&](const std::vector<NamedTensor>& src, std::vector<Var>& dst) {
    dst.reserve(src.size());
    for (const auto& nt : src) dst.push_back(tape.leaf(nt.value));
  };
  put(params.theta_f, b.f);
  put(params.theta_l, b.l);
  put(params.theta_wl, b.wl);
  put(params.theta_d, b.d);
  return b;
}

Var grl(Var x, double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("gradient reversal lambda must be finite and >= 0");
  }
  auto back = [lambda](const num::BackwardContext& ctx) {
    if (Tensor* g = ctx.parent_grads[0]) {
      auto d = g->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += -lambda * ctx.upstream[i];
    }
  };
  return x.tape().record(x.value(), {x}, back, "grl");
}

Var features(const ModelConfig& config, std::span<const Var> theta_f, Var window) {
  if (window.shape() != config.window_shape()) {
    throw DimensionError("window shape " + num::shape_string(window.shape()) +
                         " does not match model input " +
                         num::shape_string(config.window_shape()));
  }
  if (theta_f.size() != 2 * config.blocks.size()) {
    throw DimensionError("feature extractor expects " + std::to_string(2 * config.blocks.size()) +
                         " parameter tensors");
  }
  Var x = window;
  for (std::size_t i = 0; i < config.blocks.size(); ++i) {
    const auto& b = config.blocks[i];
    const num::Triple stride{b.temporal_stride, b.spatial_stride, b.spatial_stride};
    const num::Triple pad{b.kernel[0] / 2, b.kernel[1] / 2, b.kernel[2] / 2};
    x = num::relu(num::conv3d(x, theta_f[2 * i], theta_f[2 * i + 1], stride, pad));
  }
  return num::spatial_mean(x);
}

Var label_head(std::span<const Var> theta_l, Var feats) {
  check_feats(feats, "label_head");
  Var out = head_mlp(theta_l, feats);  // [T',1]
  return num::reshape(out, {out.shape()[0]});
}

Var weak_head(std::span<const Var> theta_wl, Var feats) {
  check_feats(feats, "weak_head");
  return head_mlp(theta_wl, num::temporal_reduce(feats, num::Reduce::mean));
}

Var domain_head(std::span<const Var> theta_d, Var feats, double lambda) {
  check_feats(feats, "domain_head");
  return head_mlp(theta_d, num::temporal_reduce(grl(feats, lambda), num::Reduce::mean));
}

}  // namespace wsda::net
