#include "wsda/num/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wsda/error.hpp"

namespace wsda::num {

namespace {

constexpr std::array<const char*, 3> kAxisNames{"time", "height", "width"};

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
}

void require_scalar(Var v, const char* what) {
  if (v.value().numel() != 1) {
    throw DimensionError(std::string(what) + " expects a single-element operand, got shape " +
                         shape_string(v.shape()));
  }
}

double stable_sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Reduce parse_reduce(std::string_view name) {
  if (name == "mean") return Reduce::mean;
  if (name == "max") return Reduce::max;
  throw ConfigError("unknown temporal reduction '" + std::string(name) + "'");
}

std::size_t conv_output_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
  return (n + 2 * pad - k) / stride + 1;
}

// ---------------------------------------------------------------------------
// conv3d

namespace {

struct ConvGeometry {
  std::size_t cin, t, h, w;
  std::size_t cout, kt, kh, kw;
  std::size_t ot, oh, ow;
  Triple stride, pad;
};

// Visits every run of taps that lies inside the unpadded input in a fixed
// order. f(out_index, in_index, kernel_index, n) covers n consecutive taps
// along the width axis, starting at the given input and kernel indices.
template <typename F>
void for_each_tap_row(const ConvGeometry& g, F&& f) {
  const std::size_t in_plane = g.h * g.w;
  const std::size_t in_chan = g.t * in_plane;
  const std::size_t k_plane = g.kh * g.kw;
  const std::size_t k_vol = g.kt * k_plane;
  const std::size_t k_out = g.cin * k_vol;
  const std::size_t o_plane = g.oh * g.ow;
  const std::size_t o_chan = g.ot * o_plane;
  for (std::size_t co = 0; co < g.cout; ++co) {
    for (std::size_t zt = 0; zt < g.ot; ++zt) {
      for (std::size_t zh = 0; zh < g.oh; ++zh) {
        for (std::size_t zw = 0; zw < g.ow; ++zw) {
          const std::size_t out = co * o_chan + zt * o_plane + zh * g.ow + zw;
          const long bt = static_cast<long>(zt * g.stride[0]) - static_cast<long>(g.pad[0]);
          const long bh = static_cast<long>(zh * g.stride[1]) - static_cast<long>(g.pad[1]);
          const long bw = static_cast<long>(zw * g.stride[2]) - static_cast<long>(g.pad[2]);
          const std::size_t kt0 = bt < 0 ? static_cast<std::size_t>(-bt) : 0;
          const std::size_t kh0 = bh < 0 ? static_cast<std::size_t>(-bh) : 0;
          const std::size_t kw0 = bw < 0 ? static_cast<std::size_t>(-bw) : 0;
          // windows lying wholly in the padding have an empty tap range
          const auto upper = [](std::size_t k, std::size_t n, long base) {
            return static_cast<std::size_t>(std::clamp<long>(static_cast<long>(n) - base, 0, static_cast<long>(k)));
          };
          const std::size_t kt1 = upper(g.kt, g.t, bt);
          const std::size_t kh1 = upper(g.kh, g.h, bh);
          const std::size_t kw1 = upper(g.kw, g.w, bw);
          for (std::size_t ci = 0; ci < g.cin; ++ci) {
            for (std::size_t a = kt0; a < kt1; ++a) {
              for (std::size_t b = kh0; b < kh1; ++b) {
                const std::size_t in_row = ci * in_chan + (bt + a) * in_plane + (bh + b) * g.w;
                const std::size_t k_row = co * k_out + ci * k_vol + a * k_plane + b * g.kw;
                if (kw1 > kw0) f(out, in_row + (bw + kw0), k_row + kw0, kw1 - kw0);
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var conv3d(Var input, Var kernel, Var bias, Triple stride, Triple padding) {
  require_same_tape(input, kernel);
  require_same_tape(input, bias);
  const Tensor& x = input.value();
  const Tensor& k = kernel.value();
  const Tensor& b = bias.value();
  if (x.rank() != 4) {
    throw DimensionError("conv3d input must be [C,T,H,W], got " + shape_string(x.shape()));
  }
  if (k.rank() != 5) {
    throw DimensionError("conv3d kernel must be [Cout,Cin,kT,kH,kW], got " +
                         shape_string(k.shape()));
  }
  if (k.extent(1) != x.extent(0)) {
    throw DimensionError("conv3d channel axis mismatch: kernel expects " +
                         std::to_string(k.extent(1)) + " input channels, input has " +
                         std::to_string(x.extent(0)));
  }
  if (b.rank() != 1 || b.extent(0) != k.extent(0)) {
    throw DimensionError("conv3d bias must be [" + std::to_string(k.extent(0)) + "], got " +
                         shape_string(b.shape()));
  }
  for (std::size_t axis = 0; axis < 3; ++axis) {
    if (stride[axis] == 0) {
      throw DimensionError(std::string("conv3d stride on ") + kAxisNames[axis] + " axis is zero");
    }
    if (k.extent(axis + 2) > x.extent(axis + 1) + 2 * padding[axis]) {
      throw DimensionError(std::string("conv3d kernel exceeds padded input on ") +
                           kAxisNames[axis] + " axis");
    }
  }

  ConvGeometry g{x.extent(0), x.extent(1), x.extent(2), x.extent(3),
                 k.extent(0), k.extent(2), k.extent(3), k.extent(4),
                 0,           0,           0,           stride,      padding};
  g.ot = conv_output_extent(g.t, g.kt, stride[0], padding[0]);
  g.oh = conv_output_extent(g.h, g.kh, stride[1], padding[1]);
  g.ow = conv_output_extent(g.w, g.kw, stride[2], padding[2]);

  Tensor out({g.cout, g.ot, g.oh, g.ow}, 0.0);
  {
    auto o = out.data();
    auto xi = x.data();
    auto ki = k.data();
    const std::size_t per_chan = g.ot * g.oh * g.ow;
    for (std::size_t co = 0; co < g.cout; ++co) {
      std::fill_n(o.begin() + co * per_chan, per_chan, b[co]);
    }
    const double* xp = xi.data();
    const double* kp = ki.data();
    double* op = o.data();
    for_each_tap_row(g, [&](std::size_t oi, std::size_t ii, std::size_t kk, std::size_t n) {
      double acc = op[oi];
      for (std::size_t c = 0; c < n; ++c) acc += xp[ii + c] * kp[kk + c];
      op[oi] = acc;
    });
  }

  auto back = [g](const BackwardContext& ctx) {
    const auto up = ctx.upstream.data();
    const auto xi = ctx.parents[0].value().data();
    const auto ki = ctx.parents[1].value().data();
    Tensor* gx = ctx.parent_grads[0];
    Tensor* gk = ctx.parent_grads[1];
    Tensor* gb = ctx.parent_grads[2];
    if (gx || gk) {
      double* dx = gx ? gx->data().data() : nullptr;
      double* dk = gk ? gk->data().data() : nullptr;
      const double* xp = xi.data();
      const double* kp = ki.data();
      for_each_tap_row(g, [&](std::size_t oi, std::size_t ii, std::size_t kk, std::size_t n) {
        const double u = up[oi];
        if (dx)
          for (std::size_t c = 0; c < n; ++c) dx[ii + c] += u * kp[kk + c];
        if (dk)
          for (std::size_t c = 0; c < n; ++c) dk[kk + c] += u * xp[ii + c];
      });
    }
    if (gb) {
      const std::size_t per_chan = g.ot * g.oh * g.ow;
      auto db = gb->data();
      for (std::size_t co = 0; co < g.cout; ++co) {
        double s = 0.0;
        for (std::size_t i = 0; i < per_chan; ++i) s += up[co * per_chan + i];
        db[co] += s;
      }
    }
  };
  return input.tape().record(std::move(out), {input, kernel, bias}, back, "conv3d");
}

// ---------------------------------------------------------------------------
// affine

Var affine(Var x, Var weight, Var bias) {
  require_same_tape(x, weight);
  require_same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& w = weight.value();
  const Tensor& b = bias.value();
  if (w.rank() != 2) throw DimensionError("affine weight must be [m,n], got " + shape_string(w.shape()));
  const std::size_t m = w.extent(0);
  const std::size_t n = w.extent(1);
  if (b.rank() != 1 || b.extent(0) != m) {
    throw DimensionError("affine bias must be [" + std::to_string(m) + "], got " +
                         shape_string(b.shape()));
  }
  std::size_t rows = 0;
  if (xv.rank() == 1) {
    rows = 1;
  } else if (xv.rank() == 2) {
    rows = xv.extent(0);
  } else {
    throw DimensionError("affine input must be [n] or [T,n], got " + shape_string(xv.shape()));
  }
  if (xv.shape().back() != n) {
    throw DimensionError("affine inner dimension mismatch: weight has " + std::to_string(n) +
                         " columns, input has " + std::to_string(xv.shape().back()));
  }

  Shape out_shape = xv.rank() == 1 ? Shape{m} : Shape{rows, m};
  Tensor out(out_shape, 0.0);
  {
    auto o = out.data();
    auto xi = xv.data();
    auto wi = w.data();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += wi[i * n + j] * xi[r * n + j];
        o[r * m + i] = s + b[i];
      }
    }
  }

  auto back = [rows, m, n](const BackwardContext& ctx) {
    const auto up = ctx.upstream.data();
    const auto xi = ctx.parents[0].value().data();
    const auto wi = ctx.parents[1].value().data();
    if (Tensor* gx = ctx.parent_grads[0]) {
      auto d = gx->data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) d[r * n + j] += up[r * m + i] * wi[i * n + j];
    }
    if (Tensor* gw = ctx.parent_grads[1]) {
      auto d = gw->data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) d[i * n + j] += up[r * m + i] * xi[r * n + j];
    }
    if (Tensor* gb = ctx.parent_grads[2]) {
      auto d = gb->data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < m; ++i) d[i] += up[r * m + i];
    }
  };
  return x.tape().record(std::move(out), {x, weight, bias}, back, "affine");
}

// ---------------------------------------------------------------------------
// activation

Var activation(Activation kind, Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape(), 0.0);
  auto o = out.data();
  auto xi = xv.data();
  switch (kind) {
    case Activation::relu: {
      double margin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < xi.size(); ++i) {
        o[i] = xi[i] > 0.0 ? xi[i] : 0.0;
        margin = std::min(margin, std::abs(xi[i]));
      }
      x.tape().note_kink(margin);
      auto back = [](const BackwardContext& ctx) {
        if (Tensor* g = ctx.parent_grads[0]) {
          auto d = g->data();
          const auto xin = ctx.parents[0].value().data();
          const auto up = ctx.upstream.data();
          for (std::size_t i = 0; i < d.size(); ++i) {
            if (xin[i] > 0.0) d[i] += up[i];
          }
        }
      };
      return x.tape().record(std::move(out), {x}, back, "relu");
    }
    case Activation::sigmoid: {
      for (std::size_t i = 0; i < xi.size(); ++i) o[i] = stable_sigmoid(xi[i]);
      auto back = [](const BackwardContext& ctx) {
        if (Tensor* g = ctx.parent_grads[0]) {
          auto d = g->data();
          const auto s = ctx.value.data();
          const auto up = ctx.upstream.data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += up[i] * s[i] * (1.0 - s[i]);
        }
      };
      return x.tape().record(std::move(out), {x}, back, "sigmoid");
    }
  }
  throw ConfigError("unknown activation kind " + std::to_string(static_cast<int>(kind)));
}

// ---------------------------------------------------------------------------
// reductions

Var temporal_reduce(Var x, Reduce mode) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) {
    throw DimensionError("temporal_reduce expects [T,F], got " + shape_string(xv.shape()));
  }
  const std::size_t steps = xv.extent(0);
  const std::size_t feats = xv.extent(1);
  auto xi = xv.data();
  Tensor out({feats}, 0.0);
  auto o = out.data();

  if (mode == Reduce::mean) {
    for (std::size_t f = 0; f < feats; ++f) {
      double s = 0.0;
      for (std::size_t t = 0; t < steps; ++t) s += xi[t * feats + f];
      o[f] = s / static_cast<double>(steps);
    }
    auto back = [steps, feats](const BackwardContext& ctx) {
      if (Tensor* g = ctx.parent_grads[0]) {
        auto d = g->data();
        const auto up = ctx.upstream.data();
        const double inv = 1.0 / static_cast<double>(steps);
        for (std::size_t t = 0; t < steps; ++t)
          for (std::size_t f = 0; f < feats; ++f) d[t * feats + f] += up[f] * inv;
      }
    };
    return x.tape().record(std::move(out), {x}, back, "temporal_mean");
  }
  if (mode != Reduce::max) {
    throw ConfigError("unknown temporal reduction kind " + std::to_string(static_cast<int>(mode)));
  }

  std::vector<std::size_t> argmax(feats, 0);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < feats; ++f) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < steps; ++t) {
      if (xi[t * feats + f] > xi[best * feats + f]) best = t;
    }
    for (std::size_t t = 0; t < steps; ++t) {
      if (t != best) margin = std::min(margin, xi[best * feats + f] - xi[t * feats + f]);
    }
    argmax[f] = best;
    o[f] = xi[best * feats + f];
  }
  x.tape().note_kink(margin);
  auto back = [argmax = std::move(argmax), feats](const BackwardContext& ctx) {
    if (Tensor* g = ctx.parent_grads[0]) {
      auto d = g->data();
      const auto up = ctx.upstream.data();
      for (std::size_t f = 0; f < feats; ++f) d[argmax[f] * feats + f] += up[f];
    }
  };
  return x.tape().record(std::move(out), {x}, back, "temporal_max");
}

Var spatial_mean(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4) {
    throw DimensionError("spatial_mean expects [C,T,H,W], got " + shape_string(xv.shape()));
  }
  const std::size_t c = xv.extent(0), t = xv.extent(1);
  const std::size_t plane = xv.extent(2) * xv.extent(3);
  auto xi = xv.data();
  Tensor out({t, c}, 0.0);
  auto o = out.data();
  const double inv = 1.0 / static_cast<double>(plane);
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ti = 0; ti < t; ++ti) {
      double s = 0.0;
      const std::size_t base = (ci * t + ti) * plane;
      for (std::size_t p = 0; p < plane; ++p) s += xi[base + p];
      o[ti * c + ci] = s * inv;
    }
  }
  auto back = [c, t, plane, inv](const BackwardContext& ctx) {
    if (Tensor* g = ctx.parent_grads[0]) {
      auto d = g->data();
      const auto up = ctx.upstream.data();
      for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t ti = 0; ti < t; ++ti) {
          const double u = up[ti * c + ci] * inv;
          const std::size_t base = (ci * t + ti) * plane;
          for (std::size_t p = 0; p < plane; ++p) d[base + p] += u;
        }
    }
  };
  return x.tape().record(std::move(out), {x}, back, "spatial_mean");
}

// ---------------------------------------------------------------------------
// losses

Var mse(Var pred, Var target) {
  require_same_tape(pred, target);
  const Tensor& p = pred.value();
  const Tensor& y = target.value();
  if (p.numel() != y.numel()) {
    throw DimensionError("mse length mismatch: prediction has " + std::to_string(p.numel()) +
                         " values, target has " + std::to_string(y.numel()));
  }
  const std::size_t n = p.numel();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p[i] - y[i];
    s += d * d;
  }
  auto back = [n](const BackwardContext& ctx) {
    const auto pv = ctx.parents[0].value().data();
    const auto yv = ctx.parents[1].value().data();
    const double u = ctx.upstream[0] * 2.0 / static_cast<double>(n);
    if (Tensor* g = ctx.parent_grads[0]) {
      auto d = g->data();
      for (std::size_t i = 0; i < n; ++i) d[i] += u * (pv[i] - yv[i]);
    }
    if (Tensor* g = ctx.parent_grads[1]) {
      auto d = g->data();
      for (std::size_t i = 0; i < n; ++i) d[i] -= u * (pv[i] - yv[i]);
    }
  };
  return pred.tape().record(Tensor::scalar(s / static_cast<double>(n)), {pred, target}, back, "mse");
}

Var logistic_loss(Var logit, int label) {
  require_scalar(logit, "logistic_loss");
  if (label != 0 && label != 1) {
    throw DomainError("logistic_loss label must be 0 or 1, got " + std::to_string(label));
  }
  const double z = logit.value()[0];
  // softplus(z) - y*z, evaluated without overflow
  const double loss = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  auto back = [label](const BackwardContext& ctx) {
    if (Tensor* g = ctx.parent_grads[0]) {
      const double z = ctx.parents[0].value()[0];
      g->data()[0] += ctx.upstream[0] * (stable_sigmoid(z) - label);
    }
  };
  return logit.tape().record(Tensor::scalar(loss), {logit}, back, "logistic_loss");
}

// ---------------------------------------------------------------------------
// scalar plumbing

Var stack_scalars(std::span<const Var> scalars) {
  if (scalars.empty()) throw DimensionError("stack_scalars needs at least one operand");
  std::vector<double> vals;
  vals.reserve(scalars.size());
  for (const Var& v : scalars) {
    require_same_tape(scalars.front(), v);
    require_scalar(v, "stack_scalars");
    vals.push_back(v.value()[0]);
  }
  auto back = [](const BackwardContext& ctx) {
    for (std::size_t i = 0; i < ctx.parent_grads.size(); ++i) {
      if (Tensor* g = ctx.parent_grads[i]) g->data()[0] += ctx.upstream[i];
    }
  };
  const std::size_t n = vals.size();
  return scalars.front().tape().record(Tensor({n, 1}, std::move(vals)),
                                       std::vector<Var>(scalars.begin(), scalars.end()), back,
                                       "stack");
}

Var weighted_sum(std::span<const Var> terms, std::span<const double> coeffs) {
  if (terms.empty()) throw DimensionError("weighted_sum needs at least one operand");
  if (terms.size() != coeffs.size()) {
    throw DimensionError("weighted_sum has " + std::to_string(terms.size()) + " terms but " +
                         std::to_string(coeffs.size()) + " coefficients");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require_same_tape(terms.front(), terms[i]);
    require_scalar(terms[i], "weighted_sum");
    s += coeffs[i] * terms[i].value()[0];
  }
  auto back = [c = std::vector<double>(coeffs.begin(), coeffs.end())](const BackwardContext& ctx) {
    for (std::size_t i = 0; i < ctx.parent_grads.size(); ++i) {
      if (Tensor* g = ctx.parent_grads[i]) g->data()[0] += ctx.upstream[0] * c[i];
    }
  };
  return terms.front().tape().record(Tensor::scalar(s),
                                     std::vector<Var>(terms.begin(), terms.end()), back,
                                     "weighted_sum");
}

Var mean_scalars(std::span<const Var> scalars) {
  if (scalars.empty()) throw DimensionError("mean_scalars needs at least one operand");
  // sum first, then divide, so the value matches a plain left-to-right mean
  double s = 0.0;
  for (const Var& v : scalars) {
    require_same_tape(scalars.front(), v);
    require_scalar(v, "mean_scalars");
    s += v.value()[0];
  }
  const double inv = 1.0 / static_cast<double>(scalars.size());
  auto back = [inv](const BackwardContext& ctx) {
    for (std::size_t i = 0; i < ctx.parent_grads.size(); ++i) {
      if (Tensor* g = ctx.parent_grads[i]) g->data()[0] += ctx.upstream[0] * inv;
    }
  };
  return scalars.front().tape().record(Tensor::scalar(s / static_cast<double>(scalars.size())),
                                       std::vector<Var>(scalars.begin(), scalars.end()), back,
                                       "mean");
}

Var scale(Var x, double factor) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape(), 0.0);
  for (std::size_t i = 0; i < xv.numel(); ++i) out[i] = xv[i] * factor;
  auto back = [factor](const BackwardContext& ctx) {
    if (Tensor* g = ctx.parent_grads[0]) {
      auto d = g->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += ctx.upstream[i] * factor;
    }
  };
  return x.tape().record(std::move(out), {x}, back, "scale");
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  auto back = [](const BackwardContext& ctx) {
    if (Tensor* g = ctx.parent_grads[0]) {
      auto d = g->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += ctx.upstream[i];
    }
  };
  return x.tape().record(std::move(out), {x}, back, "reshape");
}

}  // namespace wsda::num
