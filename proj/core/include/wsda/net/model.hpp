#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsda/num/ops.hpp"
#include "wsda/num/tape.hpp"
#include "wsda/num/tensor.hpp"

namespace wsda::net {

using num::Tensor;
using num::Var;

struct ConvBlockSpec {
  std::size_t channels = 8;
  num::Triple kernel{3, 3, 3};
  std::size_t temporal_stride = 2;  // dt
  std::size_t spatial_stride = 1;
};

struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t window = 8;  // frames per instance
  std::vector<ConvBlockSpec> blocks{{6, {3, 3, 3}, 2, 2}, {12, {3, 3, 3}, 2, 1}};
  std::size_t head_hidden = 16;
  double init_scale = 1.0;
  std::uint64_t seed = 1;

  /// Throws ConfigError on non-positive extents, odd kernels, or a window
  /// that the temporal strides do not divide evenly.
  void validate() const;

  std::size_t temporal_factor() const;  // product of dt
  std::size_t feature_steps() const;    // T' = window / temporal_factor
  std::size_t feature_dim() const;      // F = channels of the last block
  num::Shape window_shape() const;      // [C, window, height, width]
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// The four parameter sets. theta_f is shared by both domains.
struct ModelParams {
  std::vector<NamedTensor> theta_f;
  std::vector<NamedTensor> theta_l;
  std::vector<NamedTensor> theta_wl;
  std::vector<NamedTensor> theta_d;

  /// All tensors in the fixed order f, l, wl, d.
  std::vector<NamedTensor> flatten() const;
  /// Rebuilds from flatten() output, checking names and shapes against `config`.
  static ModelParams from_flat(const ModelConfig& config, std::span<const NamedTensor> tensors);

  bool all_finite() const;
  std::size_t parameter_count() const;
  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

/// Uniform(-s, s) with s = init_scale / sqrt(fan_in); biases start at zero.
ModelParams init_params(const ModelConfig& config);

/// Parameters registered as leaves on one tape.
struct BoundParams {
  std::vector<Var> f, l, wl, d;
  std::vector<Var> all() const;
};

BoundParams bind(num::Tape& tape, const ModelParams& params);

/// Identity forward; backward multiplies the upstream gradient by -lambda.
Var grl(Var x, double lambda);

/// G_f: conv blocks with relu, spatial mean, giving [T', F].
Var features(const ModelConfig& config, std::span<const Var> theta_f, Var window);
/// G_l: per-timestep affine-relu-affine, giving [T'].
Var label_head(std::span<const Var> theta_l, Var feats);
/// G_wl: temporal mean then affine-relu-affine, giving one value.
Var weak_head(std::span<const Var> theta_wl, Var feats);
/// G_d behind the gradient reversal layer: one domain logit (1 = target).
Var domain_head(std::span<const Var> theta_d, Var feats, double lambda);

}  // namespace wsda::net
