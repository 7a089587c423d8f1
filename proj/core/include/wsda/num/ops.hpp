#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "wsda/num/tape.hpp"

namespace wsda::num {

using Triple = std::array<std::size_t, 3>;

enum class Activation { relu, sigmoid };
enum class Reduce { mean, max };

/// Parses "relu" / "sigmoid"; anything else is a ConfigError.
Activation parse_activation(std::string_view name);
Reduce parse_reduce(std::string_view name);

/// Output extent of one convolved axis: floor((n + 2p - k) / s) + 1.
std::size_t conv_output_extent(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad);

/// 3-D cross-correlation of input [Cin,T,H,W] with kernel [Cout,Cin,kT,kH,kW]
/// plus bias [Cout]; stride and padding are given as (time, height, width).
Var conv3d(Var input, Var kernel, Var bias, Triple stride, Triple padding);

/// weight [m,n] times x plus bias [m]. x may be a vector [n] or a row batch
/// [T,n], in which case the map is applied to every row giving [T,m].
Var affine(Var x, Var weight, Var bias);

Var activation(Activation kind, Var x);
inline Var relu(Var x) { return activation(Activation::relu, x); }
inline Var sigmoid(Var x) { return activation(Activation::sigmoid, x); }

/// Per-feature reduction over the leading axis of [T,F], giving [F].
/// Max ties resolve to the lowest timestep, which alone receives gradient.
Var temporal_reduce(Var x, Reduce mode);

/// Mean over the spatial axes of [C,T,H,W], transposed to [T,C].
Var spatial_mean(Var x);

/// (1/n) sum (pred - target)^2 as a scalar. `target` is usually a constant.
Var mse(Var pred, Var target);

/// Binary logistic loss of a scalar logit against label 0 or 1.
Var logistic_loss(Var logit, int label);

/// Packs single-element nodes into a column [n,1] (for max over instances).
Var stack_scalars(std::span<const Var> scalars);

/// Arithmetic mean of single-element nodes, summed left to right.
Var mean_scalars(std::span<const Var> scalars);

/// sum_i coeffs[i] * terms[i] over single-element nodes.
Var weighted_sum(std::span<const Var> terms, std::span<const double> coeffs);

Var scale(Var x, double factor);
Var reshape(Var x, Shape shape);

}  // namespace wsda::num
