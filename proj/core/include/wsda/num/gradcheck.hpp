#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "wsda/num/tape.hpp"

namespace wsda::num {

/// Builds a scalar graph on `tape` from leaves bound to the check point.
using GraphFn = std::function<Var(Tape& tape, std::span<const Var> leaves)>;
/// Plain scalar function of the point, used as the finite-difference target.
using ValueFn = std::function<double(std::span<const Tensor> point)>;

struct GradCheckOptions {
  /// Target differentiated numerically; defaults to the forward value of the graph.
  /// Set it when the graph's backward rule is deliberately not the derivative of
  /// its forward value (e.g. gradient reversal).
  ValueFn reference;
  /// Point indices to check; empty means all.
  std::vector<std::size_t> checked;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  /// Smallest kink distance seen on the unperturbed forward pass.
  double kink_margin = 0.0;
  std::size_t coordinates = 0;
};

/// |a - b| / max(|a|, |b|, 1e-12)
double relative_error(double a, double b);

/// Central differences (f(x+eps) - f(x-eps)) / 2eps on every checked
/// coordinate, compared against one backward pass of `graph`.
GradCheckResult finite_difference_check(const GraphFn& graph, std::span<const Tensor> point,
                                        double eps, const GradCheckOptions& options = {});

/// Forward value of `graph` at `point` (no gradient bookkeeping retained).
double evaluate_graph(const GraphFn& graph, std::span<const Tensor> point);

}  // namespace wsda::num
