#include "wsda/num/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "wsda/error.hpp"

namespace wsda::num {

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / denom;
}

double evaluate_graph(const GraphFn& graph, std::span<const Tensor> point) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& t : point) leaves.push_back(tape.leaf(t));
  return graph(tape, leaves).value().item();
}

GradCheckResult finite_difference_check(const GraphFn& graph, std::span<const Tensor> point,
                                        double eps, const GradCheckOptions& options) {
  if (!(eps > 0.0)) throw ConfigError("finite-difference step must be positive");

  GradCheckResult result;
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& t : point) leaves.push_back(tape.leaf(t));
    Var seed = graph(tape, leaves);
    analytic = backward(tape, seed, leaves);
    result.kink_margin = tape.kink_margin();
  }

  ValueFn value = options.reference;
  if (!value) value = [&graph](std::span<const Tensor> p) { return evaluate_graph(graph, p); };

  std::vector<std::size_t> indices = options.checked;
  if (indices.empty()) {
    indices.resize(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) indices[i] = i;
  }

  std::vector<Tensor> work(point.begin(), point.end());
  for (std::size_t ti : indices) {
    if (ti >= work.size()) throw ContractError("checked tensor index out of range");
    Tensor& t = work[ti];
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t[i];
      t[i] = saved + eps;
      const double plus = value(work);
      t[i] = saved - eps;
      const double minus = value(work);
      t[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = relative_error(analytic[ti][i], numeric);
      ++result.coordinates;
      if (err > result.max_rel_error || result.coordinates == 1) {
        result.max_rel_error = err;
        result.worst_tensor = ti;
        result.worst_index = i;
        result.analytic = analytic[ti][i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace wsda::num
