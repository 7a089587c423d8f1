#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace wsda::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Every extent is positive and `data().size() == shape_numel(shape())`.
/// Scalars are represented with shape {1}.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

  bool all_finite() const noexcept;
  void fill(double value) noexcept;

  /// Same data, new shape with an equal element count.
  Tensor reshaped(Shape shape) const;

  /// Shape and values compare exactly; requires_grad is ignored.
  friend bool operator==(const Tensor& a, const Tensor& b) noexcept;

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
};

}  // namespace wsda::num
