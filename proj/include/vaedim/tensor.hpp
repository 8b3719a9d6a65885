#pragma once
// Dense row-major tensor of doubles. Rank is dynamic but stays <= 3 in
// practice (batch, rows, cols). Value semantics throughout.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vaedim {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), v_(shape_numel(shape_), fill) {}
  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), v_(std::move(values)) {
    if (v_.size() != shape_numel(shape_))
      throw std::invalid_argument("Tensor: " + std::to_string(v_.size()) +
                                  " values for shape " + shape_str(shape_));
  }

  static Tensor scalar(double x) { return Tensor(Shape{1}, {x}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t numel() const { return v_.size(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  // 2-D accessors; callers guarantee rank 2.
  double& at(std::size_t r, std::size_t c) { return v_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return v_[r * shape_[1] + c]; }

  std::vector<double>& vec() { return v_; }
  const std::vector<double>& vec() const { return v_; }

  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

 private:
  Shape shape_;
  std::vector<double> v_;
};

}  // namespace vaedim
