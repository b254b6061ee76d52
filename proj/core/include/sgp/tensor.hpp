#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgp/errors.hpp"

namespace sgp::num {

/// Dense row-major tensor of 64-bit reals. Rank is small (0..3); shape {} is
/// a scalar. Completed operations never leave NaN/Inf behind: every tape op
/// verifies its output with ensure_finite.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> values);
  static Tensor mat(int rows, int cols, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_.at(axis); }
  int64_t size() const { return static_cast<int64_t>(v_.size()); }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  double& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

  // 2-D accessors (rows x cols, row-major).
  double& at(int r, int c) { return v_[static_cast<size_t>(r) * shape_[1] + c]; }
  double at(int r, int c) const { return v_[static_cast<size_t>(r) * shape_[1] + c]; }

  /// Scalar value; throws ContractError when the tensor is not a scalar.
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

  void fill(double v);
  bool all_finite() const;
  void ensure_finite(const std::string& what) const;

  bool requires_grad = false;

 private:
  std::vector<int> shape_;
  std::vector<double> v_;
};

int64_t shape_size(const std::vector<int>& shape);

}  // namespace sgp::num
