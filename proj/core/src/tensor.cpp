#include "sgp/tensor.hpp"

#include <cmath>
#include <sstream>

namespace sgp::num {

int64_t shape_size(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ContractError("tensor shape must have positive dims");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
  v_.assign(static_cast<size_t>(shape_size(shape_)), fill);
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.v_.assign(1, v);
  return t;
}

Tensor Tensor::vec(std::vector<double> values) {
  Tensor t;
  t.shape_ = {static_cast<int>(values.size())};
  t.v_ = std::move(values);
  if (t.v_.empty()) throw ContractError("vector tensor must be non-empty");
  return t;
}

Tensor Tensor::mat(int rows, int cols, std::vector<double> values) {
  Tensor t;
  t.shape_ = {rows, cols};
  if (static_cast<int64_t>(values.size()) != shape_size(t.shape_))
    throw ContractError("matrix values do not match shape");
  t.v_ = std::move(values);
  return t;
}

double Tensor::item() const {
  if (!shape_.empty() || v_.size() != 1)
    throw ContractError("item() requires a scalar tensor, got shape " + shape_str());
  return v_[0];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << "]";
  return os.str();
}

void Tensor::fill(double v) { v_.assign(v_.size(), v); }

bool Tensor::all_finite() const {
  for (double x : v_)
    if (!std::isfinite(x)) return false;
  return true;
}

void Tensor::ensure_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError("non-finite values produced by " + what);
}

}  // namespace sgp::num
