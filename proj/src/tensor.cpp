#include "advtext/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "advtext/error.hpp"

namespace advtext {

void Tensor2::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor2::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor2::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

void Tensor2::scale(double factor) {
  for (double& v : data_) v *= factor;
}

void Tensor2::add_scaled(const Tensor2& other, double factor) {
  if (!same_shape(other)) throw Error(ErrorKind::kShape, "add_scaled: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += factor * other.data_[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace advtext
