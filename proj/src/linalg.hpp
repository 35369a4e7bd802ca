#pragma once

#include "advtext/tensor.hpp"

namespace advtext::detail {

// y += W x
inline void matvec_acc(const Tensor2& w, const double* x, double* y) {
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  const double* wp = w.flat().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = wp + r * cols;
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
    y[r] += s;
  }
}

// x += W^T y
inline void matvec_t_acc(const Tensor2& w, const double* y, double* x) {
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  const double* wp = w.flat().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    const double* wr = wp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) x[c] += wr[c] * yr;
  }
}

// G += y x^T
inline void outer_acc(Tensor2& g, const double* y, const double* x) {
  const std::size_t rows = g.rows();
  const std::size_t cols = g.cols();
  double* gp = g.flat().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    double* gr = gp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gr[c] += yr * x[c];
  }
}

}  // namespace advtext::detail
