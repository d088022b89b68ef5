#include "resgin/tensor.hpp"

namespace resgin::diff {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul shape mismatch: " + a.shape_str() + " * " + b.shape_str());
  Tensor c(a.rows, b.cols);
  matmul_accumulate(c, a, b);
  return c;
}

void matmul_accumulate(Tensor& c, const Tensor& a, const Tensor& b, double scale) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols)
    throw ShapeError("matmul shape mismatch: " + a.shape_str() + " * " + b.shape_str() + " -> " +
                     c.shape_str());
  const int n = a.rows, k = a.cols, m = b.cols;
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (int p = 0; p < k; ++p) {
      const double av = scale * arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row_ptr(p);
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

Tensor transpose(const Tensor& a) {
  Tensor t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

}  // namespace resgin::diff
