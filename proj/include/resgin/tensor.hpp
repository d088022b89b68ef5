#pragma once

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace resgin::diff {

/// Shape contract violation (mismatched operands, bad construction).
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Out-of-range gather/segment index.
class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf produced by an operation; tensors must stay finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Vectors are 1xN rows, scalars 1x1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw ShapeError("negative tensor dimension");
  }

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  static Tensor row(std::vector<double> v) {
    Tensor t;
    t.rows = 1;
    t.cols = static_cast<int>(v.size());
    t.data = std::move(v);
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rs) {
    Tensor t(static_cast<int>(rs.size()), rs.size() ? static_cast<int>(rs.begin()->size()) : 0);
    int i = 0;
    for (const auto& r : rs) {
      if (static_cast<int>(r.size()) != t.cols) throw ShapeError("ragged initializer");
      int j = 0;
      for (double v : r) t.at(i, j++) = v;
      ++i;
    }
    return t;
  }

  int size() const { return rows * cols; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  double* row_ptr(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row_ptr(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

/// C = A * B with a fixed i-k-j accumulation order.
Tensor matmul(const Tensor& a, const Tensor& b);

/// C += scale * A * B, same accumulation order as matmul.
void matmul_accumulate(Tensor& c, const Tensor& a, const Tensor& b, double scale = 1.0);

Tensor transpose(const Tensor& a);

}  // namespace resgin::diff
