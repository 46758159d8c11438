#pragma once

#include <cstddef>
#include <random>
#include <vector>

namespace graphda {

// Dense row-major matrix of doubles. Scalars are 1x1, row vectors 1xd.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row_ptr(std::size_t i) { return data.data() + i * cols; }
  const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  static Matrix scalar(double v) {
    Matrix m(1, 1);
    m.data[0] = v;
    return m;
  }
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// Glorot-uniform init: entries in +-sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in,
                      std::size_t fan_out, std::mt19937_64& rng);

double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);

}  // namespace graphda
