#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace slip {

/// Dense row-major matrix. Batches of embeddings are stored one per row.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
  bool empty() const { return rows == 0; }
};

/// Stack `count` rows of `src` starting at `first` into a new matrix.
Matrix slice_rows(const Matrix& src, std::size_t first, std::size_t count);

/// Concatenate matrices with equal column counts vertically.
Matrix stack_rows(std::span<const Matrix* const> parts);

/// Named parameter tensor.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t numel() const;
};

/// One trainable component's parameters (E_I, E_T, R or D).
struct ParamGroup {
  std::string name;
  std::vector<Tensor> tensors;

  Tensor& at(const std::string& tensor_name);
  const Tensor& at(const std::string& tensor_name) const;
  std::size_t numel() const;

  /// Same names and shapes, all values zero.
  ParamGroup zeros_like() const;
  void set_zero();
  bool all_finite() const;
  /// Exact (bitwise) comparison of values and shapes.
  bool identical_to(const ParamGroup& other) const;
};

}  // namespace slip
