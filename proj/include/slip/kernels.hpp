#pragma once

// Data-parallel building blocks for the toy backbone, fusion module and SCM
// decoder. Every kernel exists twice: a plain serial reference and an OpenMP
// version. The two accumulate each output element in the same order, so their
// results are bitwise identical; tests/test_kernels.cpp holds them to that.

#include <cstddef>
#include <span>
#include <vector>

#include "slip/tensor.hpp"

namespace slip::kernels {

/// Geometry of a 2x2 stride-2 transposed convolution, channels -> channels.
struct Upsample2x {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;

  std::size_t in_size() const { return in_channels * in_height * in_width; }
  std::size_t out_size() const { return out_channels * in_height * in_width * 4; }
  std::size_t weight_size() const { return in_channels * out_channels * 4; }
};

namespace serial {

/// y[n] = W x[n] + b. W is out x in, row-major; y must be n x out.
void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& x, Matrix& y);
/// Accumulates into grad_weight / grad_bias; overwrites grad_x when given.
void affine_backward(std::span<const double> weight, const Matrix& x,
                     const Matrix& grad_y, std::span<double> grad_weight,
                     std::span<double> grad_bias, Matrix* grad_x);
void gelu_forward(const Matrix& pre, Matrix& out);
/// grad_pre = grad_out * gelu'(pre)
void gelu_backward(const Matrix& pre, const Matrix& grad_out, Matrix& grad_pre);
void upsample_forward(const Upsample2x& g, std::span<const double> weight,
                      std::span<const double> bias, const Matrix& x, Matrix& y);
void upsample_backward(const Upsample2x& g, std::span<const double> weight,
                       const Matrix& x, const Matrix& grad_y,
                       std::span<double> grad_weight, std::span<double> grad_bias,
                       Matrix* grad_x);
/// Per-row mean of absolute values.
std::vector<double> row_mean_abs(const Matrix& x);

}  // namespace serial

namespace omp {

/// Same contracts as serial::.
/// y[n] = W x[n] + b. W is out x in, row-major; y must be n x out.
void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& x, Matrix& y);
/// Accumulates into grad_weight / grad_bias; overwrites grad_x when given.
void affine_backward(std::span<const double> weight, const Matrix& x,
                     const Matrix& grad_y, std::span<double> grad_weight,
                     std::span<double> grad_bias, Matrix* grad_x);
void gelu_forward(const Matrix& pre, Matrix& out);
/// grad_pre = grad_out * gelu'(pre)
void gelu_backward(const Matrix& pre, const Matrix& grad_out, Matrix& grad_pre);
void upsample_forward(const Upsample2x& g, std::span<const double> weight,
                      std::span<const double> bias, const Matrix& x, Matrix& y);
void upsample_backward(const Upsample2x& g, std::span<const double> weight,
                       const Matrix& x, const Matrix& grad_y,
                       std::span<double> grad_weight, std::span<double> grad_bias,
                       Matrix* grad_x);
/// Per-row mean of absolute values.
std::vector<double> row_mean_abs(const Matrix& x);

}  // namespace omp

// Entry points used by the model: the OpenMP kernels when compiled in.
#ifdef _OPENMP
using namespace omp;
#else
using namespace serial;
#endif

double gelu(double x);
double gelu_derivative(double x);

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace slip::kernels
