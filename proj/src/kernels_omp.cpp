#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kernels_common.hpp"

namespace slip::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace omp {

using Index = std::ptrdiff_t;

void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& x, Matrix& y) {
  detail::check_affine(weight, bias, x, y);
  const std::size_t in = x.cols;
  const Index rows = static_cast<Index>(x.rows);
  const Index out = static_cast<Index>(y.cols);
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < rows; ++n) {
    for (Index o = 0; o < out; ++o) {
      const double* xr = x.data.data() + n * in;
      const double* wr = weight.data() + o * in;
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      y.data[n * out + o] = acc;
    }
  }
}

void affine_backward(std::span<const double> weight, const Matrix& x,
                     const Matrix& grad_y, std::span<double> grad_weight,
                     std::span<double> grad_bias, Matrix* grad_x) {
  const std::size_t in = x.cols;
  const std::size_t out = grad_y.cols;
  if (grad_weight.size() != weight.size() || grad_bias.size() != out ||
      weight.size() != in * out || grad_y.rows != x.rows) {
    throw ArgumentError("affine_backward: shape mismatch");
  }
  const Index outs = static_cast<Index>(out);
  const Index rows = static_cast<Index>(x.rows);
#pragma omp parallel for schedule(static)
  for (Index o = 0; o < outs; ++o) {
    double* gw = grad_weight.data() + o * in;
    for (Index n = 0; n < rows; ++n) {
      const double g = grad_y.data[n * out + o];
      grad_bias[o] += g;
      const double* xr = x.data.data() + n * in;
      for (std::size_t i = 0; i < in; ++i) gw[i] += g * xr[i];
    }
  }
  if (grad_x == nullptr) return;
  *grad_x = Matrix(x.rows, in);
  Matrix& gxm = *grad_x;
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < rows; ++n) {
    double* gx = gxm.data.data() + n * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = grad_y.data[n * out + o];
      const double* wr = weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) gx[i] += g * wr[i];
    }
  }
}

void gelu_forward(const Matrix& pre, Matrix& out) {
  out = Matrix(pre.rows, pre.cols);
  const Index total = static_cast<Index>(pre.data.size());
#pragma omp parallel for schedule(static)
  for (Index k = 0; k < total; ++k) out.data[k] = gelu(pre.data[k]);
}

void gelu_backward(const Matrix& pre, const Matrix& grad_out, Matrix& grad_pre) {
  grad_pre = Matrix(pre.rows, pre.cols);
  const Index total = static_cast<Index>(pre.data.size());
#pragma omp parallel for schedule(static)
  for (Index k = 0; k < total; ++k) {
    grad_pre.data[k] = grad_out.data[k] * gelu_derivative(pre.data[k]);
  }
}

void upsample_forward(const Upsample2x& g, std::span<const double> weight,
                      std::span<const double> bias, const Matrix& x, Matrix& y) {
  detail::check_upsample(g, weight, x, y);
  const std::size_t plane = g.in_height * g.in_width;
  const Index rows = static_cast<Index>(x.rows);
  const Index channels = static_cast<Index>(g.out_channels);
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < rows; ++n) {
    for (Index co = 0; co < channels; ++co) {
      const double* xr = x.data.data() + n * x.cols;
      double* yr = y.data.data() + n * y.cols;
      for (std::size_t i = 0; i < g.in_height; ++i) {
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t j = 0; j < g.in_width; ++j) {
            for (std::size_t b = 0; b < 2; ++b) {
              double acc = bias[co];
              for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
                acc += xr[ci * plane + i * g.in_width + j] *
                       weight[((ci * g.out_channels + co) * 2 + a) * 2 + b];
              }
              yr[detail::up_index(g, co, i, a, j, b)] = acc;
            }
          }
        }
      }
    }
  }
}

void upsample_backward(const Upsample2x& g, std::span<const double> weight,
                       const Matrix& x, const Matrix& grad_y,
                       std::span<double> grad_weight, std::span<double> grad_bias,
                       Matrix* grad_x) {
  if (grad_weight.size() != g.weight_size() || grad_bias.size() != g.out_channels ||
      grad_y.cols != g.out_size() || x.cols != g.in_size() || x.rows != grad_y.rows) {
    throw ArgumentError("upsample_backward: shape mismatch");
  }
  const std::size_t plane = g.in_height * g.in_width;
  const Index weights = static_cast<Index>(g.weight_size());
#pragma omp parallel for schedule(static)
  for (Index w = 0; w < weights; ++w) {
    // w = ((ci * out_channels + co) * 2 + a) * 2 + b
    const std::size_t b = static_cast<std::size_t>(w) % 2;
    const std::size_t a = (static_cast<std::size_t>(w) / 2) % 2;
    const std::size_t co = (static_cast<std::size_t>(w) / 4) % g.out_channels;
    const std::size_t ci = static_cast<std::size_t>(w) / 4 / g.out_channels;
    double& gw = grad_weight[w];
    for (std::size_t n = 0; n < x.rows; ++n) {
      const double* xr = x.data.data() + n * x.cols;
      const double* gy = grad_y.data.data() + n * grad_y.cols;
      for (std::size_t i = 0; i < g.in_height; ++i) {
        for (std::size_t j = 0; j < g.in_width; ++j) {
          gw += xr[ci * plane + i * g.in_width + j] *
                gy[detail::up_index(g, co, i, a, j, b)];
        }
      }
    }
  }
  const std::size_t out_plane = plane * 4;
  const Index channels = static_cast<Index>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (Index co = 0; co < channels; ++co) {
    for (std::size_t n = 0; n < x.rows; ++n) {
      const double* gy = grad_y.data.data() + n * grad_y.cols + co * out_plane;
      for (std::size_t k = 0; k < out_plane; ++k) grad_bias[co] += gy[k];
    }
  }
  if (grad_x == nullptr) return;
  *grad_x = Matrix(x.rows, x.cols);
  Matrix& gxm = *grad_x;
  const Index rows = static_cast<Index>(x.rows);
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < rows; ++n) {
    const double* gy = grad_y.data.data() + n * grad_y.cols;
    double* gx = gxm.data.data() + n * x.cols;
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      for (std::size_t i = 0; i < g.in_height; ++i) {
        for (std::size_t j = 0; j < g.in_width; ++j) {
          double acc = 0.0;
          for (std::size_t co = 0; co < g.out_channels; ++co) {
            for (std::size_t a = 0; a < 2; ++a) {
              for (std::size_t b = 0; b < 2; ++b) {
                acc += weight[((ci * g.out_channels + co) * 2 + a) * 2 + b] *
                       gy[detail::up_index(g, co, i, a, j, b)];
              }
            }
          }
          gx[ci * plane + i * g.in_width + j] = acc;
        }
      }
    }
  }
}

std::vector<double> row_mean_abs(const Matrix& x) {
  std::vector<double> out(x.rows, 0.0);
  if (x.cols == 0) return out;
  const Index rows = static_cast<Index>(x.rows);
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < rows; ++n) {
    double acc = 0.0;
    for (double v : x.row(n)) acc += std::abs(v);
    out[n] = acc / static_cast<double>(x.cols);
  }
  return out;
}

}  // namespace omp
}  // namespace slip::kernels
