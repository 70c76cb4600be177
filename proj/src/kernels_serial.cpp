#include <algorithm>
#include <cmath>
#include <numbers>

#include "kernels_common.hpp"

namespace slip::kernels {

namespace {
constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = std::exp(-0.5 * x * x) * kInvSqrt2Pi;
  return cdf + x * pdf;
}

namespace serial {

void affine_forward(std::span<const double> weight, std::span<const double> bias,
                    const Matrix& x, Matrix& y) {
  detail::check_affine(weight, bias, x, y);
  const std::size_t in = x.cols;
  for (std::size_t n = 0; n < x.rows; ++n) {
    const double* xr = x.data.data() + n * in;
    for (std::size_t o = 0; o < y.cols; ++o) {
      const double* wr = weight.data() + o * in;
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      y.data[n * y.cols + o] = acc;
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
  for (std::size_t o = 0; o < out; ++o) {
    double* gw = grad_weight.data() + o * in;
    for (std::size_t n = 0; n < x.rows; ++n) {
      const double g = grad_y.data[n * out + o];
      grad_bias[o] += g;
      const double* xr = x.data.data() + n * in;
      for (std::size_t i = 0; i < in; ++i) gw[i] += g * xr[i];
    }
  }
  if (grad_x == nullptr) return;
  *grad_x = Matrix(x.rows, in);
  for (std::size_t n = 0; n < x.rows; ++n) {
    double* gx = grad_x->data.data() + n * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = grad_y.data[n * out + o];
      const double* wr = weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) gx[i] += g * wr[i];
    }
  }
}

void gelu_forward(const Matrix& pre, Matrix& out) {
  out = Matrix(pre.rows, pre.cols);
  for (std::size_t k = 0; k < pre.data.size(); ++k) out.data[k] = gelu(pre.data[k]);
}

void gelu_backward(const Matrix& pre, const Matrix& grad_out, Matrix& grad_pre) {
  grad_pre = Matrix(pre.rows, pre.cols);
  for (std::size_t k = 0; k < pre.data.size(); ++k) {
    grad_pre.data[k] = grad_out.data[k] * gelu_derivative(pre.data[k]);
  }
}

void upsample_forward(const Upsample2x& g, std::span<const double> weight,
                      std::span<const double> bias, const Matrix& x, Matrix& y) {
  detail::check_upsample(g, weight, x, y);
  const std::size_t plane = g.in_height * g.in_width;
  for (std::size_t n = 0; n < x.rows; ++n) {
    const double* xr = x.data.data() + n * x.cols;
    double* yr = y.data.data() + n * y.cols;
    for (std::size_t co = 0; co < g.out_channels; ++co) {
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
  for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          double& gw = grad_weight[((ci * g.out_channels + co) * 2 + a) * 2 + b];
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
      }
    }
  }
  const std::size_t out_plane = plane * 4;
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t n = 0; n < x.rows; ++n) {
      const double* gy = grad_y.data.data() + n * grad_y.cols + co * out_plane;
      for (std::size_t k = 0; k < out_plane; ++k) grad_bias[co] += gy[k];
    }
  }
  if (grad_x == nullptr) return;
  *grad_x = Matrix(x.rows, x.cols);
  for (std::size_t n = 0; n < x.rows; ++n) {
    const double* gy = grad_y.data.data() + n * grad_y.cols;
    double* gx = grad_x->data.data() + n * x.cols;
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
  for (std::size_t n = 0; n < x.rows; ++n) {
    double acc = 0.0;
    for (double v : x.row(n)) acc += std::abs(v);
    out[n] = acc / static_cast<double>(x.cols);
  }
  return out;
}

}  // namespace serial
}  // namespace slip::kernels
