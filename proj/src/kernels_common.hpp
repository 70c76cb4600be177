#pragma once

#include <cmath>
#include <numbers>

#include "slip/errors.hpp"
#include "slip/kernels.hpp"

namespace slip::kernels::detail {

inline void check_affine(std::span<const double> weight, std::span<const double> bias,
                         const Matrix& x, const Matrix& y) {
  if (bias.size() != y.cols || weight.size() != y.cols * x.cols || x.rows != y.rows) {
    throw ArgumentError("affine: shape mismatch");
  }
}

inline void check_upsample(const Upsample2x& g, std::span<const double> weight,
                           const Matrix& x, const Matrix& y) {
  if (weight.size() != g.weight_size() || x.cols != g.in_size() ||
      y.cols != g.out_size() || x.rows != y.rows) {
    throw ArgumentError("upsample: shape mismatch");
  }
}

// Flat offset of output element (co, 2i+a, 2j+b).
inline std::size_t up_index(const Upsample2x& g, std::size_t co, std::size_t i,
                            std::size_t a, std::size_t j, std::size_t b) {
  const std::size_t out_h = 2 * g.in_height;
  const std::size_t out_w = 2 * g.in_width;
  return (co * out_h + 2 * i + a) * out_w + 2 * j + b;
}

}  // namespace slip::kernels::detail
