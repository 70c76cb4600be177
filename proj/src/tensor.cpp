#include "slip/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "slip/errors.hpp"

namespace slip {

Matrix slice_rows(const Matrix& src, std::size_t first, std::size_t count) {
  if (first + count > src.rows) {
    throw ArgumentError("slice_rows: range exceeds matrix");
  }
  Matrix out(count, src.cols);
  std::copy_n(src.data.begin() + static_cast<std::ptrdiff_t>(first * src.cols),
              count * src.cols, out.data.begin());
  return out;
}

Matrix stack_rows(std::span<const Matrix* const> parts) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool have_cols = false;
  for (const Matrix* m : parts) {
    if (m->rows == 0) continue;
    if (have_cols && m->cols != cols) {
      throw ArgumentError("stack_rows: column mismatch");
    }
    cols = m->cols;
    have_cols = true;
    rows += m->rows;
  }
  Matrix out(rows, cols);
  auto it = out.data.begin();
  for (const Matrix* m : parts) {
    it = std::copy(m->data.begin(), m->data.end(), it);
  }
  return out;
}

std::size_t Tensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor& ParamGroup::at(const std::string& tensor_name) {
  for (auto& t : tensors) {
    if (t.name == tensor_name) return t;
  }
  throw ArgumentError("no tensor '" + tensor_name + "' in group " + name);
}

const Tensor& ParamGroup::at(const std::string& tensor_name) const {
  return const_cast<ParamGroup*>(this)->at(tensor_name);
}

std::size_t ParamGroup::numel() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.data.size();
  return n;
}

ParamGroup ParamGroup::zeros_like() const {
  ParamGroup out = *this;
  out.set_zero();
  return out;
}

void ParamGroup::set_zero() {
  for (auto& t : tensors) std::fill(t.data.begin(), t.data.end(), 0.0);
}

bool ParamGroup::all_finite() const {
  for (const auto& t : tensors) {
    for (double v : t.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

bool ParamGroup::identical_to(const ParamGroup& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& a = tensors[i];
    const auto& b = other.tensors[i];
    if (a.name != b.name || a.shape != b.shape) return false;
    if (a.data.size() != b.data.size()) return false;
    if (!a.data.empty() &&
        std::memcmp(a.data.data(), b.data.data(),
                    a.data.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace slip
