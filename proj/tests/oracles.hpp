#pragma once

// Naive reference implementations used as test oracles. They read raw
// parameter tensors and loop directly, sharing no code with the kernels.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "slip/model.hpp"
#include "slip/objectives.hpp"
#include "slip/rng.hpp"
#include "slip/scoring.hpp"
#include "slip/trainer.hpp"

namespace oracle {

using slip::Matrix;
using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double cos(const Vec& a, const Vec& b) {
  return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b)));
}

inline Vec row(const Matrix& m, std::size_t i) {
  return Vec(m.row(i).begin(), m.row(i).end());
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline double sum_sq_diff(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double disentanglement(const Matrix& c, const Matrix& l, const Matrix& s, double t = 1.0) {
  double total = 0.0;
  for (std::size_t i = 0; i < c.rows; ++i) {
    for (std::size_t j = 0; j < c.rows; ++j) {
      if (i == j) continue;
      double denom = 0.0;
      for (std::size_t p = 0; p < l.rows; ++p) denom += std::exp(cos(row(c, i), row(l, p)) / t);
      for (std::size_t q = 0; q < s.rows; ++q) denom += std::exp(cos(row(c, i), row(s, q)) / t);
      total += -std::log(std::exp(cos(row(c, i), row(c, j)) / t) / denom);
    }
  }
  for (std::size_t i = 0; i < l.rows; ++i) {
    for (std::size_t j = 0; j < l.rows; ++j) {
      if (i == j) continue;
      double denom = 0.0;
      for (std::size_t k = 0; k < s.rows; ++k) denom += std::exp(cos(row(l, i), row(s, k)) / t);
      total += -std::log(std::exp(cos(row(l, i), row(l, j)) / t) / denom);
    }
  }
  return total;
}

inline double alignment(const Matrix& l, const Matrix& z, const Matrix& s, double t = 1.0) {
  double total = 0.0;
  for (std::size_t i = 0; i < l.rows; ++i) {
    double denom = 0.0;
    for (std::size_t k = 0; k < s.rows; ++k) denom += std::exp(cos(row(l, i), row(s, k)) / t);
    for (std::size_t j = 0; j < z.rows; ++j) {
      total += -std::log(std::exp(cos(row(l, i), row(z, j)) / t) / denom);
    }
  }
  return total;
}

/// y = W x + b with W stored [out, in, ...].
inline Vec affine(const slip::Tensor& w, const slip::Tensor& b, const Vec& x) {
  const std::size_t out = w.shape[0];
  const std::size_t in = w.shape[1];
  Vec y(out);
  for (std::size_t o = 0; o < out; ++o) {
    double acc = b.data[o];
    for (std::size_t i = 0; i < in; ++i) acc += w.data[o * in + i] * x[i];
    y[o] = acc;
  }
  return y;
}

inline Vec gelu(Vec v) {
  for (double& x : v) x = gelu(x);
  return v;
}

inline Vec fuse(const slip::ModelState& st, const Vec& a, const Vec& b) {
  const auto& g = st.params[slip::Component::fusion];
  Vec x = a;
  x.insert(x.end(), b.begin(), b.end());
  x = gelu(affine(g.at("conv1.weight"), g.at("conv1.bias"), x));
  x = gelu(affine(g.at("conv2.weight"), g.at("conv2.bias"), x));
  return affine(g.at("conv3.weight"), g.at("conv3.bias"), x);
}

/// fc + GELU, then a 2x2 stride-2 transposed convolution (weights [ci, co, a, b]).
inline Vec decode(const slip::ModelState& st, const Vec& e) {
  const auto& g = st.params[slip::Component::decoder];
  const Vec hidden = gelu(affine(g.at("fc.weight"), g.at("fc.bias"), e));
  const auto shape = st.config.scm_shape;
  const std::size_t C = shape.channels, H = shape.height, W = shape.width;
  const std::size_t h2 = H / 2, w2 = W / 2;
  const auto& wt = g.at("upconv.weight").data;
  const auto& bias = g.at("upconv.bias").data;
  Vec out(C * H * W);
  for (std::size_t co = 0; co < C; ++co) {
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double acc = bias[co];
        for (std::size_t ci = 0; ci < C; ++ci) {
          acc += hidden[(ci * h2 + y / 2) * w2 + x / 2] * wt[((ci * C + co) * 2 + y % 2) * 2 + x % 2];
        }
        out[(co * H + y) * W + x] = acc;
      }
    }
  }
  return out;
}

inline double reconstruction(const slip::ModelState& st, const Matrix& l, const Matrix& s,
                             const Matrix& h) {
  double total = 0.0;
  for (std::size_t k = 0; k < h.rows; ++k) total += sum_sq_diff(oracle::fuse(st, row(l, k), row(s, k)), row(h, k));
  return total;
}

inline double augmented(const slip::ModelState& st, const Matrix& z, const Matrix& s,
                        const Matrix& targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows; ++i) {
    for (std::size_t k = 0; k < s.rows; ++k) {
      total += sum_sq_diff(oracle::decode(st, oracle::fuse(st, row(z, i), row(s, k))), row(targets, k));
    }
  }
  return total;
}

/// O(n^2) pair counting, ties one half.
inline double auc(const std::vector<slip::ScoredSample>& samples) {
  double wins = 0.0;
  double pairs = 0.0;
  for (const auto& a : samples) {
    if (*a.label != slip::SampleLabel::spoof) continue;
    for (const auto& b : samples) {
      if (*b.label != slip::SampleLabel::live) continue;
      pairs += 1.0;
      if (a.score > b.score) wins += 1.0;
      if (a.score == b.score) wins += 0.5;
    }
  }
  return wins / pairs;
}

struct Sweep {
  double threshold;
  double j;
};

/// Exhaustive Youden sweep: every midpoint of consecutive distinct scores
/// plus both infinities, each evaluated by a full recount.
inline Sweep youden(const std::vector<slip::ScoredSample>& samples) {
  std::vector<double> distinct;
  for (const auto& s : samples) distinct.push_back(s.score);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<double> candidates{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    candidates.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
  }
  candidates.push_back(std::numeric_limits<double>::infinity());
  Sweep best{0.0, -2.0};
  for (double t : candidates) {
    double tp = 0, fp = 0, ns = 0, nl = 0;
    for (const auto& s : samples) {
      const bool spoof = *s.label == slip::SampleLabel::spoof;
      (spoof ? ns : nl) += 1;
      if (s.score >= t) (spoof ? tp : fp) += 1;
    }
    const double j = tp / ns - fp / nl;
    if (j > best.j) best = {t, j};
  }
  return best;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, slip::Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = scale * rng.normal();
  return m;
}

/// Small model used by gradient and oracle tests: d_emb 8, 1x4x4 maps, 8x8 images.
inline slip::ModelConfig tiny_config(std::uint64_t seed = 0) {
  slip::ModelConfig c;
  c.image_size = 8;
  c.patch_size = 4;
  c.image_hidden = 6;
  c.token_dim = 5;
  c.text_hidden = 6;
  c.fusion_hidden = 7;
  c.d_emb = 8;
  c.scm_shape = {1, 4, 4};
  c.init_seed = seed;
  return c;
}

inline slip::ImageBatch random_images(std::size_t count, std::size_t size, slip::Rng& rng) {
  slip::ImageBatch b;
  b.height = b.width = size;
  for (std::size_t n = 0; n < count; ++n) {
    std::vector<double> img(size * size * 3);
    for (double& v : img) v = rng.uniform();
    b.append(img);
  }
  return b;
}

/// Norm-wise relative error between an analytic gradient and central finite
/// differences of `f` over (a sample of) the entries of `group`.
inline double gradient_error(slip::ParamGroup& group, const slip::ParamGroup& analytic,
                             const std::function<double()>& f, std::size_t max_entries = 60,
                             double h = 1e-5) {
  double diff = 0.0;
  double norm_a = 0.0;
  double norm_n = 0.0;
  std::size_t total = 0;
  for (const auto& t : group.tensors) total += t.data.size();
  const std::size_t stride = std::max<std::size_t>(1, total / max_entries);
  std::size_t flat = 0;
  for (std::size_t ti = 0; ti < group.tensors.size(); ++ti) {
    auto& data = group.tensors[ti].data;
    for (std::size_t k = 0; k < data.size(); ++k, ++flat) {
      if (flat % stride != 0) continue;
      const double saved = data[k];
      data[k] = saved + h;
      const double up = f();
      data[k] = saved - h;
      const double down = f();
      data[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.tensors[ti].data[k];
      diff += (a - numeric) * (a - numeric);
      norm_a += a * a;
      norm_n += numeric * numeric;
    }
  }
  const double scale = std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12});
  return std::sqrt(diff) / scale;
}

/// Three 8x8 live images with 2 live, 3 spoof and 2 content prompts.
inline slip::TrainBatch tiny_batch(std::uint64_t seed) {
  slip::Rng rng = slip::Rng::derive(seed, {99});
  slip::TrainConfig cfg;
  cfg.prompt_counts = {2, 3, 2};
  return slip::make_batch(random_images(3, 8, rng), cfg, slip::VocabConfig{}, {1, 4, 4}, seed, {0});
}

enum class Term { l_i, l_t, l_s, l_fd, l_fa, l_r, l_a };

inline slip::LossToggles only(Term t) {
  slip::LossToggles g{false, false, false, false, false, false, false};
  switch (t) {
    case Term::l_i: g.image_liveness = true; break;
    case Term::l_t: g.text_liveness = true; break;
    case Term::l_s: g.spoof = true; break;
    case Term::l_fd: g.disentanglement = true; break;
    case Term::l_fa: g.alignment = true; break;
    case Term::l_r: g.reconstruction = true; break;
    case Term::l_a: g.augmented = true; break;
  }
  return g;
}

inline slip::TermWeights unit_weight(Term t) {
  slip::TermWeights w;
  switch (t) {
    case Term::l_i: w.l_i = 1.0; break;
    case Term::l_t: w.l_t = 1.0; break;
    case Term::l_s: w.l_s = 1.0; break;
    case Term::l_fd: w.l_fd = 1.0; break;
    case Term::l_fa: w.l_fa = 1.0; break;
    case Term::l_r: w.l_r = 1.0; break;
    case Term::l_a: w.l_a = 1.0; break;
  }
  return w;
}

/// Analytic gradient of one term (full route) and its finite-difference
/// error per component. R is skipped for the augmented term, whose
/// definition holds R fixed; `analytic` returns the raw gradients.
struct TermGradientCheck {
  std::array<double, 4> error{};
  std::array<bool, 4> checked{};
  slip::ModelParams analytic;
};

inline TermGradientCheck check_term_gradient(slip::ModelState& st, const slip::TrainBatch& batch,
                                             Term term, std::size_t max_entries = 60) {
  TermGradientCheck out;
  out.analytic = st.params.zeros_like();
  const auto toggles = only(term);
  const auto w = unit_weight(term);
  slip::weighted_objective(st, batch, w, toggles, 1.0, 0.8, slip::GradientRoute::full,
                           &out.analytic, nullptr);
  auto f = [&] {
    return slip::weighted_objective(st, batch, w, toggles, 1.0, 0.8, slip::GradientRoute::full,
                                    nullptr, nullptr);
  };
  for (slip::Component c : slip::kAllComponents) {
    const auto idx = static_cast<std::size_t>(c);
    if (term == Term::l_a && c == slip::Component::fusion) continue;
    out.checked[idx] = true;
    out.error[idx] = gradient_error(st.params[c], out.analytic[c], f, max_entries);
  }
  return out;
}

}  // namespace oracle
