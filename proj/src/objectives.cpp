#include "slip/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "slip/errors.hpp"
#include "slip/log.hpp"

namespace slip {
namespace {

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

void warn_degenerate() {
  log_warning_once("degenerate-cosine",
                   "cosine of a zero-norm embedding treated as 0 (logged once)");
}

// Adds weight * d cos(a, b) / d{a, b} into ga and gb.
void accumulate_cosine_grad(std::span<const double> a, std::span<const double> b, double weight,
                            std::span<double> ga, std::span<double> gb) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return;
  double dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  const double inv = 1.0 / (na * nb);
  const double cos = dot * inv;
  const double ca = cos / (na * na);
  const double cb = cos / (nb * nb);
  for (std::size_t k = 0; k < a.size(); ++k) {
    ga[k] += weight * (b[k] * inv - ca * a[k]);
    gb[k] += weight * (a[k] * inv - cb * b[k]);
  }
}

void require_dims(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols != b.cols) {
    throw ArgumentError(std::string(what) + ": embedding dimensions differ");
  }
}

// log(sum_k exp(x_k)) with max subtraction; also fills the softmax weights.
double log_sum_exp(std::span<const double> x, std::vector<double>* softmax) {
  const double m = *std::max_element(x.begin(), x.end());
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  if (softmax) {
    softmax->resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) (*softmax)[k] = std::exp(x[k] - m) / s;
  }
  return m + std::log(s);
}

void check_maps(std::span<const SpoofCueMap> maps, const ScmShape& shape, const char* what) {
  for (const auto& m : maps) {
    if (!(m.shape == shape) || m.data.size() != shape.size()) {
      throw ArgumentError(std::string(what) + ": spoof cue map shapes differ");
    }
  }
}

}  // namespace

double squared_error(const Matrix& pred, const Matrix* target, Matrix* grad_pred) {
  if (target && (target->rows != pred.rows || target->cols != pred.cols)) {
    throw ArgumentError("squared_error: prediction and target shapes differ");
  }
  if (grad_pred) *grad_pred = Matrix(pred.rows, pred.cols);
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.data.size(); ++k) {
    const double diff = pred.data[k] - (target ? target->data[k] : 0.0);
    sum += diff * diff;
    if (grad_pred) grad_pred->data[k] = 2.0 * diff;
  }
  return sum;
}

LivenessLoss liveness_loss(std::span<const SpoofCueMap> maps_from_images,
                           std::span<const SpoofCueMap> maps_from_live_prompts) {
  if (maps_from_images.empty() || maps_from_live_prompts.empty()) {
    throw ArgumentError("liveness_loss: both map lists must be nonempty");
  }
  const ScmShape shape = maps_from_images.front().shape;
  check_maps(maps_from_images, shape, "liveness_loss");
  check_maps(maps_from_live_prompts, shape, "liveness_loss");
  LivenessLoss out;
  out.image = squared_error(maps_to_matrix(maps_from_images), nullptr);
  out.text = squared_error(maps_to_matrix(maps_from_live_prompts), nullptr);
  out.total = out.image + out.text;
  return out;
}

double spoof_loss(std::span<const SpoofCueMap> predicted, std::span<const SpoofCueMap> targets) {
  if (predicted.size() != targets.size()) {
    throw ArgumentError("spoof_loss: predicted and target lists differ in length");
  }
  if (predicted.empty()) return 0.0;
  const ScmShape shape = predicted.front().shape;
  check_maps(predicted, shape, "spoof_loss");
  check_maps(targets, shape, "spoof_loss");
  const Matrix t = maps_to_matrix(targets);
  return squared_error(maps_to_matrix(predicted), &t);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("cosine: dimension mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    warn_degenerate();
    return 0.0;
  }
  double dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  return dot / (na * nb);
}

double disentanglement_loss(const Matrix& content, const Matrix& live, const Matrix& spoof,
                            double temperature, DisentanglementGrad* grad) {
  const std::size_t nc = content.rows;
  const std::size_t nl = live.rows;
  const std::size_t ns = spoof.rows;
  if (nc < 2 || nl < 2 || ns < 1) {
    throw ArgumentError("disentanglement_loss needs at least 2 content, 2 live and 1 spoof embeddings");
  }
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  require_dims(content, live, "disentanglement_loss");
  require_dims(content, spoof, "disentanglement_loss");
  const double inv_t = 1.0 / temperature;
  if (grad) {
    grad->content = Matrix(nc, content.cols);
    grad->live = Matrix(nl, live.cols);
    grad->spoof = Matrix(ns, spoof.cols);
  }

  double loss = 0.0;
  std::vector<double> logits;
  std::vector<double> weights;

  // Content anchors: positives are other content rows, negatives are live and spoof rows.
  for (std::size_t i = 0; i < nc; ++i) {
    logits.clear();
    for (std::size_t p = 0; p < nl; ++p) logits.push_back(cosine(content.row(i), live.row(p)) * inv_t);
    for (std::size_t q = 0; q < ns; ++q) logits.push_back(cosine(content.row(i), spoof.row(q)) * inv_t);
    const double lse = log_sum_exp(logits, grad ? &weights : nullptr);
    const double pairs = static_cast<double>(nc - 1);
    loss += pairs * lse;
    for (std::size_t j = 0; j < nc; ++j) {
      if (j == i) continue;
      loss -= cosine(content.row(i), content.row(j)) * inv_t;
      if (grad) {
        accumulate_cosine_grad(content.row(i), content.row(j), -inv_t, grad->content.row(i),
                               grad->content.row(j));
      }
    }
    if (grad) {
      for (std::size_t p = 0; p < nl; ++p) {
        accumulate_cosine_grad(content.row(i), live.row(p), pairs * weights[p] * inv_t,
                               grad->content.row(i), grad->live.row(p));
      }
      for (std::size_t q = 0; q < ns; ++q) {
        accumulate_cosine_grad(content.row(i), spoof.row(q), pairs * weights[nl + q] * inv_t,
                               grad->content.row(i), grad->spoof.row(q));
      }
    }
  }

  // Live anchors: positives are other live rows, negatives are spoof rows only.
  for (std::size_t i = 0; i < nl; ++i) {
    logits.clear();
    for (std::size_t k = 0; k < ns; ++k) logits.push_back(cosine(live.row(i), spoof.row(k)) * inv_t);
    const double lse = log_sum_exp(logits, grad ? &weights : nullptr);
    const double pairs = static_cast<double>(nl - 1);
    loss += pairs * lse;
    for (std::size_t j = 0; j < nl; ++j) {
      if (j == i) continue;
      loss -= cosine(live.row(i), live.row(j)) * inv_t;
      if (grad) {
        accumulate_cosine_grad(live.row(i), live.row(j), -inv_t, grad->live.row(i),
                               grad->live.row(j));
      }
    }
    if (grad) {
      for (std::size_t k = 0; k < ns; ++k) {
        accumulate_cosine_grad(live.row(i), spoof.row(k), pairs * weights[k] * inv_t,
                               grad->live.row(i), grad->spoof.row(k));
      }
    }
  }
  return loss;
}

double alignment_loss(const Matrix& live, const Matrix& images, const Matrix& spoof,
                      double temperature, AlignmentGrad* grad) {
  const std::size_t nl = live.rows;
  const std::size_t nz = images.rows;
  const std::size_t ns = spoof.rows;
  if (nl == 0 || nz == 0 || ns == 0) {
    throw ArgumentError("alignment_loss: live, image and spoof lists must be nonempty");
  }
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be positive");
  require_dims(live, images, "alignment_loss");
  require_dims(live, spoof, "alignment_loss");
  const double inv_t = 1.0 / temperature;
  if (grad) {
    grad->live = Matrix(nl, live.cols);
    grad->image = Matrix(nz, images.cols);
    grad->spoof = Matrix(ns, spoof.cols);
  }
  double loss = 0.0;
  std::vector<double> logits;
  std::vector<double> weights;
  for (std::size_t i = 0; i < nl; ++i) {
    logits.clear();
    for (std::size_t k = 0; k < ns; ++k) logits.push_back(cosine(live.row(i), spoof.row(k)) * inv_t);
    const double lse = log_sum_exp(logits, grad ? &weights : nullptr);
    const double pairs = static_cast<double>(nz);
    loss += pairs * lse;
    for (std::size_t j = 0; j < nz; ++j) {
      loss -= cosine(live.row(i), images.row(j)) * inv_t;
      if (grad) {
        accumulate_cosine_grad(live.row(i), images.row(j), -inv_t, grad->live.row(i),
                               grad->image.row(j));
      }
    }
    if (grad) {
      for (std::size_t k = 0; k < ns; ++k) {
        accumulate_cosine_grad(live.row(i), spoof.row(k), pairs * weights[k] * inv_t,
                               grad->live.row(i), grad->spoof.row(k));
      }
    }
  }
  return loss;
}

double reconstruction_loss(const ModelState& state, const Matrix& live, const Matrix& spoof,
                           const Matrix& hybrid, ReconstructionGrad* grad) {
  if (live.rows != spoof.rows || live.rows != hybrid.rows) {
    throw ArgumentError("reconstruction_loss: live, spoof and hybrid lists are not aligned");
  }
  if (live.rows == 0) throw ArgumentError("reconstruction_loss: empty pairing");
  FusionCache cache;
  const Matrix fused = fuse(state, live, spoof, grad ? &cache : nullptr);
  require_dims(fused, hybrid, "reconstruction_loss");
  Matrix grad_fused;
  const double loss = squared_error(fused, &hybrid, grad ? &grad_fused : nullptr);
  if (grad) {
    backward_fusion(state, cache, grad_fused, grad->fusion, &grad->live, &grad->spoof);
    grad->hybrid = grad_fused;
    for (double& v : grad->hybrid.data) v = -v;
  }
  return loss;
}

double augmented_spoof_loss(const ModelState& state, const Matrix& images, const Matrix& spoof,
                            const Matrix& targets, AugmentedGrad* grad) {
  if (images.rows == 0) throw ArgumentError("augmented_spoof_loss: no image embeddings");
  if (spoof.rows != targets.rows) {
    throw ArgumentError("augmented_spoof_loss: spoof embeddings and target maps are not aligned");
  }
  require_dims(images, spoof, "augmented_spoof_loss");
  if (targets.cols != state.config.scm_shape.size()) {
    throw ArgumentError("augmented_spoof_loss: target maps do not match the model scm shape");
  }
  const std::size_t nz = images.rows;
  const std::size_t ns = spoof.rows;
  const std::size_t d = images.cols;
  if (ns == 0) {
    if (grad) {
      grad->image = Matrix(nz, d);
      grad->spoof = Matrix(0, d);
    }
    return 0.0;
  }
  // Row (i * ns + k) pairs image i with spoof prompt k.
  Matrix z_rep(nz * ns, d);
  Matrix s_rep(nz * ns, d);
  Matrix t_rep(nz * ns, targets.cols);
  for (std::size_t i = 0; i < nz; ++i) {
    for (std::size_t k = 0; k < ns; ++k) {
      const std::size_t r = i * ns + k;
      std::copy(images.row(i).begin(), images.row(i).end(), z_rep.row(r).begin());
      std::copy(spoof.row(k).begin(), spoof.row(k).end(), s_rep.row(r).begin());
      std::copy(targets.row(k).begin(), targets.row(k).end(), t_rep.row(r).begin());
    }
  }
  FusionCache fcache;
  DecoderCache dcache;
  const Matrix fused = fuse(state, z_rep, s_rep, grad ? &fcache : nullptr);
  const Matrix maps = decode(state, fused, grad ? &dcache : nullptr);
  Matrix grad_maps;
  const double loss = squared_error(maps, &t_rep, grad ? &grad_maps : nullptr);
  if (grad) {
    Matrix grad_fused;
    backward_decoder(state, dcache, grad_maps, grad->decoder, &grad_fused);
    Matrix gz_rep;
    Matrix gs_rep;
    backward_fusion(state, fcache, grad_fused, nullptr, &gz_rep, &gs_rep);
    grad->image = Matrix(nz, d);
    grad->spoof = Matrix(ns, d);
    for (std::size_t i = 0; i < nz; ++i) {
      for (std::size_t k = 0; k < ns; ++k) {
        const std::size_t r = i * ns + k;
        for (std::size_t c = 0; c < d; ++c) {
          grad->image(i, c) += gz_rep(r, c);
          grad->spoof(k, c) += gs_rep(r, c);
        }
      }
    }
  }
  return loss;
}

double augmented_spoof_loss(const ModelState& state, const Matrix& images, const Matrix& spoof,
                            std::span<const SpoofCueMap> targets) {
  if (targets.size() != spoof.rows) {
    throw ArgumentError("augmented_spoof_loss: spoof embeddings and target maps are not aligned");
  }
  if (targets.empty()) return 0.0;
  check_maps(targets, state.config.scm_shape, "augmented_spoof_loss");
  return augmented_spoof_loss(state, images, spoof, maps_to_matrix(targets));
}

double total_objective(const LossReport& r, double lambda) {
  if (!(lambda >= 0.0)) throw ArgumentError("lambda must be non-negative");
  const double terms[] = {r.l_l, r.l_s, r.l_fd, r.l_fa, r.l_a};
  for (double t : terms) {
    if (!std::isfinite(t)) throw NumericError("non-finite loss term in total objective");
  }
  return r.l_l + r.l_s + lambda * r.l_fd + lambda * r.l_fa + r.l_a;
}

std::string loss_csv_header() { return "step,stage,L_I,L_T,L_S,L_FD,L_FA,L_R,L_A,total"; }

std::string loss_csv_row(std::size_t step, int stage, const LossReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", step,
                stage, r.l_i, r.l_t, r.l_s, r.l_fd, r.l_fa, r.l_r, r.l_a, r.total);
  return buf;
}

}  // namespace slip
