#pragma once

// Loss terms of the one-class objective. Every sum is a plain sum over the
// batch, exactly as the objective is written; batch averaging belongs to the
// trainer. Embedding batches are matrices with one embedding per row.

#include <span>
#include <string>

#include "slip/model.hpp"
#include "slip/scm.hpp"
#include "slip/tensor.hpp"

namespace slip {

struct LossReport {
  double l_i = 0.0;   ///< image liveness
  double l_t = 0.0;   ///< text liveness
  double l_l = 0.0;   ///< l_i + l_t
  double l_s = 0.0;   ///< spoof
  double l_fd = 0.0;  ///< feature disentanglement
  double l_fa = 0.0;  ///< feature alignment
  double l_r = 0.0;   ///< fusion reconstruction
  double l_a = 0.0;   ///< augmented spoof
  double total = 0.0;
  double lambda = 0.8;
};

// ------------------------------------------------------ squared-error terms

/// sum((pred - target)^2); target == nullptr means the zero map. When
/// grad_pred is given it receives 2 * (pred - target).
double squared_error(const Matrix& pred, const Matrix* target, Matrix* grad_pred = nullptr);

struct LivenessLoss {
  double image = 0.0;
  double text = 0.0;
  double total = 0.0;
};

/// Squared norms of the maps decoded from live images and from live prompts.
LivenessLoss liveness_loss(std::span<const SpoofCueMap> maps_from_images,
                           std::span<const SpoofCueMap> maps_from_live_prompts);

/// sum ||predicted_k - target_k||^2 over aligned lists.
double spoof_loss(std::span<const SpoofCueMap> predicted, std::span<const SpoofCueMap> targets);

// ----------------------------------------------------- contrastive terms

/// Cosine similarity; a zero vector yields 0 (and a one-time warning).
double cosine(std::span<const double> a, std::span<const double> b);

struct DisentanglementGrad {
  Matrix content;
  Matrix live;
  Matrix spoof;
};

/// Decoupled contrastive disentanglement: content embeddings pull together
/// against live and spoof negatives, live embeddings pull together against
/// spoof negatives. Positives never enter the denominators, so the value can
/// be negative. Needs N_c >= 2, N_l >= 2, N_s >= 1.
double disentanglement_loss(const Matrix& content, const Matrix& live, const Matrix& spoof,
                            double temperature = 1.0, DisentanglementGrad* grad = nullptr);

struct AlignmentGrad {
  Matrix live;
  Matrix image;
  Matrix spoof;
};

/// Aligns every live prompt embedding with every live image embedding; the
/// denominator for live prompt i is the spoof-only sum, shared across images.
double alignment_loss(const Matrix& live, const Matrix& images, const Matrix& spoof,
                      double temperature = 1.0, AlignmentGrad* grad = nullptr);

// -------------------------------------------------- fusion-based terms

struct ReconstructionGrad {
  ParamGroup* fusion = nullptr;  ///< accumulates R gradients when set
  Matrix live;
  Matrix spoof;
  Matrix hybrid;
};

/// sum_k ||R(live_k, spoof_k) - hybrid_k||^2 over rows aligned by hybrid pairing.
double reconstruction_loss(const ModelState& state, const Matrix& live, const Matrix& spoof,
                           const Matrix& hybrid, ReconstructionGrad* grad = nullptr);

struct AugmentedGrad {
  ParamGroup* decoder = nullptr;  ///< accumulates D gradients when set
  Matrix image;
  Matrix spoof;
};

/// sum over every (image i, spoof prompt k) of ||D(R(z_i, s_k)) - target_k||^2.
/// R is frozen: no fusion gradient is produced. Target rows align with spoof rows.
double augmented_spoof_loss(const ModelState& state, const Matrix& images, const Matrix& spoof,
                            const Matrix& targets, AugmentedGrad* grad = nullptr);
double augmented_spoof_loss(const ModelState& state, const Matrix& images, const Matrix& spoof,
                            std::span<const SpoofCueMap> targets);

// ----------------------------------------------------------- combination

/// L_L + L_S + lambda * L_FD + lambda * L_FA + L_A. Throws NumericError on a
/// non-finite term and ArgumentError on a negative lambda.
double total_objective(const LossReport& report, double lambda);

std::string loss_csv_header();
std::string loss_csv_row(std::size_t step, int stage, const LossReport& report);

}  // namespace slip
