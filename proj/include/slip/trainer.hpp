#pragma once

// Warm-up and two-stage alternating optimization.
//
// Stage 1 updates E_T from L_FD, E_I from L_FA and R from L_R; D is untouched.
// Stage 2 freezes R and updates E_T, E_I and D from L_L + L_S + L_A. The
// lambda-weighted contrastive terms act in stage 1; the full weighted sum is
// still what every log row reports as `total`.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slip/errors.hpp"
#include "slip/labels.hpp"
#include "slip/model.hpp"
#include "slip/objectives.hpp"
#include "slip/prompt_grammar.hpp"
#include "slip/scm.hpp"

namespace slip {

enum class Alternation { per_step, per_epoch };

/// Which loss terms take part in training. Disabled terms are neither
/// optimized nor reported (they log as 0).
struct LossToggles {
  bool image_liveness = true;
  bool text_liveness = true;
  bool spoof = true;
  bool disentanglement = true;
  bool alignment = true;
  bool reconstruction = true;
  bool augmented = true;

  bool operator==(const LossToggles&) const = default;
};

struct TrainConfig {
  double learning_rate = 1e-5;
  std::size_t epochs = 50;
  std::string optimizer = "adam";
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda = 0.8;
  std::size_t batch_images = 16;
  PromptCounts prompt_counts{4, 16, 3};
  std::size_t warmup_steps = 200;
  std::uint64_t seed = 0;
  /// Contrastive temperature; 1.0 reproduces the bare exp(cos) form.
  double temperature = 1.0;
  Alternation alternation = Alternation::per_step;
  /// Global gradient-norm clip per update; 0 disables.
  double grad_clip = 0.0;
  /// Divide each term by its number of summands before differentiating.
  bool average_terms = true;
  LossToggles losses;
  ScmConfig scm;

  void validate() const;
};

/// One optimization batch: live images plus prompts and their pseudo maps.
struct TrainBatch {
  ImageBatch images;
  PromptBatch prompts;
  /// Aligned with prompts.spoof.
  std::vector<SpoofCueMap> spoof_targets;
};

/// Builds the batch for the given images with prompts and pseudo maps drawn
/// from a stream derived from `seed` and `stream`.
TrainBatch make_batch(const ImageBatch& images, const TrainConfig& cfg, const VocabConfig& vocab,
                      const ScmShape& shape, std::uint64_t seed,
                      std::initializer_list<std::uint64_t> stream);

/// Per-term coefficients of a weighted objective.
struct TermWeights {
  double l_i = 0.0;
  double l_t = 0.0;
  double l_s = 0.0;
  double l_fd = 0.0;
  double l_fa = 0.0;
  double l_r = 0.0;
  double l_a = 0.0;
};

enum class GradientRoute {
  /// Each term differentiates w.r.t. every component it touches (R excluded
  /// for L_A, which is defined with R frozen).
  full,
  /// Stage-1 scoping: L_FA reaches only E_I and L_R reaches only R.
  staged,
};

/// Number of summands in each term for the batch (the averaging divisors).
LossReport term_counts(const TrainBatch& batch);

/// Evaluates sum_t w_t L_t. Fills `report` with the raw value of every term
/// enabled in `toggles` and accumulates gradients into `grads` when given.
double weighted_objective(const ModelState& state, const TrainBatch& batch,
                          const TermWeights& weights, const LossToggles& toggles,
                          double temperature, double lambda, GradientRoute route,
                          ModelParams* grads, LossReport* report);

/// Adam with one moment/step slot per component; a frozen component's slot
/// does not advance.
class AdamOptimizer {
 public:
  AdamOptimizer() = default;
  explicit AdamOptimizer(const ModelParams& shape_like);

  void step(Component component, ParamGroup& params, const ParamGroup& grads,
            const TrainConfig& cfg);

  struct Slot {
    ParamGroup m;
    ParamGroup v;
    std::uint64_t t = 0;
  };
  const Slot& slot(Component c) const { return slots_[static_cast<std::size_t>(c)]; }
  Slot& slot(Component c) { return slots_[static_cast<std::size_t>(c)]; }

 private:
  std::array<Slot, 4> slots_;
};

/// Thrown when a loss or gradient goes non-finite; carries the snapshot path
/// (empty when no output directory was configured).
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, std::filesystem::path snapshot)
      : NumericError(what), snapshot_(std::move(snapshot)) {}
  const std::filesystem::path& snapshot() const { return snapshot_; }

 private:
  std::filesystem::path snapshot_;
};

LossReport stage1_step(ModelState& state, AdamOptimizer& adam, const TrainConfig& cfg,
                       const TrainBatch& batch);
LossReport stage2_step(ModelState& state, AdamOptimizer& adam, const TrainConfig& cfg,
                       const TrainBatch& batch);

/// warmup_steps updates of E_T (L_FD) and E_I (L_FA), then warmup_steps
/// updates of R (L_R) with E_T frozen.
void warmup(ModelState& state, AdamOptimizer& adam, const TrainConfig& cfg,
            const VocabConfig& vocab, const ImageBatch& live_images);

/// Training images with labels; training rejects any spoof label.
struct TrainingSet {
  ImageBatch images;
  std::vector<SampleLabel> labels;
  std::vector<std::string> sample_ids;
};

struct TrainLogRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  int stage = 1;
  LossReport raw;
  /// Each term divided by its number of summands.
  LossReport mean;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::vector<std::filesystem::path> checkpoints;
  std::uint64_t seed = 0;
};

struct TrainSession {
  /// Where loss CSVs and per-epoch checkpoints go; empty keeps everything in memory.
  std::filesystem::path output_dir;
  /// Resume archive written by an earlier run (epoch_NNN.resume).
  std::optional<std::filesystem::path> resume_from;
  /// Called after every logged row.
  std::function<void(const TrainLogRow&)> on_row;
};

/// Warm-up (skipped when resuming), then cfg.epochs epochs of alternating
/// stage-1/stage-2 updates with a checkpoint after every epoch.
TrainLog train(ModelState& state, const TrainConfig& cfg, const VocabConfig& vocab,
               const TrainingSet& data, const TrainSession& session = {});

/// Full-precision training state (parameters, Adam moments, progress).
void save_resume_state(const std::filesystem::path& path, const ModelState& state,
                       const AdamOptimizer& adam, std::size_t epochs_done, std::size_t next_step);
struct ResumePoint {
  std::size_t epochs_done = 0;
  std::size_t next_step = 0;
};
ResumePoint load_resume_state(const std::filesystem::path& path, ModelState& state,
                              AdamOptimizer& adam);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch);
std::filesystem::path resume_path(const std::filesystem::path& dir, std::size_t epoch);

}  // namespace slip
