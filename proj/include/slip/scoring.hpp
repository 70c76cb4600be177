#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slip/labels.hpp"
#include "slip/model.hpp"
#include "slip/scm.hpp"

namespace slip {

struct ScoredSample {
  std::string sample_id;
  double score = 0.0;
  std::optional<SampleLabel> label;
  std::optional<std::string> attack_type;
  std::string dataset;
};

struct Threshold {
  double value = 0.0;
  double youden_j = 0.0;
};

/// Mean absolute value over every entry of the map.
double detection_score(const SpoofCueMap& map);

/// Scores images in chunks: detection_score(D(E_I(x))) for each image.
std::vector<double> score_images(const ModelState& state, const ImageBatch& images,
                                 std::size_t chunk = 64);

/// Spoof is the positive class. Candidates are the midpoints between
/// consecutive distinct scores plus -inf and +inf; the maximizer of
/// TPR - FPR wins, ties going to the smallest candidate.
Threshold youden_threshold(std::span<const ScoredSample> samples);

/// Spoof iff score >= t.value.
SampleLabel classify(double score, const Threshold& t);

void write_scores_csv(const std::filesystem::path& path, std::span<const ScoredSample> samples);
std::vector<ScoredSample> read_scores_csv(const std::filesystem::path& path);

}  // namespace slip
