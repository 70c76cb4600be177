#pragma once

#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "slip/scoring.hpp"

namespace slip {

struct MetricBundle {
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double hter = 0.0;
  double auc = 0.0;
  Threshold threshold;
  std::size_t n_live = 0;
  std::size_t n_spoof = 0;
};

/// Rank-statistic AUC (spoof positive), ties counted one half.
double auc(std::span<const ScoredSample> samples);

MetricBundle compute_metrics(std::span<const ScoredSample> samples, const Threshold& t);

struct ProtocolSpec {
  std::string name;
  std::vector<std::string> train_sources;
  std::vector<std::string> test_sources;
  std::optional<std::string> unseen_attack;
  std::size_t repetitions = 1;

  void validate() const;
};

/// Everything one repetition of a protocol needs, already scored.
struct RepetitionScores {
  std::vector<ScoredSample> test;
  /// Development split; empty means the threshold is calibrated on test.
  std::vector<ScoredSample> calibration;
  /// Sample ids the scorer was trained on (leakage check).
  std::set<std::string> train_ids;
};

struct MetricSpread {
  MetricBundle mean;
  MetricBundle std;  // sample standard deviation, zero for one repetition
};

struct ProtocolResult {
  ProtocolSpec spec;
  std::vector<MetricBundle> repetitions;
  MetricSpread aggregate;
  bool calibrated_on_test = false;
};

/// Restricts test and calibration to the spec's test sources, applies the
/// unseen-attack filter, checks for leakage, calibrates a Youden threshold
/// and computes metrics for every repetition.
ProtocolResult run_protocol(const ProtocolSpec& spec,
                            const std::function<RepetitionScores(std::size_t)>& repetition);

nlohmann::json to_json(const ProtocolSpec& spec);
nlohmann::json to_json(const MetricBundle& bundle);
nlohmann::json to_json(const ProtocolResult& result);

std::string protocol_csv_header();
/// One row per repetition, then "mean" and "std" rows when repetitions > 1.
std::vector<std::string> protocol_csv_rows(const ProtocolResult& result);

}  // namespace slip
