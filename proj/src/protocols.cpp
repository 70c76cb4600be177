#include "slip/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "slip/errors.hpp"

namespace slip {
namespace {

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double json_number(double v) {
  // JSON has no infinities; sentinel thresholds are written as +-DBL_MAX.
  if (std::isinf(v)) return v > 0 ? std::numeric_limits<double>::max() : -std::numeric_limits<double>::max();
  return v;
}

// Fields averaged across repetitions.
constexpr double MetricBundle::*kFields[] = {&MetricBundle::apcer, &MetricBundle::bpcer,
                                             &MetricBundle::acer,  &MetricBundle::far,
                                             &MetricBundle::frr,   &MetricBundle::hter,
                                             &MetricBundle::auc};

}  // namespace

double auc(std::span<const ScoredSample> samples) {
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(samples.size());
  std::size_t n_spoof = 0;
  for (const auto& s : samples) {
    if (!s.label) throw ArgumentError("AUC needs labeled samples");
    const bool spoof = *s.label == SampleLabel::spoof;
    n_spoof += spoof;
    sorted.emplace_back(s.score, spoof);
  }
  const std::size_t n_live = sorted.size() - n_spoof;
  if (n_spoof == 0 || n_live == 0) throw ArgumentError("AUC needs both live and spoof samples");
  std::sort(sorted.begin(), sorted.end());
  // Sum of spoof ranks with tied groups sharing their average rank.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    std::size_t spoof_in_group = 0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) {
      spoof_in_group += sorted[j].second;
      ++j;
    }
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum += avg_rank * static_cast<double>(spoof_in_group);
    i = j;
  }
  const double ns = static_cast<double>(n_spoof);
  return (rank_sum - ns * (ns + 1.0) / 2.0) / (ns * static_cast<double>(n_live));
}

MetricBundle compute_metrics(std::span<const ScoredSample> samples, const Threshold& t) {
  MetricBundle m;
  m.threshold = t;
  std::size_t spoof_as_live = 0;
  std::size_t live_as_spoof = 0;
  for (const auto& s : samples) {
    if (!s.label) throw ArgumentError("metrics need labeled samples");
    const SampleLabel predicted = classify(s.score, t);
    if (*s.label == SampleLabel::spoof) {
      ++m.n_spoof;
      spoof_as_live += predicted == SampleLabel::live;
    } else {
      ++m.n_live;
      live_as_spoof += predicted == SampleLabel::spoof;
    }
  }
  if (m.n_live == 0 || m.n_spoof == 0) throw ArgumentError("metrics need both live and spoof samples");
  m.apcer = static_cast<double>(spoof_as_live) / static_cast<double>(m.n_spoof);
  m.bpcer = static_cast<double>(live_as_spoof) / static_cast<double>(m.n_live);
  m.acer = (m.apcer + m.bpcer) / 2.0;
  m.far = m.apcer;
  m.frr = m.bpcer;
  m.hter = (m.far + m.frr) / 2.0;
  m.auc = auc(samples);
  return m;
}

void ProtocolSpec::validate() const {
  if (name.empty()) throw ConfigError("protocol name must not be empty");
  if (train_sources.empty()) throw ConfigError("protocol '" + name + "' has no train sources");
  if (test_sources.empty()) throw ConfigError("protocol '" + name + "' has no test sources");
  if (repetitions < 1) throw ConfigError("protocol '" + name + "' needs at least one repetition");
}

ProtocolResult run_protocol(const ProtocolSpec& spec,
                            const std::function<RepetitionScores(std::size_t)>& repetition) {
  spec.validate();
  ProtocolResult result;
  result.spec = spec;

  auto keep = [&](const ScoredSample& s, bool calibration) {
    if (!contains(spec.test_sources, s.dataset)) return false;
    if (!spec.unseen_attack || !s.label || *s.label == SampleLabel::live) return true;
    const bool held_out = s.attack_type == spec.unseen_attack;
    // The held-out attack is test-only; calibration must never see it.
    return calibration ? !held_out : held_out;
  };

  for (std::size_t r = 0; r < spec.repetitions; ++r) {
    const RepetitionScores scores = repetition(r);
    std::vector<ScoredSample> test;
    std::vector<ScoredSample> calibration;
    for (const auto& s : scores.test) {
      if (keep(s, false)) test.push_back(s);
    }
    for (const auto& s : scores.calibration) {
      if (keep(s, true)) calibration.push_back(s);
    }
    for (const auto& s : test) {
      if (scores.train_ids.count(s.sample_id)) {
        throw ProtocolError("protocol '" + spec.name + "': test sample '" + s.sample_id +
                            "' also appears in the training set");
      }
    }
    std::sort(test.begin(), test.end(),
              [](const ScoredSample& a, const ScoredSample& b) { return a.sample_id < b.sample_id; });
    if (test.empty()) {
      throw ProtocolError("protocol '" + spec.name + "': no test samples from the test sources");
    }
    const bool on_test = calibration.empty();
    result.calibrated_on_test = result.calibrated_on_test || on_test;
    const Threshold t = youden_threshold(on_test ? test : calibration);
    result.repetitions.push_back(compute_metrics(test, t));
  }

  const double n = static_cast<double>(result.repetitions.size());
  MetricBundle& mean = result.aggregate.mean;
  MetricBundle& sd = result.aggregate.std;
  for (auto field : kFields) {
    double sum = 0.0;
    for (const auto& b : result.repetitions) sum += b.*field;
    mean.*field = sum / n;
    double sq = 0.0;
    for (const auto& b : result.repetitions) sq += (b.*field - mean.*field) * (b.*field - mean.*field);
    sd.*field = result.repetitions.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  }
  // Keep the identities exact on the averaged row as well.
  mean.acer = (mean.apcer + mean.bpcer) / 2.0;
  mean.hter = (mean.far + mean.frr) / 2.0;
  double tsum = 0.0;
  double jsum = 0.0;
  for (const auto& b : result.repetitions) {
    tsum += b.threshold.value;
    jsum += b.threshold.youden_j;
  }
  mean.threshold = {tsum / n, jsum / n};
  mean.n_live = result.repetitions.front().n_live;
  mean.n_spoof = result.repetitions.front().n_spoof;
  return result;
}

nlohmann::json to_json(const ProtocolSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["train_sources"] = spec.train_sources;
  j["test_sources"] = spec.test_sources;
  j["unseen_attack"] = spec.unseen_attack ? nlohmann::json(*spec.unseen_attack) : nlohmann::json();
  j["repetitions"] = spec.repetitions;
  return j;
}

nlohmann::json to_json(const MetricBundle& b) {
  return {{"apcer", b.apcer},
          {"bpcer", b.bpcer},
          {"acer", b.acer},
          {"far", b.far},
          {"frr", b.frr},
          {"hter", b.hter},
          {"auc", b.auc},
          {"threshold", json_number(b.threshold.value)},
          {"youden_j", b.threshold.youden_j},
          {"n_live", b.n_live},
          {"n_spoof", b.n_spoof}};
}

nlohmann::json to_json(const ProtocolResult& r) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& b : r.repetitions) reps.push_back(to_json(b));
  return {{"spec", to_json(r.spec)},
          {"repetitions", reps},
          {"aggregate", {{"mean", to_json(r.aggregate.mean)}, {"std", to_json(r.aggregate.std)}}},
          {"calibrated_on_test", r.calibrated_on_test}};
}

std::string protocol_csv_header() {
  return "protocol,row,apcer,bpcer,acer,hter,auc,threshold,youden_j,n_live,n_spoof";
}

std::vector<std::string> protocol_csv_rows(const ProtocolResult& r) {
  std::vector<std::string> rows;
  auto row = [&](const std::string& tag, const MetricBundle& b) {
    rows.push_back(r.spec.name + "," + tag + "," + fmt(b.apcer) + "," + fmt(b.bpcer) + "," +
                   fmt(b.acer) + "," + fmt(b.hter) + "," + fmt(b.auc) + "," +
                   fmt(b.threshold.value) + "," + fmt(b.threshold.youden_j) + "," +
                   std::to_string(b.n_live) + "," + std::to_string(b.n_spoof));
  };
  for (std::size_t i = 0; i < r.repetitions.size(); ++i) row(std::to_string(i), r.repetitions[i]);
  if (r.repetitions.size() > 1) {
    row("mean", r.aggregate.mean);
    row("std", r.aggregate.std);
  }
  return rows;
}

}  // namespace slip
