#include "slip/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "slip/errors.hpp"
#include "slip/kernels.hpp"

namespace slip {
namespace {

constexpr const char* kHeader = "sample_id,score,label,attack_type,dataset";

std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char ch : v) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw IoError("unterminated quote on score file line " + std::to_string(line_no));
  return fields;
}

}  // namespace

double detection_score(const SpoofCueMap& map) {
  if (map.data.empty()) throw ArgumentError("detection score of an empty map");
  double sum = 0.0;
  for (double v : map.data) {
    if (!std::isfinite(v)) throw NumericError("non-finite spoof cue map entry");
    sum += std::abs(v);
  }
  return sum / static_cast<double>(map.data.size());
}

std::vector<double> score_images(const ModelState& state, const ImageBatch& images,
                                 std::size_t chunk) {
  std::vector<double> scores;
  scores.reserve(images.count);
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t begin = 0; begin < images.count; begin += chunk) {
    const std::size_t end = std::min(images.count, begin + chunk);
    std::vector<std::size_t> idx(end - begin);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
    const Matrix maps = decode(state, encode_images(state, select_images(images, idx)));
    for (double s : kernels::row_mean_abs(maps)) {
      if (!std::isfinite(s)) throw NumericError("non-finite detection score");
      scores.push_back(s);
    }
  }
  return scores;
}

Threshold youden_threshold(std::span<const ScoredSample> samples) {
  std::vector<std::pair<double, bool>> sorted;  // (score, is_spoof)
  sorted.reserve(samples.size());
  std::size_t n_spoof = 0;
  std::size_t n_live = 0;
  for (const auto& s : samples) {
    if (!s.label) throw ArgumentError("threshold calibration needs labeled samples");
    if (!std::isfinite(s.score)) throw NumericError("non-finite score in calibration set");
    const bool spoof = *s.label == SampleLabel::spoof;
    (spoof ? n_spoof : n_live) += 1;
    sorted.emplace_back(s.score, spoof);
  }
  if (n_spoof == 0 || n_live == 0) {
    throw ArgumentError("threshold calibration needs both live and spoof samples");
  }
  std::sort(sorted.begin(), sorted.end());

  // Sweep ascending candidates. At -inf everything counts as spoof.
  std::size_t tp = n_spoof;
  std::size_t fp = n_live;
  auto j_of = [&](std::size_t tp_, std::size_t fp_) {
    return static_cast<double>(tp_) / static_cast<double>(n_spoof) -
           static_cast<double>(fp_) / static_cast<double>(n_live);
  };
  Threshold best{-std::numeric_limits<double>::infinity(), j_of(tp, fp)};
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double value = sorted[i].first;
    while (i < sorted.size() && sorted[i].first == value) {
      (sorted[i].second ? tp : fp) -= 1;
      ++i;
    }
    const double candidate = i < sorted.size() ? value + (sorted[i].first - value) / 2.0
                                               : std::numeric_limits<double>::infinity();
    const double j = j_of(tp, fp);
    if (j > best.youden_j) best = {candidate, j};
  }
  return best;
}

SampleLabel classify(double score, const Threshold& t) {
  return score >= t.value ? SampleLabel::spoof : SampleLabel::live;
}

void write_scores_csv(const std::filesystem::path& path, std::span<const ScoredSample> samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write score file '" + path.string() + "'");
  out << kHeader << '\n';
  char buf[64];
  for (const auto& s : samples) {
    std::snprintf(buf, sizeof(buf), "%.17g", s.score);
    out << csv_field(s.sample_id) << ',' << buf << ','
        << (s.label ? to_string(*s.label) : std::string_view{}) << ','
        << csv_field(s.attack_type.value_or("")) << ',' << csv_field(s.dataset) << '\n';
  }
  if (!out) throw IoError("failed writing score file '" + path.string() + "'");
}

std::vector<ScoredSample> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read score file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw IoError("score file '" + path.string() + "' lacks the header '" + kHeader + "'");
  }
  std::vector<ScoredSample> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line, line_no);
    if (f.size() != 5) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    }
    ScoredSample s;
    s.sample_id = f[0];
    try {
      std::size_t used = 0;
      s.score = std::stod(f[1], &used);
      if (used != f[1].size()) throw std::invalid_argument(f[1]);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad score '" + f[1] + "'");
    }
    if (!f[2].empty()) s.label = parse_label(f[2]);
    if (!f[3].empty()) s.attack_type = f[3];
    s.dataset = f[4];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace slip
