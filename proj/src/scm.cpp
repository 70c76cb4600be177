#include "slip/scm.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "slip/errors.hpp"

namespace slip {
namespace {

void check_shape(const ScmShape& s) {
  if (s.channels == 0 || s.height == 0 || s.width == 0) {
    throw ArgumentError("spoof cue map dimensions must be positive, got " + to_string(s));
  }
}

// Placement of a segment of length `side` inside [begin, end): uniform anchor
// when it fits, otherwise the whole interval.
std::pair<std::size_t, std::size_t> place(std::size_t begin, std::size_t end,
                                          std::size_t side, Rng& rng) {
  const std::size_t extent = end - begin;
  if (side >= extent) {
    rng.index(1);
    return {begin, end};
  }
  const std::size_t anchor = begin + static_cast<std::size_t>(rng.index(extent - side + 1));
  return {anchor, anchor + side};
}

}  // namespace

std::string to_string(const ScmShape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

bool SpoofCueMap::is_zero() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return v == 0.0; });
}

bool SpoofCueMap::is_binary() const {
  return std::all_of(data.begin(), data.end(),
                     [](double v) { return v == 0.0 || v == 1.0; });
}

Region position_region(Position position, std::size_t height, std::size_t width) {
  const std::size_t h2 = height / 2;
  const std::size_t w2 = width / 2;
  switch (position) {
    case Position::upper: return {0, h2, 0, width};
    case Position::lower: return {h2, height, 0, width};
    case Position::left: return {0, height, 0, w2};
    case Position::right: return {0, height, w2, width};
    case Position::center: return {height / 4, height - height / 4, width / 4, width - width / 4};
    case Position::upper_left: return {0, h2, 0, w2};
    case Position::upper_right: return {0, h2, w2, width};
    case Position::lower_left: return {h2, height, 0, w2};
    case Position::lower_right: return {h2, height, w2, width};
    case Position::whole: return {0, height, 0, width};
  }
  throw ArgumentError("unknown position");
}

void ScmConfig::validate() const {
  if (!(min_fraction > 0.0) || !(max_fraction <= 1.0) || min_fraction > max_fraction) {
    throw ConfigError("scm size fractions must satisfy 0 < min <= max <= 1");
  }
}

SpoofCueMap zero_scm(const ScmShape& shape) {
  check_shape(shape);
  return SpoofCueMap{shape, std::vector<double>(shape.size(), 0.0)};
}

SpoofCueMap pseudo_scm(const MaskSpec& spec, const ScmShape& shape, Rng& rng) {
  check_shape(shape);
  if (!(spec.size_fraction > 0.0) || spec.size_fraction > 1.0) {
    throw ArgumentError("mask size_fraction must lie in (0, 1]");
  }
  SpoofCueMap map = zero_scm(shape);
  if (spec.position == Position::whole) {
    std::fill(map.data.begin(), map.data.end(), 1.0);
    return map;
  }
  Region region = position_region(spec.position, shape.height, shape.width);
  // Degenerate 1-pixel maps leave half-regions empty; fall back to the full map.
  if (region.row_begin >= region.row_end) {
    region.row_begin = 0;
    region.row_end = shape.height;
  }
  if (region.col_begin >= region.col_end) {
    region.col_begin = 0;
    region.col_end = shape.width;
  }
  const double min_side = static_cast<double>(std::min(shape.height, shape.width));
  const auto side = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.size_fraction * min_side)));
  const auto [r0, r1] = place(region.row_begin, region.row_end, side, rng);
  const auto [c0, c1] = place(region.col_begin, region.col_end, side, rng);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t col = c0; col < c1; ++col) {
        map.data[(c * shape.height + r) * shape.width + col] = 1.0;
      }
    }
  }
  return map;
}

SpoofCueMap scm_for_prompt(const Prompt& prompt, const ScmShape& shape, Rng& rng,
                           const ScmConfig& config) {
  switch (prompt.family) {
    case PromptFamily::live:
      return zero_scm(shape);
    case PromptFamily::spoof:
    case PromptFamily::hybrid: {
      if (!prompt.position) throw ArgumentError("spoof prompt without a position");
      config.validate();
      const double fraction = rng.uniform(config.min_fraction, config.max_fraction);
      return pseudo_scm(MaskSpec{*prompt.position, fraction}, shape, rng);
    }
    case PromptFamily::content:
      throw ArgumentError("content prompts carry no spoof cue map");
  }
  throw ArgumentError("unknown prompt family");
}

std::string supervision_record(const Prompt& prompt, const SpoofCueMap& map) {
  std::string mask;
  mask.reserve(map.data.size());
  for (double v : map.data) {
    if (v != 0.0 && v != 1.0) throw ArgumentError("supervision maps must be binary");
    mask.push_back(v == 1.0 ? '1' : '0');
  }
  nlohmann::json j;
  j["prompt_text"] = prompt.text;
  j["shape"] = {map.shape.channels, map.shape.height, map.shape.width};
  j["mask"] = mask;
  return j.dump();
}

}  // namespace slip
