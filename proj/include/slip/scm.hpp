#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "slip/prompt_grammar.hpp"
#include "slip/rng.hpp"

namespace slip {

struct ScmShape {
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 16;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const ScmShape&) const = default;
};

std::string to_string(const ScmShape& shape);

/// C x H x W spoof cue map, stored channel-major then row-major.
struct SpoofCueMap {
  ScmShape shape;
  std::vector<double> data;

  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data[(c * shape.height + h) * shape.width + w];
  }
  bool is_zero() const;
  bool is_binary() const;
};

/// Half-open pixel rectangle [row_begin, row_end) x [col_begin, col_end).
struct Region {
  std::size_t row_begin = 0;
  std::size_t row_end = 0;
  std::size_t col_begin = 0;
  std::size_t col_end = 0;

  bool contains(std::size_t r, std::size_t c) const {
    return r >= row_begin && r < row_end && c >= col_begin && c < col_end;
  }
};

/// Pixel region assigned to a position on an H x W grid. upper/lower/left/
/// right are halves, the corner positions are quadrants, center is the
/// middle [1/4, 3/4) square and whole is the full map.
Region position_region(Position position, std::size_t height, std::size_t width);

struct MaskSpec {
  Position position = Position::whole;
  /// Square side as a fraction of min(H, W); must lie in (0, 1].
  double size_fraction = 0.5;
};

struct ScmConfig {
  double min_fraction = 0.25;
  double max_fraction = 0.75;

  void validate() const;
};

SpoofCueMap zero_scm(const ScmShape& shape);

/// Binary square mask anchored uniformly inside the position's region and
/// clipped to it; identical across channels.
SpoofCueMap pseudo_scm(const MaskSpec& spec, const ScmShape& shape, Rng& rng);

/// Zero map for live prompts; a pseudo map keyed on the prompt's position for
/// spoof and hybrid prompts. Content prompts carry no map.
SpoofCueMap scm_for_prompt(const Prompt& prompt, const ScmShape& shape, Rng& rng,
                           const ScmConfig& config = {});

/// One-line JSON record {prompt_text, shape, mask} with the mask written as a
/// row-major string of '0'/'1' characters.
std::string supervision_record(const Prompt& prompt, const SpoofCueMap& map);

}  // namespace slip
