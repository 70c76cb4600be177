#include "slip/labels.hpp"

#include "slip/errors.hpp"

namespace slip {

std::string_view to_string(SampleLabel label) {
  return label == SampleLabel::live ? "live" : "spoof";
}

SampleLabel parse_label(std::string_view text) {
  if (text == "live") return SampleLabel::live;
  if (text == "spoof") return SampleLabel::spoof;
  throw ArgumentError("unknown label '" + std::string(text) + "'");
}

}  // namespace slip
