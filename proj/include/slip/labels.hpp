#pragma once

#include <string>
#include <string_view>

namespace slip {

enum class SampleLabel { live, spoof };

std::string_view to_string(SampleLabel label);

/// Accepts "live" or "spoof"; throws ArgumentError otherwise.
SampleLabel parse_label(std::string_view text);

}  // namespace slip
