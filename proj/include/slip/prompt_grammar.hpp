#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slip {

enum class PromptFamily { live, spoof, content, hybrid };

/// Where an occluding object sits on the face. Closed set of ten regions.
enum class Position {
  upper,
  lower,
  left,
  right,
  center,
  upper_left,
  upper_right,
  lower_left,
  lower_right,
  whole,
};

inline constexpr std::array<Position, 10> kAllPositions = {
    Position::upper,      Position::lower,       Position::left,
    Position::right,      Position::center,      Position::upper_left,
    Position::upper_right, Position::lower_left, Position::lower_right,
    Position::whole,
};

std::string_view to_string(PromptFamily family);
std::optional<PromptFamily> parse_family(std::string_view name);

/// Identifier form, e.g. "upper_left".
std::string_view to_string(Position position);
/// Form used inside prompt text, e.g. "upper left".
std::string_view position_phrase(Position position);
/// Accepts both the identifier and the phrase form.
std::optional<Position> parse_position(std::string_view name);

struct Prompt {
  PromptFamily family = PromptFamily::live;
  std::string text;
  std::optional<std::string> spoof_adjective;
  std::optional<Position> position;
  std::optional<std::string> occluding_object;
  std::optional<std::string> live_adjective;
  std::optional<std::string> content_word;

  bool operator==(const Prompt&) const = default;
};

/// Word lists for every template slot. Words are single tokens.
struct VocabConfig {
  std::vector<std::string> live_adjectives{"live", "real", "genuine", "bonafide"};
  std::vector<std::string> spoof_adjectives{"spoof", "fake", "forged", "counterfeit"};
  std::vector<std::string> occluding_objects{"mask", "photo", "paper", "screen"};
  std::vector<std::string> content_words{"face", "facial", "portrait"};
  std::vector<Position> positions{kAllPositions.begin(), kAllPositions.end()};

  /// Throws ConfigError on an empty list or a word that is not a single token.
  void validate() const;
};

/// Render the family template for the given bindings. Missing required
/// bindings throw ArgumentError.
std::string render_prompt_text(const Prompt& bindings);

Prompt make_live_prompt(std::string live_adjective);
Prompt make_spoof_prompt(std::string spoof_adjective, Position position,
                         std::string occluding_object);
Prompt make_content_prompt(std::string content_word);

/// Cartesian expansion of one family's template over its slots. Slot words
/// are sorted and deduplicated; tuples come out in lexicographic order.
std::vector<Prompt> enumerate_prompts(PromptFamily family, const VocabConfig& vocab);

/// Hybrid prompt taking SA/PA/OO from `spoof_prompt` and the live adjective
/// from `live_prompt`.
Prompt build_hybrid(const Prompt& live_prompt, const Prompt& spoof_prompt);

/// Recover family and bindings from generated text. Throws ArgumentError when
/// the text matches no template.
Prompt parse_prompt(std::string_view text);

/// Invariant check for a prompt's family/binding combination.
bool bindings_consistent(const Prompt& prompt);

/// "family\ttext\tkey=value,..." dump line.
std::string dump_line(const Prompt& prompt);

struct PromptCounts {
  std::size_t live = 1;
  std::size_t spoof = 1;
  std::size_t content = 1;
};

struct PromptBatch {
  std::vector<Prompt> live;
  std::vector<Prompt> spoof;
  std::vector<Prompt> content;
  std::vector<Prompt> hybrid;
  /// hybrid[k] was built from live[first] and spoof[second].
  std::vector<std::pair<std::size_t, std::size_t>> hybrid_pairs;

  bool operator==(const PromptBatch&) const = default;
};

/// Uniform without-replacement draw from each family's enumeration, plus one
/// hybrid per sampled spoof prompt (paired with live[k % N_l]).
PromptBatch sample_batch(std::uint64_t seed, const PromptCounts& counts,
                         const VocabConfig& vocab);

}  // namespace slip
