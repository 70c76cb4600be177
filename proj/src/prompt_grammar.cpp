#include "slip/prompt_grammar.hpp"

#include <algorithm>
#include <numeric>
#include <regex>

#include "slip/errors.hpp"
#include "slip/rng.hpp"

namespace slip {
namespace {

constexpr std::array<std::string_view, 10> kPositionIds = {
    "upper",      "lower",       "left",       "right",       "center",
    "upper_left", "upper_right", "lower_left", "lower_right", "whole"};

constexpr std::array<std::string_view, 10> kPositionPhrases = {
    "upper",      "lower",       "left",       "right",       "center",
    "upper left", "upper right", "lower left", "lower right", "whole"};

bool is_token_word(std::string_view w) {
  if (w.empty()) return false;
  return std::all_of(w.begin(), w.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
           (ch >= '0' && ch <= '9') || ch == '_';
  });
}

void check_slot(const std::vector<std::string>& words, const char* slot) {
  if (words.empty()) {
    throw ConfigError(std::string("vocabulary slot '") + slot + "' is empty");
  }
  for (const auto& w : words) {
    if (!is_token_word(w)) {
      throw ConfigError(std::string("vocabulary slot '") + slot +
                        "' has a non-token word: '" + w + "'");
    }
  }
}

std::vector<std::string> sorted_unique(std::vector<std::string> words) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

std::vector<Position> sorted_unique(std::vector<Position> positions) {
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  return positions;
}

template <typename T>
const T& required(const std::optional<T>& slot, const char* what) {
  if (!slot) throw ArgumentError(std::string("prompt is missing binding: ") + what);
  return *slot;
}

Prompt make_hybrid(std::string sa, Position pa, std::string la, std::string oo) {
  Prompt p;
  p.family = PromptFamily::hybrid;
  p.spoof_adjective = std::move(sa);
  p.position = pa;
  p.live_adjective = std::move(la);
  p.occluding_object = std::move(oo);
  p.text = render_prompt_text(p);
  return p;
}

// Partial Fisher-Yates: the first k entries of a permutation of [0, n).
std::vector<std::size_t> draw_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace

std::string_view to_string(PromptFamily family) {
  switch (family) {
    case PromptFamily::live: return "live";
    case PromptFamily::spoof: return "spoof";
    case PromptFamily::content: return "content";
    case PromptFamily::hybrid: return "hybrid";
  }
  return "?";
}

std::optional<PromptFamily> parse_family(std::string_view name) {
  for (auto f : {PromptFamily::live, PromptFamily::spoof, PromptFamily::content,
                 PromptFamily::hybrid}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

std::string_view to_string(Position position) {
  return kPositionIds[static_cast<std::size_t>(position)];
}

std::string_view position_phrase(Position position) {
  return kPositionPhrases[static_cast<std::size_t>(position)];
}

std::optional<Position> parse_position(std::string_view name) {
  for (std::size_t i = 0; i < kAllPositions.size(); ++i) {
    if (kPositionIds[i] == name || kPositionPhrases[i] == name) return kAllPositions[i];
  }
  return std::nullopt;
}

void VocabConfig::validate() const {
  check_slot(live_adjectives, "live_adjectives");
  check_slot(spoof_adjectives, "spoof_adjectives");
  check_slot(occluding_objects, "occluding_objects");
  check_slot(content_words, "content_words");
  if (positions.empty()) throw ConfigError("vocabulary slot 'positions' is empty");
}

std::string render_prompt_text(const Prompt& b) {
  switch (b.family) {
    case PromptFamily::live:
      return "This is a " + required(b.live_adjective, "live adjective") + " face.";
    case PromptFamily::spoof:
      return "This is a " + required(b.spoof_adjective, "spoof adjective") +
             " face modified by covering the " +
             std::string(position_phrase(required(b.position, "position"))) +
             " part with a " + required(b.occluding_object, "occluding object") + ".";
    case PromptFamily::content:
      return "This is a " + required(b.content_word, "content word") + " image.";
    case PromptFamily::hybrid:
      return "This is a " + required(b.spoof_adjective, "spoof adjective") +
             " modified by covering the " +
             std::string(position_phrase(required(b.position, "position"))) +
             " part of a " + required(b.live_adjective, "live adjective") +
             " face with a " + required(b.occluding_object, "occluding object") + ".";
  }
  throw ArgumentError("unknown prompt family");
}

Prompt make_live_prompt(std::string live_adjective) {
  Prompt p;
  p.family = PromptFamily::live;
  p.live_adjective = std::move(live_adjective);
  p.text = render_prompt_text(p);
  return p;
}

Prompt make_spoof_prompt(std::string spoof_adjective, Position position,
                         std::string occluding_object) {
  Prompt p;
  p.family = PromptFamily::spoof;
  p.spoof_adjective = std::move(spoof_adjective);
  p.position = position;
  p.occluding_object = std::move(occluding_object);
  p.text = render_prompt_text(p);
  return p;
}

Prompt make_content_prompt(std::string content_word) {
  Prompt p;
  p.family = PromptFamily::content;
  p.content_word = std::move(content_word);
  p.text = render_prompt_text(p);
  return p;
}

std::vector<Prompt> enumerate_prompts(PromptFamily family, const VocabConfig& vocab) {
  std::vector<Prompt> out;
  auto positions = [&] {
    if (vocab.positions.empty()) throw ConfigError("vocabulary slot 'positions' is empty");
    return sorted_unique(vocab.positions);
  };
  switch (family) {
    case PromptFamily::live:
      check_slot(vocab.live_adjectives, "live_adjectives");
      for (const auto& la : sorted_unique(vocab.live_adjectives)) {
        out.push_back(make_live_prompt(la));
      }
      break;
    case PromptFamily::content:
      check_slot(vocab.content_words, "content_words");
      for (const auto& cw : sorted_unique(vocab.content_words)) {
        out.push_back(make_content_prompt(cw));
      }
      break;
    case PromptFamily::spoof: {
      check_slot(vocab.spoof_adjectives, "spoof_adjectives");
      check_slot(vocab.occluding_objects, "occluding_objects");
      const auto pas = positions();
      const auto oos = sorted_unique(vocab.occluding_objects);
      for (const auto& sa : sorted_unique(vocab.spoof_adjectives)) {
        for (Position pa : pas) {
          for (const auto& oo : oos) out.push_back(make_spoof_prompt(sa, pa, oo));
        }
      }
      break;
    }
    case PromptFamily::hybrid: {
      check_slot(vocab.spoof_adjectives, "spoof_adjectives");
      check_slot(vocab.live_adjectives, "live_adjectives");
      check_slot(vocab.occluding_objects, "occluding_objects");
      const auto pas = positions();
      const auto las = sorted_unique(vocab.live_adjectives);
      const auto oos = sorted_unique(vocab.occluding_objects);
      for (const auto& sa : sorted_unique(vocab.spoof_adjectives)) {
        for (Position pa : pas) {
          for (const auto& la : las) {
            for (const auto& oo : oos) out.push_back(make_hybrid(sa, pa, la, oo));
          }
        }
      }
      break;
    }
  }
  return out;
}

Prompt build_hybrid(const Prompt& live_prompt, const Prompt& spoof_prompt) {
  if (live_prompt.family != PromptFamily::live) {
    throw ArgumentError("build_hybrid: first prompt must be a live prompt");
  }
  if (spoof_prompt.family != PromptFamily::spoof) {
    throw ArgumentError("build_hybrid: second prompt must be a spoof prompt");
  }
  return make_hybrid(required(spoof_prompt.spoof_adjective, "spoof adjective"),
                     required(spoof_prompt.position, "position"),
                     required(live_prompt.live_adjective, "live adjective"),
                     required(spoof_prompt.occluding_object, "occluding object"));
}

Prompt parse_prompt(std::string_view text) {
  static const std::regex live_re(R"(^This is a (\w+) face\.$)");
  static const std::regex spoof_re(
      R"(^This is a (\w+) face modified by covering the ([a-z ]+) part with a (\w+)\.$)");
  static const std::regex content_re(R"(^This is a (\w+) image\.$)");
  static const std::regex hybrid_re(
      R"(^This is a (\w+) modified by covering the ([a-z ]+) part of a (\w+) face with a (\w+)\.$)");

  const std::string s(text);
  std::smatch m;
  auto position_of = [&](const std::string& phrase) {
    auto pos = parse_position(phrase);
    if (!pos) throw ArgumentError("unknown position phrase '" + phrase + "'");
    return *pos;
  };
  Prompt p;
  if (std::regex_match(s, m, live_re)) {
    p = make_live_prompt(m[1]);
  } else if (std::regex_match(s, m, spoof_re)) {
    p = make_spoof_prompt(m[1], position_of(m[2]), m[3]);
  } else if (std::regex_match(s, m, content_re)) {
    p = make_content_prompt(m[1]);
  } else if (std::regex_match(s, m, hybrid_re)) {
    p = make_hybrid(m[1], position_of(m[2]), m[3], m[4]);
  } else {
    throw ArgumentError("text matches no prompt template: '" + s + "'");
  }
  if (p.text != s) throw ArgumentError("text is not in canonical form: '" + s + "'");
  return p;
}

bool bindings_consistent(const Prompt& p) {
  const bool sa = p.spoof_adjective.has_value();
  const bool pa = p.position.has_value();
  const bool oo = p.occluding_object.has_value();
  const bool la = p.live_adjective.has_value();
  const bool cw = p.content_word.has_value();
  switch (p.family) {
    case PromptFamily::live: return la && !pa && !oo && !sa && !cw;
    case PromptFamily::spoof: return sa && pa && oo && !la && !cw;
    case PromptFamily::content: return cw && !sa && !pa && !oo && !la;
    case PromptFamily::hybrid: return sa && pa && oo && la && !cw;
  }
  return false;
}

std::string dump_line(const Prompt& p) {
  std::vector<std::string> kv;
  if (p.live_adjective) kv.push_back("live_adjective=" + *p.live_adjective);
  if (p.spoof_adjective) kv.push_back("spoof_adjective=" + *p.spoof_adjective);
  if (p.position) kv.push_back("position=" + std::string(to_string(*p.position)));
  if (p.occluding_object) kv.push_back("occluding_object=" + *p.occluding_object);
  if (p.content_word) kv.push_back("content_word=" + *p.content_word);
  std::string bindings;
  for (std::size_t i = 0; i < kv.size(); ++i) {
    if (i) bindings += ',';
    bindings += kv[i];
  }
  return std::string(to_string(p.family)) + '\t' + p.text + '\t' + bindings;
}

PromptBatch sample_batch(std::uint64_t seed, const PromptCounts& counts,
                         const VocabConfig& vocab) {
  if (counts.live == 0 || counts.spoof == 0 || counts.content == 0) {
    throw ArgumentError("sample_batch: prompt counts must be positive");
  }
  const auto live_all = enumerate_prompts(PromptFamily::live, vocab);
  const auto spoof_all = enumerate_prompts(PromptFamily::spoof, vocab);
  const auto content_all = enumerate_prompts(PromptFamily::content, vocab);
  if (counts.live > live_all.size() || counts.spoof > spoof_all.size() ||
      counts.content > content_all.size()) {
    throw ArgumentError("sample_batch: requested counts exceed the enumeration sizes (" +
                        std::to_string(live_all.size()) + ", " +
                        std::to_string(spoof_all.size()) + ", " +
                        std::to_string(content_all.size()) + ")");
  }
  PromptBatch batch;
  auto draw = [&](std::uint64_t stream, const std::vector<Prompt>& all, std::size_t k,
                  std::vector<Prompt>& dst) {
    Rng rng = Rng::derive(seed, {stream});
    for (std::size_t i : draw_without_replacement(rng, all.size(), k)) dst.push_back(all[i]);
  };
  draw(1, live_all, counts.live, batch.live);
  draw(2, spoof_all, counts.spoof, batch.spoof);
  draw(3, content_all, counts.content, batch.content);
  for (std::size_t k = 0; k < batch.spoof.size(); ++k) {
    const std::size_t li = k % batch.live.size();
    batch.hybrid.push_back(build_hybrid(batch.live[li], batch.spoof[k]));
    batch.hybrid_pairs.emplace_back(li, k);
  }
  return batch;
}

}  // namespace slip
