#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "slip/errors.hpp"
#include "slip/prompt_grammar.hpp"

using namespace slip;

TEST_SUITE("prompt_grammar") {
  TEST_CASE("live enumeration over two adjectives") {
    VocabConfig v;
    v.live_adjectives = {"live", "real"};
    const auto p = enumerate_prompts(PromptFamily::live, v);
    REQUIRE(p.size() == 2);
    CHECK(p[0].text == "This is a live face.");
    CHECK(p[1].text == "This is a real face.");
    CHECK(p[0].live_adjective == "live");
    CHECK_FALSE(p[0].position.has_value());
    CHECK_FALSE(p[0].occluding_object.has_value());
  }

  TEST_CASE("content enumeration with a single word") {
    VocabConfig v;
    v.content_words = {"face"};
    const auto p = enumerate_prompts(PromptFamily::content, v);
    REQUIRE(p.size() == 1);
    CHECK(p[0].text == "This is a face image.");
    CHECK_FALSE(p[0].spoof_adjective.has_value());
    CHECK_FALSE(p[0].live_adjective.has_value());
  }

  TEST_CASE("spoof enumeration covers both positions") {
    VocabConfig v;
    v.spoof_adjectives = {"spoof"};
    v.positions = {Position::upper, Position::right};
    v.occluding_objects = {"mask"};
    const auto p = enumerate_prompts(PromptFamily::spoof, v);
    REQUIRE(p.size() == 2);
    std::set<Position> seen;
    for (const auto& x : p) seen.insert(*x.position);
    CHECK(seen == std::set<Position>{Position::upper, Position::right});
    std::set<std::string> texts{p[0].text, p[1].text};
    CHECK(texts == std::set<std::string>{
                       "This is a spoof face modified by covering the right part with a mask.",
                       "This is a spoof face modified by covering the upper part with a mask."});
  }

  TEST_CASE("enumeration size is the product of slot sizes and has no duplicates") {
    VocabConfig v;
    v.live_adjectives = {"real", "live", "real"};  // duplicate collapses
    const std::size_t nl = 2, ns = v.spoof_adjectives.size(), np = v.positions.size(),
                      no = v.occluding_objects.size(), nc = v.content_words.size();
    CHECK(enumerate_prompts(PromptFamily::live, v).size() == nl);
    CHECK(enumerate_prompts(PromptFamily::spoof, v).size() == ns * np * no);
    CHECK(enumerate_prompts(PromptFamily::content, v).size() == nc);
    const auto hybrid = enumerate_prompts(PromptFamily::hybrid, v);
    CHECK(hybrid.size() == ns * np * nl * no);
    std::set<std::string> texts;
    for (const auto& p : hybrid) texts.insert(p.text);
    CHECK(texts.size() == hybrid.size());
    CHECK(std::is_sorted(texts.begin(), texts.end()));
  }

  TEST_CASE("every generated text parses back to its bindings") {
    const VocabConfig v;
    for (auto f : {PromptFamily::live, PromptFamily::spoof, PromptFamily::content, PromptFamily::hybrid}) {
      for (const auto& p : enumerate_prompts(f, v)) {
        CHECK(parse_prompt(p.text) == p);
        CHECK(bindings_consistent(p));
      }
    }
    CHECK_THROWS_AS(parse_prompt("This is a cat."), ArgumentError);
  }

  TEST_CASE("hybrid construction") {
    const Prompt live = make_live_prompt("live");
    const Prompt spoof = make_spoof_prompt("spoof", Position::upper, "mask");
    const Prompt h = build_hybrid(live, spoof);
    CHECK(h.text == "This is a spoof modified by covering the upper part of a live face with a mask.");
    CHECK(h.position == spoof.position);
    CHECK(h.family == PromptFamily::hybrid);

    const Prompt h2 = build_hybrid(make_live_prompt("real"), make_spoof_prompt("fake", Position::right, "photo"));
    const Prompt parsed = parse_prompt(h2.text);
    CHECK(parsed.live_adjective == "real");
    CHECK(parsed.spoof_adjective == "fake");
    CHECK(parsed.position == Position::right);
    CHECK(parsed.occluding_object == "photo");

    CHECK_THROWS_AS(build_hybrid(spoof, live), ArgumentError);
    CHECK_THROWS_AS(build_hybrid(live, live), ArgumentError);
  }

  TEST_CASE("corner positions render as two words and round trip") {
    const Prompt p = make_spoof_prompt("fake", Position::lower_left, "screen");
    CHECK(p.text == "This is a fake face modified by covering the lower left part with a screen.");
    CHECK(parse_prompt(p.text).position == Position::lower_left);
    CHECK(parse_position("lower left") == Position::lower_left);
    CHECK(parse_position("lower_left") == Position::lower_left);
    CHECK_FALSE(parse_position("middle").has_value());
  }

  TEST_CASE("vocabulary validation") {
    VocabConfig v;
    v.occluding_objects.clear();
    CHECK_THROWS_AS(enumerate_prompts(PromptFamily::spoof, v), ConfigError);
    VocabConfig w;
    w.live_adjectives = {"two words"};
    CHECK_THROWS_AS(w.validate(), ConfigError);
  }

  TEST_CASE("sample_batch is deterministic and well formed") {
    const VocabConfig v;
    const PromptCounts counts{4, 16, 3};
    const auto a = sample_batch(0, counts, v);
    const auto b = sample_batch(0, counts, v);
    CHECK(a == b);
    CHECK(a.live.size() == 4);
    CHECK(a.spoof.size() == 16);
    CHECK(a.content.size() == 3);
    REQUIRE(a.hybrid.size() == a.hybrid_pairs.size());
    for (std::size_t k = 0; k < a.hybrid.size(); ++k) {
      const auto [li, si] = a.hybrid_pairs[k];
      CHECK(a.hybrid[k] == build_hybrid(a.live[li], a.spoof[si]));
    }
    std::set<std::string> unique;
    for (const auto& p : a.spoof) unique.insert(p.text);
    CHECK(unique.size() == a.spoof.size());
    CHECK_FALSE(sample_batch(1, counts, v) == a);
  }

  TEST_CASE("minimal batch has exactly one hybrid pairing") {
    const auto b = sample_batch(3, {1, 1, 1}, VocabConfig{});
    CHECK(b.hybrid.size() == 1);
    CHECK(b.hybrid_pairs.front() == std::pair<std::size_t, std::size_t>{0, 0});
  }

  TEST_CASE("oversized requests are rejected") {
    const VocabConfig v;
    CHECK_THROWS_AS(sample_batch(0, {5, 1, 1}, v), ArgumentError);
    CHECK_THROWS_AS(sample_batch(0, {1, 1, 4}, v), ArgumentError);
  }

  TEST_CASE("spoof prompts are sampled uniformly") {
    const VocabConfig v;
    const auto all = enumerate_prompts(PromptFamily::spoof, v);
    const std::size_t draws = 16, seeds = 1000;
    std::map<std::string, std::size_t> counts;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
      for (const auto& p : sample_batch(seed, {4, draws, 3}, v).spoof) ++counts[p.text];
    }
    const double p = static_cast<double>(draws) / static_cast<double>(all.size());
    const double mean = p * seeds;
    const double sigma = std::sqrt(seeds * p * (1 - p));
    for (const auto& prompt : all) {
      const double c = static_cast<double>(counts[prompt.text]);
      CHECK(std::abs(c - mean) <= 3.0 * sigma);
    }
  }

  TEST_CASE("dump lines carry family, text and bindings") {
    const Prompt p = make_spoof_prompt("fake", Position::center, "paper");
    CHECK(dump_line(p) ==
          "spoof\tThis is a fake face modified by covering the center part with a paper.\t"
          "spoof_adjective=fake,position=center,occluding_object=paper");
    CHECK(dump_line(make_live_prompt("real")) == "live\tThis is a real face.\tlive_adjective=real");
  }
}
