#include <catch2/catch_amalgamated.hpp>

#include "prosocial/text.hpp"

using namespace prosocial;

namespace {

DialogueSet tiny_corpus(const std::vector<std::string>& utterances) {
  DialogueSet set;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    Dialogue d;
    d.id = "t" + std::to_string(i);
    d.context = {utterances[i]};
    d.response = utterances[i];
    set.records.push_back(d);
  }
  return set;
}

}  // namespace

TEST_CASE("reserved and control ids sit at fixed positions") {
  auto v = make_reserved_vocab();
  REQUIRE(v.size() == kNumReserved);
  CHECK(v.id("<pad>") == kPad);
  CHECK(v.id("<unk>") == kUnk);
  CHECK(v.id("<bos>") == kBos);
  CHECK(v.id("<eos>") == kEos);
  CHECK(v.id("<context>") == kTokContext);
  CHECK(v.id("<response>") == kTokResponse);
  CHECK(v.id("<rot>") == kTokRot);
  CHECK(v.id("<explanation>") == kTokExplanation);
  CHECK(v.id("<objective-voice>") == kTokObjectiveVoice);
  CHECK(v.id("<lexical-overlap>") == kTokLexicalOverlap);
  CHECK(v.id("<needs_caution>") == kTokNeedsCaution);
  CHECK(v.id("<needs_intervention>") == kTokNeedsIntervention);
  CHECK(v.id("<possibly_needs_caution>") == kTokPossiblyNeedsCaution);
  CHECK(v.id("<probably_needs_caution>") == kTokProbablyNeedsCaution);
}

TEST_CASE("build_vocab frequency threshold and tie-breaks") {
  // one utterance "a b a": counts a=2 (x2 for context+response), b=1 (x2)
  auto corpus = tiny_corpus({"a b a"});
  auto v1 = build_vocab(corpus, 1);
  REQUIRE(v1.size() == kNumReserved + 2);
  CHECK(v1.id("a") == kNumReserved);      // higher count first
  CHECK(v1.id("b") == kNumReserved + 1);

  auto v2 = build_vocab(corpus, 3);
  REQUIRE(v2.size() == kNumReserved + 1);
  CHECK(v2.id("a") == kNumReserved);
  CHECK(v2.id("b") == kUnk);
}

TEST_CASE("build_vocab is invariant to record order") {
  auto a = tiny_corpus({"red green", "blue", "red"});
  auto b = tiny_corpus({"red", "blue", "red green"});
  // ids differ per record but token multiset is equal
  for (auto& d : b.records) d.id = "x" + d.id;
  CHECK(build_vocab(a, 1).id_to_token == build_vocab(b, 1).id_to_token);
}

TEST_CASE("control token ids identical across vocabs") {
  auto a = build_vocab(tiny_corpus({"alpha beta"}), 1);
  auto b = build_vocab(tiny_corpus({"gamma delta epsilon"}), 1);
  for (int id = 0; id < kNumReserved; ++id)
    CHECK(a.token(id) == b.token(id));
}

TEST_CASE("encode basics") {
  auto v = build_vocab(tiny_corpus({"hello world"}), 1);
  CHECK(encode("", v).empty());
  CHECK(encode("Hello, world", v) ==
        TokenSeq{v.id("hello"), v.id(","), v.id("world")});
  CHECK(encode("zzzunknown", v) == TokenSeq{kUnk});
}

TEST_CASE("control token literals pass through as reserved ids") {
  auto v = build_vocab(tiny_corpus({"be kind"}), 1);
  CHECK(encode("<rot> be kind", v) ==
        TokenSeq{kTokRot, v.id("be"), v.id("kind")});
  CHECK(encode("<needs_intervention>", v) == TokenSeq{kTokNeedsIntervention});
}

TEST_CASE("decode after encode is idempotent on normalized text") {
  auto v = build_vocab(tiny_corpus({"the cat sat on a mat , twice ."}), 1);
  for (const std::string t :
       {"the cat sat", "The CAT sat , twice .", "a mat on the mat"}) {
    const std::string norm = decode_tokens(encode(t, v), v);
    CHECK(decode_tokens(encode(norm, v), v) == norm);
  }
}

TEST_CASE("compose_input layouts") {
  auto v = build_vocab(tiny_corpus({"hi x be kind"}), 1);
  SECTION("response-only") {
    CHECK(compose_input(ConditioningMode::ResponseOnly, {"hi"}, std::nullopt, v) ==
          TokenSeq{kTokContext, v.id("hi")});
  }
  SECTION("rot-conditioned") {
    CHECK(compose_input(ConditioningMode::ResponseGivenRot, {"x"},
                        std::string("be kind"), v) ==
          TokenSeq{kTokRot, v.id("be"), v.id("kind"), kTokContext, v.id("x")});
  }
  SECTION("missing rot") {
    REQUIRE_THROWS_AS(compose_input(ConditioningMode::ResponseGivenRot, {"x"},
                                    std::nullopt, v),
                      std::invalid_argument);
  }
  SECTION("rot ignored when mode does not condition on it") {
    CHECK(compose_input(ConditioningMode::RotAndResponse, {"hi"},
                        std::string("be kind"), v) ==
          TokenSeq{kTokContext, v.id("hi")});
  }
}

TEST_CASE("compose_input truncates from the oldest side") {
  auto v = build_vocab(tiny_corpus({"a b c d e f g h"}), 1);
  std::vector<std::string> turns = {"a b c", "d e", "f g h"};
  auto full = compose_input(ConditioningMode::ResponseOnly, turns, std::nullopt, v, 128);
  REQUIRE(full.size() == 9);  // <context> + 8 tokens
  auto cut = compose_input(ConditioningMode::ResponseOnly, turns, std::nullopt, v, 6);
  // budget 5 after <context>: drops "a b c", keeps "d e" + "f g h"
  CHECK(cut == TokenSeq{kTokContext, v.id("d"), v.id("e"), v.id("f"), v.id("g"),
                        v.id("h")});
  auto tiny = compose_input(ConditioningMode::ResponseOnly, turns, std::nullopt, v, 3);
  // final turn alone exceeds the budget: keep its tail
  CHECK(tiny == TokenSeq{kTokContext, v.id("g"), v.id("h")});
  CHECK(tiny.size() == 3);
}

TEST_CASE("compose_target layouts") {
  auto v = build_vocab(tiny_corpus({"ok r u because"}), 1);
  SECTION("safety control token leads") {
    CHECK(compose_target(ConditioningMode::ResponseOnly, "ok", std::nullopt,
                         std::nullopt, SafetyLabel::NeedsCaution, v) ==
          TokenSeq{kTokNeedsCaution, kTokResponse, v.id("ok"), kEos});
  }
  SECTION("casual emits no control token") {
    CHECK(compose_target(ConditioningMode::ResponseOnly, "ok", std::nullopt,
                         std::nullopt, SafetyLabel::Casual, v) ==
          TokenSeq{kTokResponse, v.id("ok"), kEos});
  }
  SECTION("rot-and-response layout") {
    CHECK(compose_target(ConditioningMode::RotAndResponse, "u",
                         std::string("r"), std::nullopt,
                         SafetyLabel::NeedsIntervention, v) ==
          TokenSeq{kTokNeedsIntervention, kTokRot, v.id("r"), kTokResponse,
                   v.id("u"), kEos});
  }
  SECTION("explanation layout") {
    CHECK(compose_target(ConditioningMode::ResponseAndExplanation, "u",
                         std::string("r"), std::string("because"),
                         SafetyLabel::Casual, v) ==
          TokenSeq{kTokExplanation, v.id("because"), kTokResponse, v.id("u"),
                   kEos});
  }
  SECTION("missing fields throw") {
    REQUIRE_THROWS_AS(compose_target(ConditioningMode::ResponseOnly, "",
                                     std::nullopt, std::nullopt,
                                     SafetyLabel::Casual, v),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(compose_target(ConditioningMode::ResponseAndExplanation,
                                     "u", std::string("r"), std::nullopt,
                                     SafetyLabel::Casual, v),
                      std::invalid_argument);
  }
}

TEST_CASE("composition never emits <pad> and respects maxima") {
  auto corpus = tiny_corpus({"one two three four five six seven eight nine"});
  auto v = build_vocab(corpus, 1);
  Rng rng(42);
  const auto& words = corpus.records[0].context;
  (void)words;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> turns;
    const int n_turns = 1 + static_cast<int>(rng.uniform_index(4));
    for (int t = 0; t < n_turns; ++t) {
      std::string turn;
      const int len = 1 + static_cast<int>(rng.uniform_index(12));
      for (int w = 0; w < len; ++w) {
        if (w) turn += ' ';
        turn += "one two three four five six seven eight nine";
      }
      turns.push_back(turn);
    }
    auto in = compose_input(ConditioningMode::ResponseOnly, turns, std::nullopt,
                            v, 32);
    CHECK(in.size() <= 32);
    for (int id : in) CHECK(id != kPad);
    auto tgt = compose_target(ConditioningMode::ResponseOnly, turns[0],
                              std::nullopt, std::nullopt, SafetyLabel::Casual,
                              v, 20);
    CHECK(tgt.size() <= 20);
    CHECK(tgt.back() == kEos);
    for (int id : tgt) CHECK(id != kPad);
  }
}

TEST_CASE("strip_safety_prefix and response content extraction") {
  auto v = build_vocab(tiny_corpus({"r u"}), 1);
  auto tgt = compose_target(ConditioningMode::RotAndResponse, "u",
                            std::string("r"), std::nullopt,
                            SafetyLabel::NeedsCaution, v);
  auto [label, body] = strip_safety_prefix(tgt);
  CHECK(label == SafetyLabel::NeedsCaution);
  CHECK(body.front() == kTokRot);
  CHECK(extract_response_content(tgt) == TokenSeq{v.id("u")});

  // no <response> marker: framing is filtered out
  TokenSeq raw = {kTokNeedsCaution, v.id("u"), kEos};
  CHECK(extract_response_content(raw) == TokenSeq{v.id("u")});
}
