#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "prosocial/corpus.hpp"

using namespace prosocial;

namespace {

DialogueSet from_string(const std::string& text, CorpusSchema schema) {
  std::istringstream in(text);
  return load_corpus_stream(in, schema);
}

}  // namespace

TEST_CASE("load_corpus rejects empty input") {
  std::istringstream in("");
  REQUIRE_THROWS_WITH(load_corpus_stream(in, CorpusSchema::Native),
                      "zero valid records");
}

TEST_CASE("load_corpus native single record round trip") {
  const std::string line =
      R"({"id":"a1","context":["hi there"],"response":"hello","rot":"be kind .","safety_label":"needs_caution","explanation":"why","severity":4,"split":"train","custom_key":42})"
      "\n";
  auto set = from_string(line, CorpusSchema::Native);
  REQUIRE(set.records.size() == 1);
  REQUIRE(set.rejections.empty());
  const auto& d = set.records[0];
  CHECK(d.id == "a1");
  CHECK(d.context == std::vector<std::string>{"hi there"});
  CHECK(d.response == "hello");
  CHECK(d.rot == "be kind .");
  CHECK(d.safety_label == SafetyLabel::NeedsCaution);
  CHECK(d.severity == 4);
  CHECK(d.extra.at("custom_key") == 42);

  // unknown keys survive serialize -> load
  auto again = from_string(serialize_corpus(set), CorpusSchema::Native);
  REQUIRE(again.records.size() == 1);
  CHECK(again.records[0] == d);
}

TEST_CASE("load_corpus mic severity out of range is rejected with reason") {
  const std::string text =
      R"({"Q":"prompt one","A":"reply one","rot":"r","severity":6})"
      "\n"
      R"({"Q":"prompt two","A":"reply two","rot":"r","severity":5})"
      "\n";
  auto set = from_string(text, CorpusSchema::Mic);
  REQUIRE(set.records.size() == 1);
  REQUIRE(set.rejections.size() == 1);
  CHECK(set.rejections[0].line_number == 1);
  CHECK(set.rejections[0].reason == "severity out of range");
  CHECK(set.records[0].context == std::vector<std::string>{"prompt two"});
  CHECK(set.records[0].response == "reply two");
}

TEST_CASE("rejections plus accepted equals line count") {
  const std::string text =
      R"({"id":"x","context":["a"],"response":"b"})"
      "\n"
      "not json\n"
      R"({"id":"y","context":[],"response":"b"})"
      "\n"
      R"({"id":"z","context":["c"],"response":"d"})"
      "\n";
  auto set = from_string(text, CorpusSchema::Native);
  CHECK(set.records.size() + set.rejections.size() == 4);
  CHECK(set.records.size() == 2);
}

TEST_CASE("unknown schema name") {
  REQUIRE_THROWS_AS(parse_schema("bogus"), std::invalid_argument);
}

TEST_CASE("filter_by_severity") {
  DialogueSet set;
  for (int sev : {3, 5, 5}) {
    Dialogue d;
    d.id = "r" + std::to_string(set.records.size());
    d.context = {"c"};
    d.response = "r";
    d.severity = sev;
    set.records.push_back(d);
  }
  Dialogue no_sev;
  no_sev.id = "n";
  no_sev.context = {"c"};
  no_sev.response = "r";
  set.records.push_back(no_sev);

  SECTION("strict greater-than five selects nothing on a 0-5 scale") {
    CHECK(filter_by_severity(set, 5, true).records.empty());
  }
  SECTION(">= 5 fallback keeps the two severity-5 records") {
    CHECK(filter_by_severity(set, 5, false).records.size() == 2);
  }
  SECTION("min_severity 0 non-strict is identity on records with severity") {
    CHECK(filter_by_severity(set, 0, false).records.size() == 3);
  }
  SECTION("all severities below threshold yields empty set") {
    DialogueSet zeros;
    for (int i = 0; i < 3; ++i) {
      Dialogue d;
      d.id = "z" + std::to_string(i);
      d.context = {"c"};
      d.response = "r";
      d.severity = 0;
      zeros.records.push_back(d);
    }
    CHECK(filter_by_severity(zeros, 0, true).records.empty());
  }
  SECTION("threshold out of range") {
    REQUIRE_THROWS_AS(filter_by_severity(set, 6, true), std::invalid_argument);
  }
}

TEST_CASE("synthesize_corpus determinism") {
  SynthesisSpec spec;
  spec.n_dialogues = 60;
  spec.unsocial_fraction = 0.4;
  spec.seed = 1234;
  auto a = synthesize_corpus(spec);
  auto b = synthesize_corpus(spec);
  CHECK(serialize_corpus(a) == serialize_corpus(b));
}

TEST_CASE("synthesize_corpus zero unsocial fraction is all casual") {
  SynthesisSpec spec;
  spec.n_dialogues = 40;
  spec.unsocial_fraction = 0.0;
  spec.seed = 7;
  auto set = synthesize_corpus(spec);
  for (const auto& d : set.records) {
    REQUIRE(d.safety_label.has_value());
    CHECK(*d.safety_label == SafetyLabel::Casual);
  }
}

TEST_CASE("synthesize_corpus plants unsocial records exactly") {
  SynthesisSpec spec;
  spec.n_dialogues = 100;
  spec.unsocial_fraction = 0.5;
  spec.seed = 99;
  auto set = synthesize_corpus(spec);
  int unsocial = 0;
  for (const auto& d : set.records)
    if (d.safety_label && *d.safety_label != SafetyLabel::Casual) ++unsocial;
  CHECK(unsocial == 50);
}

TEST_CASE("synthesize_corpus invariants hold across a 100-seed sweep") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SynthesisSpec spec;
    spec.n_dialogues = 20;
    spec.unsocial_fraction = 0.35;
    spec.seed = seed;
    auto set = synthesize_corpus(spec);
    REQUIRE(set.records.size() == 20);
    for (const auto& d : set.records) {
      INFO("seed " << seed << " id " << d.id);
      CHECK(validate_dialogue(d).empty());
      if (d.safety_label && *d.safety_label != SafetyLabel::Casual) {
        REQUIRE(d.severity.has_value());
        CHECK(*d.severity >= 4);
        CHECK(d.rot.has_value());
        CHECK((*d.safety_label == SafetyLabel::NeedsCaution ||
               *d.safety_label == SafetyLabel::NeedsIntervention));
      }
    }
  }
}

TEST_CASE("synthesize_corpus unsocial lexicon stays out of casual records") {
  SynthesisSpec spec;
  spec.n_dialogues = 80;
  spec.unsocial_fraction = 0.5;
  spec.seed = 5;
  auto set = synthesize_corpus(spec);
  auto contains_any = [](const std::string& text,
                         const std::vector<std::string>& words) {
    for (const auto& w : words)
      if (text.find(w) != std::string::npos) return true;
    return false;
  };
  for (const auto& d : set.records) {
    if (d.safety_label == SafetyLabel::Casual) {
      for (const auto& t : d.context) {
        CHECK_FALSE(contains_any(t, lexicon::caution_verbs()));
        CHECK_FALSE(contains_any(t, lexicon::intervention_verbs()));
      }
      CHECK_FALSE(contains_any(d.response, lexicon::caution_verbs()));
      CHECK_FALSE(contains_any(d.response, lexicon::intervention_verbs()));
    }
  }
}

TEST_CASE("synthesize_corpus rejects bad specs") {
  SynthesisSpec spec;
  spec.n_dialogues = 0;
  REQUIRE_THROWS_AS(synthesize_corpus(spec), std::invalid_argument);
  spec.n_dialogues = 10;
  spec.profile = "nope";
  REQUIRE_THROWS_AS(synthesize_corpus(spec), std::invalid_argument);
}

TEST_CASE("mic profile plants unsocial replies") {
  SynthesisSpec spec;
  spec.n_dialogues = 30;
  spec.unsocial_fraction = 1.0;
  spec.seed = 3;
  spec.profile = "mic";
  auto set = synthesize_corpus(spec);
  for (const auto& d : set.records) {
    REQUIRE(d.severity.has_value());
    CHECK(*d.severity >= 4);
    CHECK(d.rot.has_value());
  }
}
