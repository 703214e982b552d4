#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosocial/rng.hpp"

namespace prosocial {

using json = nlohmann::ordered_json;

inline void warn(const std::string& msg) { std::cerr << "[warn] " << msg << "\n"; }

// Five-way caution taxonomy. Enum order is caution order:
// NeedsIntervention > NeedsCaution > ProbablyNeedsCaution >
// PossiblyNeedsCaution > Casual.
enum class SafetyLabel : int {
  Casual = 0,
  PossiblyNeedsCaution = 1,
  ProbablyNeedsCaution = 2,
  NeedsCaution = 3,
  NeedsIntervention = 4,
};

constexpr int kNumSafetyLabels = 5;

inline const char* safety_label_name(SafetyLabel s) {
  switch (s) {
    case SafetyLabel::Casual: return "casual";
    case SafetyLabel::PossiblyNeedsCaution: return "possibly_needs_caution";
    case SafetyLabel::ProbablyNeedsCaution: return "probably_needs_caution";
    case SafetyLabel::NeedsCaution: return "needs_caution";
    case SafetyLabel::NeedsIntervention: return "needs_intervention";
  }
  return "casual";
}

inline std::optional<SafetyLabel> parse_safety_label(std::string s) {
  // tolerate the __label__ wrapping used by ProsocialDialog dumps
  while (!s.empty() && s.front() == '_') s.erase(s.begin());
  while (!s.empty() && s.back() == '_') s.pop_back();
  for (auto& c : s) {
    if (c == ' ' || c == '-') c = '_';
    else c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  for (int i = 0; i < kNumSafetyLabels; ++i) {
    if (s == safety_label_name(static_cast<SafetyLabel>(i)))
      return static_cast<SafetyLabel>(i);
  }
  return std::nullopt;
}

enum class Split { Train, Valid, Test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

inline std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid" || s == "validation" || s == "dev") return Split::Valid;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

// One conversation unit.
struct Dialogue {
  std::string id;
  std::vector<std::string> context;     // H, oldest turn first
  std::string response;                 // U
  std::optional<std::string> rot;       // R
  std::optional<SafetyLabel> safety_label;  // S
  std::optional<std::string> explanation;   // E
  std::optional<int> severity;          // 0..5
  Split split = Split::Train;
  json extra = json::object();          // unknown keys, kept for round trips

  bool operator==(const Dialogue& o) const {
    return id == o.id && context == o.context && response == o.response &&
           rot == o.rot && safety_label == o.safety_label &&
           explanation == o.explanation && severity == o.severity &&
           split == o.split && extra == o.extra;
  }
};

// Returns empty string when valid, else the reason the record is invalid.
inline std::string validate_dialogue(const Dialogue& d) {
  if (d.context.empty()) return "empty context";
  for (const auto& t : d.context)
    if (t.empty()) return "empty context turn";
  if (d.response.empty() && d.split != Split::Test) return "empty response";
  if (d.severity && (*d.severity < 0 || *d.severity > 5))
    return "severity out of range";
  if (d.explanation && !d.safety_label)
    return "explanation without safety label";
  return "";
}

struct RejectedRecord {
  int line_number = 0;  // 1-based
  std::string reason;
};

struct DialogueSet {
  std::vector<Dialogue> records;
  std::vector<RejectedRecord> rejections;

  std::vector<Dialogue> split(Split s) const {
    std::vector<Dialogue> out;
    for (const auto& d : records)
      if (d.split == s) out.push_back(d);
    return out;
  }
};

enum class CorpusSchema { Prosocial, Mic, Native };

inline CorpusSchema parse_schema(const std::string& s) {
  if (s == "prosocial") return CorpusSchema::Prosocial;
  if (s == "mic") return CorpusSchema::Mic;
  if (s == "native") return CorpusSchema::Native;
  throw std::invalid_argument("unknown schema name: " + s);
}

namespace detail {

inline constexpr const char* kNativeKeys[] = {
    "id", "context", "response", "rot", "safety_label",
    "explanation", "severity", "split"};

inline bool is_native_key(const std::string& k) {
  for (const char* n : kNativeKeys)
    if (k == n) return true;
  return false;
}

inline Dialogue parse_native(const json& j) {
  Dialogue d;
  d.id = j.value("id", "");
  if (j.contains("context")) {
    if (j["context"].is_array()) {
      for (const auto& t : j["context"]) d.context.push_back(t.get<std::string>());
    } else {
      d.context.push_back(j["context"].get<std::string>());
    }
  }
  d.response = j.value("response", "");
  if (j.contains("rot") && !j["rot"].is_null())
    d.rot = j["rot"].get<std::string>();
  if (j.contains("safety_label") && !j["safety_label"].is_null()) {
    auto s = parse_safety_label(j["safety_label"].get<std::string>());
    if (!s) throw std::runtime_error("unknown safety label");
    d.safety_label = *s;
  }
  if (j.contains("explanation") && !j["explanation"].is_null())
    d.explanation = j["explanation"].get<std::string>();
  if (j.contains("severity") && !j["severity"].is_null())
    d.severity = j["severity"].get<int>();
  if (j.contains("split")) {
    auto s = parse_split(j["split"].get<std::string>());
    if (!s) throw std::runtime_error("unknown split");
    d.split = *s;
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!is_native_key(it.key())) d.extra[it.key()] = it.value();
  return d;
}

// ProsocialDialog-style record: context/response strings, list-valued
// "rots" and "safety_annotation_reasons".
inline Dialogue parse_prosocial(const json& j, int line) {
  Dialogue d;
  d.id = j.value("dialogue_id", "");
  if (d.id.empty()) d.id = "prosocial-" + std::to_string(line);
  if (j.contains("context")) {
    if (j["context"].is_array())
      for (const auto& t : j["context"]) d.context.push_back(t.get<std::string>());
    else
      d.context.push_back(j["context"].get<std::string>());
  }
  d.response = j.value("response", "");
  if (j.contains("rots") && j["rots"].is_array() && !j["rots"].empty())
    d.rot = j["rots"][0].get<std::string>();
  else if (j.contains("rot") && j["rot"].is_string())
    d.rot = j["rot"].get<std::string>();
  if (j.contains("safety_label")) {
    auto s = parse_safety_label(j["safety_label"].get<std::string>());
    if (!s) throw std::runtime_error("unknown safety label");
    d.safety_label = *s;
  }
  if (j.contains("safety_annotation_reasons") &&
      j["safety_annotation_reasons"].is_array() &&
      !j["safety_annotation_reasons"].empty())
    d.explanation = j["safety_annotation_reasons"][0].get<std::string>();
  if (j.contains("severity")) d.severity = j["severity"].get<int>();
  if (j.contains("split")) {
    auto s = parse_split(j["split"].get<std::string>());
    if (s) d.split = *s;
  }
  return d;
}

// MIC-style record: prompt-reply pair with an RoT and a violation severity.
// The prompt becomes the (single-turn) context and the reply the response;
// the paper never states this conversion, so it is an assumption.
inline Dialogue parse_mic(const json& j, int line) {
  Dialogue d;
  d.id = j.value("id", "");
  if (d.id.empty()) d.id = "mic-" + std::to_string(line);
  std::string prompt = j.value("Q", j.value("prompt", ""));
  if (!prompt.empty()) d.context.push_back(prompt);
  d.response = j.value("A", j.value("reply", j.value("response", "")));
  if (j.contains("rot") && j["rot"].is_string())
    d.rot = j["rot"].get<std::string>();
  if (j.contains("severity"))
    d.severity = j["severity"].get<int>();
  else if (j.contains("violation_severity"))
    d.severity = j["violation_severity"].get<int>();
  if (j.contains("safety_label")) {
    auto s = parse_safety_label(j["safety_label"].get<std::string>());
    if (s) d.safety_label = *s;
  }
  if (j.contains("split")) {
    auto s = parse_split(j["split"].get<std::string>());
    if (s) d.split = *s;
  }
  return d;
}

}  // namespace detail

// Parses one JSONL corpus. Records that fail invariants land in the
// rejection report instead of being silently dropped.
inline DialogueSet load_corpus_stream(std::istream& in, CorpusSchema schema) {
  DialogueSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) {
      set.rejections.push_back({line_no, "blank line"});
      continue;
    }
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception&) {
      set.rejections.push_back({line_no, "invalid json"});
      continue;
    }
    Dialogue d;
    try {
      switch (schema) {
        case CorpusSchema::Native: d = detail::parse_native(j); break;
        case CorpusSchema::Prosocial: d = detail::parse_prosocial(j, line_no); break;
        case CorpusSchema::Mic: d = detail::parse_mic(j, line_no); break;
      }
    } catch (const std::exception& e) {
      set.rejections.push_back({line_no, e.what()});
      continue;
    }
    if (auto reason = validate_dialogue(d); !reason.empty()) {
      set.rejections.push_back({line_no, reason});
      continue;
    }
    if (d.id.empty()) d.id = "rec-" + std::to_string(line_no);
    set.records.push_back(std::move(d));
  }
  if (set.records.empty()) throw std::runtime_error("zero valid records");
  return set;
}

inline DialogueSet load_corpus(const std::string& path, CorpusSchema schema) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("unreadable file: " + path);
  return load_corpus_stream(f, schema);
}

inline json dialogue_to_json(const Dialogue& d) {
  json j;
  j["id"] = d.id;
  j["context"] = d.context;
  j["response"] = d.response;
  if (d.rot) j["rot"] = *d.rot;
  if (d.safety_label) j["safety_label"] = safety_label_name(*d.safety_label);
  if (d.explanation) j["explanation"] = *d.explanation;
  if (d.severity) j["severity"] = *d.severity;
  j["split"] = split_name(d.split);
  for (auto it = d.extra.begin(); it != d.extra.end(); ++it)
    j[it.key()] = it.value();
  return j;
}

// Native JSONL, one record per line. load(serialize(s)) == s.
inline std::string serialize_corpus(const DialogueSet& set) {
  std::string out;
  for (const auto& d : set.records) {
    out += dialogue_to_json(d).dump();
    out += "\n";
  }
  return out;
}

inline void save_corpus(const DialogueSet& set, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << serialize_corpus(set);
}

inline json rejection_report_json(const DialogueSet& set) {
  json arr = json::array();
  for (const auto& r : set.rejections)
    arr.push_back({{"line_number", r.line_number}, {"reason", r.reason}});
  return arr;
}

// Records carrying a severity value, strictly above (strict) or at/above
// (fallback) the threshold. Records without severity never match.
inline DialogueSet filter_by_severity(const DialogueSet& set, int min_severity,
                                      bool strict = false) {
  if (min_severity < 0 || min_severity > 5)
    throw std::invalid_argument("min_severity must lie in [0,5]");
  DialogueSet out;
  for (const auto& d : set.records) {
    if (!d.severity) continue;
    if (strict ? (*d.severity > min_severity) : (*d.severity >= min_severity))
      out.records.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixture synthesis. Lexicons are versioned constants: fixtures built from a
// given (spec, seed) stay stable across releases.
// ---------------------------------------------------------------------------

constexpr int kLexiconVersion = 1;

struct SynthesisSpec {
  int n_dialogues = 0;
  double unsocial_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string profile = "prosocial";  // prosocial | casual | mic | fiveway
};

namespace lexicon {

// shared function words; the only overlap between casual and unsocial text
inline const std::vector<std::string>& function_words() {
  static const std::vector<std::string> v = {
      "i", "you", "we", "they", "it", "the", "a", "to", "of", "and", "is",
      "are", "was", "be", "do", "not", "my", "your", "this", "that", "what",
      "so", "just", "very", "really", "about", "with", "for", "me", "today"};
  return v;
}

inline const std::vector<std::string>& casual_topics() {
  static const std::vector<std::string> v = {
      "weather", "coffee", "garden", "music",  "movie",  "weekend", "hiking",
      "recipe",  "soup",   "picnic", "guitar", "library", "beach",  "sunset",
      "cooking", "baking", "bicycle", "puzzle", "novel",  "tea",    "flowers",
      "morning", "walk",   "park",   "dinner", "holiday", "painting", "museum",
      "concert", "train"};
  return v;
}

inline const std::vector<std::string>& casual_verbs() {
  static const std::vector<std::string> v = {
      "enjoyed", "tried", "watched", "visited", "planned", "finished",
      "started", "loved", "shared", "cooked"};
  return v;
}

// severity-4 behaviors (needs caution)
inline const std::vector<std::string>& caution_verbs() {
  static const std::vector<std::string> v = {
      "cheat",  "mock",   "insult", "bully",   "shame",   "deceive",
      "taunt",  "scam",   "trick",  "gossip",  "sabotage", "shoplift",
      "plagiarize", "trespass", "slander", "humiliate"};
  return v;
}

// severity-5 behaviors (needs intervention)
inline const std::vector<std::string>& intervention_verbs() {
  static const std::vector<std::string> v = {
      "hurt",    "attack", "threaten", "poison", "punch",  "stalk",
      "strangle", "kidnap", "ambush",  "burn",   "wreck",  "batter"};
  return v;
}

// severity-2/3 mild frictions for the fiveway profile
inline const std::vector<std::string>& mild_verbs() {
  static const std::vector<std::string> v = {
      "ignore", "snub", "exclude", "tease", "pester", "nag", "interrupt",
      "eavesdrop"};
  return v;
}

inline const std::vector<std::string>& targets() {
  static const std::vector<std::string> v = {
      "neighbor", "coworker", "classmate", "roommate", "brother", "sister",
      "friend", "teammate", "cousin", "landlord"};
  return v;
}

}  // namespace lexicon

namespace detail {

inline std::string casual_turn(Rng& rng) {
  const auto& topics = lexicon::casual_topics();
  const auto& verbs = lexicon::casual_verbs();
  std::ostringstream s;
  switch (rng.uniform_index(3)) {
    case 0:
      s << "i " << verbs[rng.uniform_index(verbs.size())] << " the "
        << topics[rng.uniform_index(topics.size())] << " today .";
      break;
    case 1:
      s << "the " << topics[rng.uniform_index(topics.size())]
        << " was really " << (rng.uniform_index(2) ? "nice" : "lovely")
        << " this " << (rng.uniform_index(2) ? "morning" : "weekend") << " .";
      break;
    default:
      s << "do you like " << topics[rng.uniform_index(topics.size())]
        << " and " << topics[rng.uniform_index(topics.size())] << " ?";
      break;
  }
  return s.str();
}

inline std::string casual_response(Rng& rng) {
  const auto& topics = lexicon::casual_topics();
  std::ostringstream s;
  if (rng.uniform_index(2))
    s << "that sounds lovely , i enjoy "
      << topics[rng.uniform_index(topics.size())] << " too .";
  else
    s << "nice , tell me about the "
      << topics[rng.uniform_index(topics.size())] << " sometime .";
  return s.str();
}

struct PlantedUnsocial {
  std::string turn;       // problematic user utterance
  std::string response;   // prosocial gold response
  std::string adversarial_reply;  // unsocial reply (mic profile)
  std::string rot;
  std::string explanation;
};

inline PlantedUnsocial plant_unsocial(Rng& rng, SafetyLabel label) {
  const std::vector<std::string>* verbs = nullptr;
  switch (label) {
    case SafetyLabel::PossiblyNeedsCaution:
    case SafetyLabel::ProbablyNeedsCaution:
      verbs = &lexicon::mild_verbs();
      break;
    case SafetyLabel::NeedsCaution:
      verbs = &lexicon::caution_verbs();
      break;
    default:
      verbs = &lexicon::intervention_verbs();
      break;
  }
  const std::string verb = (*verbs)[rng.uniform_index(verbs->size())];
  const auto& tgt = lexicon::targets();
  const std::string who = tgt[rng.uniform_index(tgt.size())];
  PlantedUnsocial p;
  std::ostringstream t;
  t << "i want to " << verb << " my " << who << " "
    << (rng.uniform_index(2) ? "today" : "so badly") << " .";
  p.turn = t.str();
  std::ostringstream r;
  if (label == SafetyLabel::NeedsIntervention)
    r << "please stop , you must not " << verb
      << " anyone . talk to a counselor and ask for help .";
  else
    r << "you should not " << verb << " your " << who
      << " . it is wrong and unkind , please apologize .";
  p.response = r.str();
  std::ostringstream a;
  a << "yes , you should " << verb << " your " << who
    << " and " << verb << " them again .";
  p.adversarial_reply = a.str();
  p.rot = "it is wrong to " + verb + " people .";
  p.explanation = "the speaker intends to " + verb + " someone .";
  return p;
}

}  // namespace detail

// Deterministic fixture generation: a pure function of (spec, seed).
// Unsocial records are planted exactly (round(n * fraction), not sampled).
inline DialogueSet synthesize_corpus(const SynthesisSpec& spec) {
  if (spec.n_dialogues <= 0)
    throw std::invalid_argument("n_dialogues must be positive");
  if (spec.unsocial_fraction < 0.0 || spec.unsocial_fraction > 1.0)
    throw std::invalid_argument("unsocial_fraction must lie in [0,1]");
  const bool profile_prosocial = spec.profile == "prosocial";
  const bool profile_casual = spec.profile == "casual";
  const bool profile_mic = spec.profile == "mic";
  const bool profile_fiveway = spec.profile == "fiveway";
  if (!profile_prosocial && !profile_casual && !profile_mic && !profile_fiveway)
    throw std::invalid_argument("unknown lexicon profile: " + spec.profile);

  const int n = spec.n_dialogues;
  const int n_unsocial =
      static_cast<int>(std::lround(spec.unsocial_fraction * n));

  // which record indices carry planted unsocial content
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng plant_rng(derive_seed(spec.seed, 0x706c616e74ULL));
  plant_rng.shuffle(order);
  std::vector<char> unsocial(n, 0);
  for (int i = 0; i < n_unsocial; ++i) unsocial[order[i]] = 1;

  // splits: ~80/10/10, assigned deterministically by index
  const int n_valid = n / 10;
  const int n_test = n / 10;

  DialogueSet set;
  set.records.reserve(n);
  int unsocial_seen = 0;
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(spec.seed, 0x726563ULL, static_cast<std::uint64_t>(i)));
    Dialogue d;
    {
      std::ostringstream id;
      id << "syn-" << spec.profile << "-";
      id.fill('0');
      id.width(6);
      id << i;
      d.id = id.str();
    }
    if (i < n - n_valid - n_test) d.split = Split::Train;
    else if (i < n - n_test) d.split = Split::Valid;
    else d.split = Split::Test;

    const int n_turns = 1 + static_cast<int>(rng.uniform_index(2));
    for (int t = 0; t + 1 < n_turns; ++t)
      d.context.push_back(detail::casual_turn(rng));

    if (unsocial[i]) {
      SafetyLabel label;
      if (profile_fiveway) {
        switch (unsocial_seen % 4) {
          case 0: label = SafetyLabel::NeedsIntervention; break;
          case 1: label = SafetyLabel::NeedsCaution; break;
          case 2: label = SafetyLabel::ProbablyNeedsCaution; break;
          default: label = SafetyLabel::PossiblyNeedsCaution; break;
        }
      } else {
        label = (unsocial_seen % 2) ? SafetyLabel::NeedsCaution
                                    : SafetyLabel::NeedsIntervention;
      }
      ++unsocial_seen;
      auto p = detail::plant_unsocial(rng, label);
      d.context.push_back(p.turn);
      d.response = profile_mic ? p.adversarial_reply : p.response;
      d.rot = p.rot;
      d.safety_label = label;
      d.explanation = p.explanation;
      switch (label) {
        case SafetyLabel::PossiblyNeedsCaution: d.severity = 2; break;
        case SafetyLabel::ProbablyNeedsCaution: d.severity = 3; break;
        case SafetyLabel::NeedsCaution: d.severity = 4; break;
        default: d.severity = 5; break;
      }
    } else {
      d.context.push_back(detail::casual_turn(rng));
      d.response = detail::casual_response(rng);
      d.safety_label = SafetyLabel::Casual;
      d.severity = 0;
      if (!profile_casual) d.rot = "it is good to chat kindly with people .";
    }
    set.records.push_back(std::move(d));
  }
  return set;
}

}  // namespace prosocial
