#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "prosocial/corpus.hpp"

namespace prosocial {

using TokenSeq = std::vector<int>;

// Reserved and control tokens occupy fixed ids 0..13 in every vocab.
enum ReservedToken : int {
  kPad = 0,
  kUnk = 1,
  kBos = 2,
  kEos = 3,
  kTokContext = 4,
  kTokResponse = 5,
  kTokRot = 6,
  kTokExplanation = 7,
  kTokObjectiveVoice = 8,
  kTokLexicalOverlap = 9,
  kTokNeedsCaution = 10,
  kTokNeedsIntervention = 11,
  kTokPossiblyNeedsCaution = 12,
  kTokProbablyNeedsCaution = 13,
};

constexpr int kNumReserved = 14;

inline const std::array<std::string, kNumReserved>& reserved_tokens() {
  static const std::array<std::string, kNumReserved> t = {
      "<pad>", "<unk>", "<bos>", "<eos>", "<context>", "<response>", "<rot>",
      "<explanation>", "<objective-voice>", "<lexical-overlap>",
      "<needs_caution>", "<needs_intervention>", "<possibly_needs_caution>",
      "<probably_needs_caution>"};
  return t;
}

// Casual carries no control token (the paper lists only the four
// caution/intervention tokens); returns -1 for it.
inline int control_token_for(SafetyLabel s) {
  switch (s) {
    case SafetyLabel::Casual: return -1;
    case SafetyLabel::PossiblyNeedsCaution: return kTokPossiblyNeedsCaution;
    case SafetyLabel::ProbablyNeedsCaution: return kTokProbablyNeedsCaution;
    case SafetyLabel::NeedsCaution: return kTokNeedsCaution;
    case SafetyLabel::NeedsIntervention: return kTokNeedsIntervention;
  }
  return -1;
}

inline bool is_safety_control_token(int id) {
  return id >= kTokNeedsCaution && id <= kTokProbablyNeedsCaution;
}

inline SafetyLabel safety_label_for_token(int id) {
  switch (id) {
    case kTokNeedsCaution: return SafetyLabel::NeedsCaution;
    case kTokNeedsIntervention: return SafetyLabel::NeedsIntervention;
    case kTokPossiblyNeedsCaution: return SafetyLabel::PossiblyNeedsCaution;
    case kTokProbablyNeedsCaution: return SafetyLabel::ProbablyNeedsCaution;
    default: return SafetyLabel::Casual;
  }
}

struct Vocab {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;

  int size() const { return static_cast<int>(id_to_token.size()); }

  int id(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || id >= size()) return id_to_token[kUnk];
    return id_to_token[static_cast<std::size_t>(id)];
  }

  bool operator==(const Vocab& o) const { return id_to_token == o.id_to_token; }
};

inline Vocab make_reserved_vocab() {
  Vocab v;
  for (const auto& t : reserved_tokens()) {
    v.token_to_id[t] = v.size();
    v.id_to_token.push_back(t);
  }
  return v;
}

// Lowercase, split on whitespace and punctuation boundaries; control-token
// literals pass through whole.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::string s;
  s.reserve(text.size());
  for (char c : text)
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));

  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_word_char = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '\'' ||
           c == '_';
  };
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '<') {
      bool matched = false;
      for (const auto& r : reserved_tokens()) {
        if (s.compare(i, r.size(), r) == 0) {
          out.push_back(r);
          i += r.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < s.size() && is_word_char(s[j])) ++j;
      out.push_back(s.substr(i, j - i));
      i = j;
    } else {
      out.push_back(std::string(1, c));
      ++i;
    }
  }
  return out;
}

inline TokenSeq encode(const std::string& text, const Vocab& vocab) {
  TokenSeq ids;
  for (const auto& t : tokenize(text)) ids.push_back(vocab.id(t));
  return ids;
}

inline std::string decode_tokens(const TokenSeq& ids, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(ids[i]);
  }
  return out;
}

// Deterministic: frequency ties break lexicographically; reserved ids are
// identical across corpora.
inline Vocab build_vocab(const DialogueSet& corpus, int min_count = 1) {
  if (corpus.records.empty())
    throw std::invalid_argument("build_vocab: corpus is empty");
  std::map<std::string, long> counts;
  auto count_text = [&](const std::string& text) {
    for (const auto& t : tokenize(text)) counts[t] += 1;
  };
  for (const auto& d : corpus.records) {
    for (const auto& turn : d.context) count_text(turn);
    count_text(d.response);
    if (d.rot) count_text(*d.rot);
    if (d.explanation) count_text(*d.explanation);
  }
  Vocab v = make_reserved_vocab();
  std::vector<std::pair<std::string, long>> items;
  for (const auto& [tok, c] : counts) {
    if (c < min_count) continue;
    if (v.token_to_id.count(tok)) continue;  // reserved literal in corpus text
    items.emplace_back(tok, c);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, c] : items) {
    (void)c;
    v.token_to_id[tok] = v.size();
    v.id_to_token.push_back(tok);
  }
  return v;
}

inline json vocab_to_json(const Vocab& v) {
  json j;
  j["format"] = "prosocial-vocab";
  j["version"] = 1;
  j["tokens"] = v.id_to_token;
  return j;
}

inline Vocab vocab_from_json(const json& j) {
  if (j.value("format", "") != "prosocial-vocab")
    throw std::runtime_error("not a vocab file");
  Vocab v;
  for (const auto& t : j.at("tokens")) {
    std::string tok = t.get<std::string>();
    v.token_to_id[tok] = v.size();
    v.id_to_token.push_back(tok);
  }
  if (v.size() < kNumReserved) throw std::runtime_error("truncated vocab");
  return v;
}

// The four conditioning modes of the base fine-tuning stage.
enum class ConditioningMode {
  ResponseOnly,            // p(U|H)
  RotAndResponse,          // p(R,U|H)
  ResponseGivenRot,        // p(U|R,H)
  ResponseAndExplanation,  // p(E,U|R,H)
};

inline const char* mode_name(ConditioningMode m) {
  switch (m) {
    case ConditioningMode::ResponseOnly: return "response_only";
    case ConditioningMode::RotAndResponse: return "rot_and_response";
    case ConditioningMode::ResponseGivenRot: return "response_given_rot";
    case ConditioningMode::ResponseAndExplanation:
      return "response_and_explanation";
  }
  return "response_only";
}

inline ConditioningMode parse_mode(const std::string& s) {
  for (auto m : {ConditioningMode::ResponseOnly, ConditioningMode::RotAndResponse,
                 ConditioningMode::ResponseGivenRot,
                 ConditioningMode::ResponseAndExplanation})
    if (s == mode_name(m)) return m;
  throw std::invalid_argument("unknown conditioning mode: " + s);
}

inline bool mode_conditions_on_rot(ConditioningMode m) {
  return m == ConditioningMode::ResponseGivenRot ||
         m == ConditioningMode::ResponseAndExplanation;
}

// `<rot> R` (when conditioned on R) then `<context> H_1 .. H_k`; truncation
// drops oldest context tokens first and keeps the final turn intact when it
// fits.
inline TokenSeq compose_input(ConditioningMode mode,
                              const std::vector<std::string>& context,
                              const std::optional<std::string>& rot,
                              const Vocab& vocab, int max_context_len = 128) {
  TokenSeq prefix;
  if (mode_conditions_on_rot(mode)) {
    if (!rot) throw std::invalid_argument("mode requires an RoT");
    prefix.push_back(kTokRot);
    for (int id : encode(*rot, vocab)) prefix.push_back(id);
  }
  prefix.push_back(kTokContext);

  std::vector<TokenSeq> turns;
  for (const auto& t : context) turns.push_back(encode(t, vocab));

  TokenSeq body;
  {
    // admit turns newest-first until the budget is spent
    const int budget =
        max_context_len - static_cast<int>(prefix.size());
    int used = 0;
    std::size_t first_kept = turns.size();
    for (std::size_t r = turns.size(); r > 0; --r) {
      const int len = static_cast<int>(turns[r - 1].size());
      if (first_kept != turns.size() && used + len > budget) break;
      first_kept = r - 1;
      used += len;
    }
    for (std::size_t t = first_kept; t < turns.size(); ++t)
      body.insert(body.end(), turns[t].begin(), turns[t].end());
    if (static_cast<int>(body.size()) > budget && budget >= 0) {
      // final turn alone exceeds the budget: keep its tail
      body.erase(body.begin(),
                 body.begin() + (static_cast<int>(body.size()) - budget));
    }
  }
  TokenSeq out = prefix;
  out.insert(out.end(), body.begin(), body.end());
  if (static_cast<int>(out.size()) > max_context_len)
    out.erase(out.begin(),
              out.begin() + (static_cast<int>(out.size()) - max_context_len));
  return out;
}

// Target layout: safety control token (Casual: none), mode-specific segments,
// <eos>. RotAndResponse emits `<rot> R <response> U`; ResponseAndExplanation
// emits `<explanation> E <response> U`.
inline TokenSeq compose_target(ConditioningMode mode, const std::string& response,
                               const std::optional<std::string>& rot,
                               const std::optional<std::string>& explanation,
                               SafetyLabel predicted_label, const Vocab& vocab,
                               int max_target_len = 60) {
  if (response.empty()) throw std::invalid_argument("missing response");
  TokenSeq out;
  if (int ct = control_token_for(predicted_label); ct >= 0) out.push_back(ct);
  if (mode == ConditioningMode::RotAndResponse) {
    if (!rot) throw std::invalid_argument("RotAndResponse requires an RoT");
    out.push_back(kTokRot);
    for (int id : encode(*rot, vocab)) out.push_back(id);
  } else if (mode == ConditioningMode::ResponseAndExplanation) {
    if (!explanation)
      throw std::invalid_argument("ResponseAndExplanation requires an explanation");
    out.push_back(kTokExplanation);
    for (int id : encode(*explanation, vocab)) out.push_back(id);
  }
  out.push_back(kTokResponse);
  for (int id : encode(response, vocab)) out.push_back(id);
  if (static_cast<int>(out.size()) > max_target_len - 1)
    out.resize(static_cast<std::size_t>(max_target_len - 1));
  out.push_back(kEos);
  return out;
}

// Splits a leading safety control token off a decoded sequence.
inline std::pair<SafetyLabel, TokenSeq> strip_safety_prefix(const TokenSeq& t) {
  if (!t.empty() && is_safety_control_token(t.front()))
    return {safety_label_for_token(t.front()), TokenSeq(t.begin() + 1, t.end())};
  return {SafetyLabel::Casual, t};
}

inline bool is_framing_token(int id) {
  return id == kPad || id == kBos || id == kEos || id == kTokContext ||
         id == kTokResponse || id == kTokRot || id == kTokExplanation ||
         id == kTokObjectiveVoice || id == kTokLexicalOverlap ||
         is_safety_control_token(id);
}

// Content of a decoded target: the segment after <response> when present,
// otherwise everything that is not framing.
inline TokenSeq extract_response_content(const TokenSeq& t) {
  auto it = std::find(t.begin(), t.end(), static_cast<int>(kTokResponse));
  TokenSeq out;
  auto begin = (it == t.end()) ? t.begin() : it + 1;
  for (auto p = begin; p != t.end(); ++p) {
    if (*p == kEos) break;
    if (is_framing_token(*p)) continue;
    out.push_back(*p);
  }
  return out;
}

}  // namespace prosocial
