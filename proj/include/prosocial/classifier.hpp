#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosocial/corpus.hpp"
#include "prosocial/rng.hpp"
#include "prosocial/text.hpp"

namespace prosocial {

// Hashed bag-of-ngrams logistic regression. The paper's classifiers are
// fine-tuned encoder stacks; this desk-scale substitute exposes the same
// logits interface (Eqs 1-2 consume only logits).

enum class ClfMode { Pair, Single };

constexpr int kFeatureHashVersion = 1;
constexpr int kDefaultFeatureDim = 1 << 16;

// binary classifier class indices
constexpr int kClassSocial = 0;
constexpr int kClassUnsocial = 1;

struct SparseFeature {
  std::uint32_t index;
  double value;
};

using FeatureVec = std::vector<SparseFeature>;  // sorted by index, unique

namespace detail {

constexpr std::uint64_t kUnigramSalt = 0x756e69ULL;
constexpr std::uint64_t kBigramSalt = 0x626967ULL;
constexpr std::int64_t kSepToken = -1;  // never a real token id

inline std::uint64_t hash_gram(std::int64_t a, std::int64_t b,
                               std::uint64_t salt) {
  std::int64_t buf[2] = {a, b};
  return fnv1a64(buf, sizeof(buf), 0xcbf29ce484222325ULL ^ salt);
}

}  // namespace detail

// Hashed unigrams + bigrams of `a <sep> b` (pair) or `a` (single),
// L2-normalized. The hash is fixed and versioned so feature indices are
// stable across platforms.
inline FeatureVec featurize(const TokenSeq& a,
                            const std::optional<TokenSeq>& b,
                            int feature_dim = kDefaultFeatureDim) {
  if (a.empty()) throw std::invalid_argument("featurize: empty input");
  std::vector<std::int64_t> stream(a.begin(), a.end());
  if (b) {
    stream.push_back(detail::kSepToken);
    stream.insert(stream.end(), b->begin(), b->end());
  }
  std::map<std::uint32_t, double> buckets;
  const auto F = static_cast<std::uint64_t>(feature_dim);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    buckets[static_cast<std::uint32_t>(
        detail::hash_gram(stream[i], 0, detail::kUnigramSalt) % F)] += 1.0;
    if (i + 1 < stream.size())
      buckets[static_cast<std::uint32_t>(
          detail::hash_gram(stream[i], stream[i + 1], detail::kBigramSalt) %
          F)] += 1.0;
  }
  double norm = 0.0;
  for (const auto& [idx, v] : buckets) norm += v * v;
  norm = std::sqrt(norm);
  FeatureVec out;
  out.reserve(buckets.size());
  for (const auto& [idx, v] : buckets) out.push_back({idx, v / norm});
  return out;
}

struct ClassifierParams {
  int feature_dim = kDefaultFeatureDim;
  int n_classes = 2;
  ClfMode mode = ClfMode::Single;
  std::vector<double> W;  // feature_dim x n_classes, row-major by feature
  std::vector<double> b;  // n_classes
  std::uint64_t seed = 0;

  void resize() {
    W.assign(static_cast<std::size_t>(feature_dim) * n_classes, 0.0);
    b.assign(n_classes, 0.0);
  }
};

inline std::vector<double> classifier_logits(const ClassifierParams& clf,
                                             const FeatureVec& x) {
  std::vector<double> logits(clf.b);
  for (const auto& f : x) {
    const double* row = &clf.W[static_cast<std::size_t>(f.index) * clf.n_classes];
    for (int c = 0; c < clf.n_classes; ++c) logits[c] += f.value * row[c];
  }
  return logits;
}

inline std::vector<double> softmax(std::vector<double> logits) {
  double mx = logits[0];
  for (double l : logits) mx = std::max(mx, l);
  double sum = 0.0;
  for (auto& l : logits) {
    l = std::exp(l - mx);
    sum += l;
  }
  for (auto& l : logits) l /= sum;
  return logits;
}

struct LabeledExample {
  FeatureVec features;
  int label = 0;
};

// Full-batch multinomial logistic regression. Examples are accumulated in a
// canonical content order, so permuting the training set cannot change the
// result even at the floating-point level.
inline ClassifierParams train_classifier(const std::vector<LabeledExample>& data,
                                         int n_classes, int epochs, double lr,
                                         ClfMode mode,
                                         int feature_dim = kDefaultFeatureDim,
                                         std::uint64_t seed = 0) {
  if (data.empty()) throw std::invalid_argument("train_classifier: no data");
  std::vector<char> seen(n_classes, 0);
  for (const auto& ex : data) {
    if (ex.label < 0 || ex.label >= n_classes)
      throw std::invalid_argument("train_classifier: label out of range");
    seen[ex.label] = 1;
  }
  int distinct = 0;
  for (char c : seen) distinct += c;
  if (distinct < 2)
    throw std::invalid_argument("train_classifier: need >= 2 classes present");

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto fingerprint = [&](std::size_t i) {
    std::uint64_t h = fnv1a64(&data[i].label, sizeof(int));
    for (const auto& f : data[i].features) {
      h = fnv1a64(&f.index, sizeof(f.index), h);
      h = fnv1a64(&f.value, sizeof(f.value), h);
    }
    return h;
  };
  std::vector<std::uint64_t> keys(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) keys[i] = fingerprint(i);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (keys[x] != keys[y]) return keys[x] < keys[y];
    return data[x].label < data[y].label;
  });

  ClassifierParams clf;
  clf.feature_dim = feature_dim;
  clf.n_classes = n_classes;
  clf.mode = mode;
  clf.seed = seed;
  clf.resize();

  const double inv_n = 1.0 / static_cast<double>(data.size());
  std::vector<double> gW, gb;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    gW.assign(clf.W.size(), 0.0);
    gb.assign(clf.b.size(), 0.0);
    for (std::size_t i : order) {
      const auto& ex = data[i];
      auto probs = softmax(classifier_logits(clf, ex.features));
      probs[static_cast<std::size_t>(ex.label)] -= 1.0;
      for (int c = 0; c < n_classes; ++c) gb[c] += probs[c];
      for (const auto& f : ex.features) {
        double* row = &gW[static_cast<std::size_t>(f.index) * n_classes];
        for (int c = 0; c < n_classes; ++c) row[c] += f.value * probs[c];
      }
    }
    for (std::size_t i = 0; i < clf.W.size(); ++i)
      clf.W[i] -= lr * inv_n * gW[i];
    for (std::size_t i = 0; i < clf.b.size(); ++i)
      clf.b[i] -= lr * inv_n * gb[i];
  }
  return clf;
}

struct Logits2 {
  double l_s = 0.0;  // "social"
  double l_u = 0.0;  // "unsocial"
};

inline Logits2 binary_logits(const ClassifierParams& clf, const FeatureVec& x) {
  if (clf.n_classes != 2)
    throw std::invalid_argument("binary classifier required");
  auto l = classifier_logits(clf, x);
  return {l[kClassSocial], l[kClassUnsocial]};
}

// ProsocialScore = exp(l_s) / (exp(l_s) + exp(l_u)), the probability of the
// candidate being "social". Pair mode hashes `reference <sep> candidate`,
// single mode the candidate alone.
inline double prosocial_score(const ClassifierParams& clf,
                              const TokenSeq& candidate,
                              const std::optional<TokenSeq>& reference) {
  if (clf.n_classes != 2)
    throw std::invalid_argument("prosocial_score: classifier must be binary");
  if (clf.mode == ClfMode::Pair && !reference)
    throw std::invalid_argument("prosocial_score: pair mode needs a reference");
  if (clf.mode == ClfMode::Single && reference)
    throw std::invalid_argument("prosocial_score: single mode takes no reference");
  FeatureVec x = clf.mode == ClfMode::Pair
                     ? featurize(*reference, candidate, clf.feature_dim)
                     : featurize(candidate, std::nullopt, clf.feature_dim);
  const auto l = binary_logits(clf, x);
  return 1.0 / (1.0 + std::exp(l.l_u - l.l_s));
}

// Five-class safety prediction; ties resolve toward the more cautious label.
inline std::pair<SafetyLabel, std::vector<double>> classify_safety(
    const ClassifierParams& clf5, const TokenSeq& context,
    const TokenSeq& utterance) {
  if (clf5.n_classes != kNumSafetyLabels)
    throw std::invalid_argument("classify_safety: classifier must have 5 classes");
  FeatureVec x = context.empty()
                     ? featurize(utterance, std::nullopt, clf5.feature_dim)
                     : featurize(context, utterance, clf5.feature_dim);
  auto probs = softmax(classifier_logits(clf5, x));
  int best = 0;
  for (int c = 1; c < kNumSafetyLabels; ++c)
    if (probs[c] >= probs[best]) best = c;  // >= : caution order = index order
  return {static_cast<SafetyLabel>(best), std::move(probs)};
}

// ---------------------------------------------------------------------------
// Fixture training-data builders. Label evidence attaches to the utterance:
// the last context turn carries the record's label, the gold response is a
// social/Casual example.
// ---------------------------------------------------------------------------

// `responses_are_labeled` marks MIC-style corpora where the reply itself is
// the labeled (possibly unsocial) utterance; ProsocialDialog-style gold
// responses are social by construction.
inline std::vector<LabeledExample> make_binary_examples(
    const DialogueSet& corpus, const Vocab& vocab, ClfMode mode,
    bool responses_are_labeled = false,
    int feature_dim = kDefaultFeatureDim) {
  std::vector<LabeledExample> out;
  for (const auto& d : corpus.records) {
    if (!d.safety_label || d.context.empty() || d.response.empty()) continue;
    const TokenSeq last_turn = encode(d.context.back(), vocab);
    const TokenSeq response = encode(d.response, vocab);
    if (last_turn.empty() || response.empty()) continue;
    const int turn_label = *d.safety_label == SafetyLabel::Casual
                               ? kClassSocial
                               : kClassUnsocial;
    const int resp_label =
        (responses_are_labeled && *d.safety_label != SafetyLabel::Casual)
            ? kClassUnsocial
            : kClassSocial;
    if (mode == ClfMode::Pair) {
      out.push_back({featurize(response, last_turn, feature_dim), turn_label});
      out.push_back({featurize(response, response, feature_dim), resp_label});
    } else {
      out.push_back({featurize(last_turn, std::nullopt, feature_dim), turn_label});
      out.push_back({featurize(response, std::nullopt, feature_dim), resp_label});
    }
  }
  return out;
}

inline std::vector<LabeledExample> make_safety_examples(
    const DialogueSet& corpus, const Vocab& vocab,
    int feature_dim = kDefaultFeatureDim) {
  std::vector<LabeledExample> out;
  for (const auto& d : corpus.records) {
    if (!d.safety_label || d.context.empty() || d.response.empty()) continue;
    TokenSeq preceding;
    for (std::size_t i = 0; i + 1 < d.context.size(); ++i) {
      auto ids = encode(d.context[i], vocab);
      preceding.insert(preceding.end(), ids.begin(), ids.end());
    }
    const TokenSeq last_turn = encode(d.context.back(), vocab);
    TokenSeq full_context = preceding;
    full_context.insert(full_context.end(), last_turn.begin(), last_turn.end());
    const TokenSeq response = encode(d.response, vocab);
    if (last_turn.empty() || response.empty()) continue;
    out.push_back({preceding.empty()
                       ? featurize(last_turn, std::nullopt, feature_dim)
                       : featurize(preceding, last_turn, feature_dim),
                   static_cast<int>(*d.safety_label)});
    out.push_back({featurize(full_context, response, feature_dim),
                   static_cast<int>(SafetyLabel::Casual)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

struct ClassifierBundle {
  ClassifierParams params;
  Vocab vocab;
};

inline json classifier_to_json(const ClassifierBundle& b) {
  json j;
  j["format"] = "prosocial-classifier";
  j["version"] = 1;
  j["hash_version"] = kFeatureHashVersion;
  j["mode"] = b.params.mode == ClfMode::Pair ? "pair" : "single";
  j["n_classes"] = b.params.n_classes;
  j["feature_dim"] = b.params.feature_dim;
  j["seed"] = b.params.seed;
  j["vocab"] = b.vocab.id_to_token;
  // store only non-zero rows; hashed weights are sparse after few epochs
  json rows = json::array();
  for (int f = 0; f < b.params.feature_dim; ++f) {
    const double* row = &b.params.W[static_cast<std::size_t>(f) * b.params.n_classes];
    bool nz = false;
    for (int c = 0; c < b.params.n_classes; ++c)
      if (row[c] != 0.0) nz = true;
    if (!nz) continue;
    json r = json::array();
    r.push_back(f);
    for (int c = 0; c < b.params.n_classes; ++c) r.push_back(row[c]);
    rows.push_back(std::move(r));
  }
  j["W"] = std::move(rows);
  j["b"] = b.params.b;
  return j;
}

inline ClassifierBundle classifier_from_json(const json& j) {
  if (j.value("format", "") != "prosocial-classifier")
    throw std::runtime_error("not a classifier checkpoint");
  if (j.value("hash_version", 0) != kFeatureHashVersion)
    throw std::runtime_error("feature hash version mismatch");
  ClassifierBundle b;
  b.params.mode = j.at("mode").get<std::string>() == "pair" ? ClfMode::Pair
                                                            : ClfMode::Single;
  b.params.n_classes = j.at("n_classes").get<int>();
  b.params.feature_dim = j.at("feature_dim").get<int>();
  b.params.seed = j.at("seed").get<std::uint64_t>();
  b.params.resize();
  for (const auto& r : j.at("W")) {
    const int f = r[0].get<int>();
    for (int c = 0; c < b.params.n_classes; ++c)
      b.params.W[static_cast<std::size_t>(f) * b.params.n_classes + c] =
          r[static_cast<std::size_t>(c) + 1].get<double>();
  }
  b.params.b = j.at("b").get<std::vector<double>>();
  for (const auto& t : j.at("vocab")) {
    std::string tok = t.get<std::string>();
    b.vocab.token_to_id[tok] = b.vocab.size();
    b.vocab.id_to_token.push_back(tok);
  }
  return b;
}

inline void save_classifier(const ClassifierBundle& b, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << classifier_to_json(b).dump() << "\n";
}

inline ClassifierBundle load_classifier(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("unreadable file: " + path);
  json j;
  f >> j;
  return classifier_from_json(j);
}

}  // namespace prosocial
