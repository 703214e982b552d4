#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "prosocial/model.hpp"

namespace prosocial {

enum class BleuSmoothing { None, AddOneForNGreaterOne };

struct BleuConfig {
  int max_n = 4;
  BleuSmoothing smoothing = BleuSmoothing::None;
};

namespace detail {

inline std::map<std::vector<int>, int> ngram_counts(const TokenSeq& s, int n) {
  std::map<std::vector<int>, int> c;
  if (static_cast<int>(s.size()) < n) return c;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    c[std::vector<int>(s.begin() + i, s.begin() + i + n)] += 1;
  return c;
}

}  // namespace detail

// Sentence-level BLEU: geometric mean of clipped n-gram precisions times the
// brevity penalty exp(min(0, 1 - |ref|/|cand|)). Add-one smoothing applies
// to orders n > 1 only, so zero unigram overlap still scores 0.
inline double sentence_bleu(const TokenSeq& candidate, const TokenSeq& reference,
                            const BleuConfig& cfg = {}) {
  if (reference.empty())
    throw std::invalid_argument("sentence_bleu: empty reference");
  if (cfg.max_n < 1 || cfg.max_n > 4)
    throw std::invalid_argument("sentence_bleu: max_n must lie in [1,4]");
  if (candidate.empty()) return 0.0;

  double log_prec_sum = 0.0;
  for (int n = 1; n <= cfg.max_n; ++n) {
    const auto cand = detail::ngram_counts(candidate, n);
    const auto ref = detail::ngram_counts(reference, n);
    long total = 0, clipped = 0;
    for (const auto& [gram, c] : cand) {
      total += c;
      auto it = ref.find(gram);
      if (it != ref.end()) clipped += std::min(c, it->second);
    }
    double p;
    if (cfg.smoothing == BleuSmoothing::AddOneForNGreaterOne && n > 1)
      p = static_cast<double>(clipped + 1) / static_cast<double>(total + 1);
    else
      p = total == 0 ? 0.0
                     : static_cast<double>(clipped) / static_cast<double>(total);
    if (p <= 0.0) return 0.0;
    log_prec_sum += std::log(p);
  }
  const double bp =
      std::exp(std::min(0.0, 1.0 - static_cast<double>(reference.size()) /
                                       static_cast<double>(candidate.size())));
  return bp * std::exp(log_prec_sum / cfg.max_n);
}

// LCS-based F-measure with equal precision/recall weighting.
inline double rouge_l(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) {
    warn("rouge_l: empty input");
    return 0.0;
  }
  const std::size_t n = candidate.size(), m = reference.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (candidate[i - 1] == reference[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = prev[m];
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(n);
  const double r = lcs / static_cast<double>(m);
  return 2.0 * p * r / (p + r);
}

// Multiset unigram overlap, harmonic mean of precision and recall.
inline double unigram_f1(const TokenSeq& candidate, const TokenSeq& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::map<int, int> rc;
  for (int t : reference) rc[t] += 1;
  long overlap = 0;
  for (int t : candidate) {
    auto it = rc.find(t);
    if (it != rc.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / candidate.size();
  const double r = static_cast<double>(overlap) / reference.size();
  return 2.0 * p * r / (p + r);
}

// Cohen's kappa over two equal-length label sequences.
template <typename T>
inline double cohen_kappa(const std::vector<T>& a, const std::vector<T>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("cohen_kappa: length mismatch");
  std::map<T, double> pa, pb;
  double po = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
    if (a[i] == b[i]) po += 1.0;
  }
  const double n = static_cast<double>(a.size());
  po /= n;
  double pe = 0.0;
  for (const auto& [label, ca] : pa) {
    auto it = pb.find(label);
    if (it != pb.end()) pe += (ca / n) * (it->second / n);
  }
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1.0 - pe);
}

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine: dimension mismatch");
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) {
    warn("cosine: zero vector");
    return 0.0;
  }
  return uv / (std::sqrt(uu) * std::sqrt(vv));
}

// exp of mean per-token negative log-likelihood under teacher forcing.
inline double perplexity(const ModelParams& p, const std::vector<SeqPair>& batch) {
  return std::exp(mle_loss_accumulate(p, batch, nullptr).first);
}

// Convenience over a corpus: targets are composed with the record's own
// safety label (Casual when absent).
inline double perplexity(const ModelParams& p, const Vocab& vocab,
                         const DialogueSet& set, ConditioningMode mode,
                         int max_context_len = 128, int max_target_len = 60) {
  if (set.records.empty()) throw std::invalid_argument("perplexity: empty set");
  std::vector<SeqPair> batch;
  for (const auto& d : set.records) {
    SeqPair ex;
    ex.input = compose_input(mode, d.context, d.rot, vocab, max_context_len);
    ex.target = compose_target(mode, d.response, d.rot, d.explanation,
                               d.safety_label.value_or(SafetyLabel::Casual),
                               vocab, max_target_len);
    batch.push_back(std::move(ex));
  }
  return perplexity(p, batch);
}

}  // namespace prosocial
