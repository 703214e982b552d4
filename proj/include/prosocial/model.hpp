#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosocial/rng.hpp"
#include "prosocial/text.hpp"

namespace prosocial {

// Tiny encoder-decoder shared by the generator, the adversarial model and
// the RoT model: mean-pooled embedding encoder with a tanh projection, and
// an affine decoder over concat(z, E[prev]).
//
//   z        = tanh(W_enc . meanpool(E[tokens]) + b_enc)
//   logits_v = b_dec_v + sum_i concat(z, E[prev])_i . W_dec[i][v]
struct ModelParams {
  int V = 0;  // vocab size
  int d = 0;  // embedding / encoder dimension
  std::vector<double> E;      // V x d
  std::vector<double> W_enc;  // d x d
  std::vector<double> b_enc;  // d
  std::vector<double> W_dec;  // 2d x V
  std::vector<double> b_dec;  // V

  void resize(int V_, int d_) {
    V = V_;
    d = d_;
    E.assign(static_cast<std::size_t>(V) * d, 0.0);
    W_enc.assign(static_cast<std::size_t>(d) * d, 0.0);
    b_enc.assign(d, 0.0);
    W_dec.assign(static_cast<std::size_t>(2 * d) * V, 0.0);
    b_dec.assign(V, 0.0);
  }

  void zero() {
    std::fill(E.begin(), E.end(), 0.0);
    std::fill(W_enc.begin(), W_enc.end(), 0.0);
    std::fill(b_enc.begin(), b_enc.end(), 0.0);
    std::fill(W_dec.begin(), W_dec.end(), 0.0);
    std::fill(b_dec.begin(), b_dec.end(), 0.0);
  }

  bool same_shape(const ModelParams& o) const { return V == o.V && d == o.d; }

  // flat parameter access, used by the finite-difference checks
  std::vector<std::vector<double>*> tensors() {
    return {&E, &W_enc, &b_enc, &W_dec, &b_dec};
  }
  std::vector<const std::vector<double>*> tensors() const {
    return {&E, &W_enc, &b_enc, &W_dec, &b_dec};
  }
  static const char* tensor_name(std::size_t i) {
    static const char* names[] = {"E", "W_enc", "b_enc", "W_dec", "b_dec"};
    return names[i];
  }
};

using ModelGrads = ModelParams;

// Embeddings ~ U(-0.1, 0.1); the decoder starts at zero so the initial
// next-token distribution is exactly uniform.
inline ModelParams init_params(int V, int d, std::uint64_t seed) {
  if (V < 16) throw std::invalid_argument("init_params: V must be >= 16");
  if (d < 2) throw std::invalid_argument("init_params: d must be >= 2");
  ModelParams p;
  p.resize(V, d);
  Rng rng(derive_seed(seed, 0x696e6974ULL));
  for (auto& x : p.E) x = rng.uniform(-0.1, 0.1);
  for (auto& x : p.W_enc) x = rng.uniform(-0.1, 0.1);
  // b_enc, W_dec, b_dec stay zero
  return p;
}

struct EncodeTrace {
  TokenSeq tokens;          // non-pad tokens actually pooled
  std::vector<double> mean; // d
  std::vector<double> z;    // d
};

inline EncodeTrace encode_context_traced(const ModelParams& p,
                                         const TokenSeq& tokens) {
  EncodeTrace tr;
  for (int t : tokens) {
    if (t == kPad) continue;
    if (t < 0 || t >= p.V) throw std::invalid_argument("token id out of range");
    tr.tokens.push_back(t);
  }
  if (tr.tokens.empty())
    throw std::invalid_argument("encode_context: empty input");
  tr.mean.assign(p.d, 0.0);
  for (int t : tr.tokens) {
    const double* row = &p.E[static_cast<std::size_t>(t) * p.d];
    for (int j = 0; j < p.d; ++j) tr.mean[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(tr.tokens.size());
  for (int j = 0; j < p.d; ++j) tr.mean[j] *= inv;
  tr.z.assign(p.d, 0.0);
  for (int i = 0; i < p.d; ++i) {
    double a = p.b_enc[i];
    const double* row = &p.W_enc[static_cast<std::size_t>(i) * p.d];
    for (int j = 0; j < p.d; ++j) a += row[j] * tr.mean[j];
    tr.z[i] = std::tanh(a);
  }
  return tr;
}

inline std::vector<double> encode_context(const ModelParams& p,
                                          const TokenSeq& tokens) {
  return encode_context_traced(p, tokens).z;
}

// dL/dz -> accumulate into grads (E, W_enc, b_enc).
inline void encode_context_backward(const ModelParams& p, const EncodeTrace& tr,
                                    const std::vector<double>& dz,
                                    ModelGrads& g) {
  std::vector<double> da(p.d);
  for (int i = 0; i < p.d; ++i) da[i] = dz[i] * (1.0 - tr.z[i] * tr.z[i]);
  std::vector<double> dmean(p.d, 0.0);
  for (int i = 0; i < p.d; ++i) {
    const double dai = da[i];
    double* gw = &g.W_enc[static_cast<std::size_t>(i) * p.d];
    const double* w = &p.W_enc[static_cast<std::size_t>(i) * p.d];
    for (int j = 0; j < p.d; ++j) {
      gw[j] += dai * tr.mean[j];
      dmean[j] += w[j] * dai;
    }
    g.b_enc[i] += dai;
  }
  const double inv = 1.0 / static_cast<double>(tr.tokens.size());
  for (int t : tr.tokens) {
    double* ge = &g.E[static_cast<std::size_t>(t) * p.d];
    for (int j = 0; j < p.d; ++j) ge[j] += dmean[j] * inv;
  }
}

// softmax(W_dec . concat(z, E[prev]) + b_dec); rows sum to 1 within 1e-12.
inline std::vector<double> next_token_dist(const ModelParams& p,
                                           const std::vector<double>& z,
                                           int prev) {
  if (prev < 0 || prev >= p.V)
    throw std::invalid_argument("next_token_dist: invalid prev id");
  std::vector<double> logits(p.b_dec);
  for (int i = 0; i < p.d; ++i) {
    const double xi = z[i];
    if (xi == 0.0) continue;
    const double* row = &p.W_dec[static_cast<std::size_t>(i) * p.V];
    for (int v = 0; v < p.V; ++v) logits[v] += xi * row[v];
  }
  const double* emb = &p.E[static_cast<std::size_t>(prev) * p.d];
  for (int i = 0; i < p.d; ++i) {
    const double xi = emb[i];
    if (xi == 0.0) continue;
    const double* row = &p.W_dec[static_cast<std::size_t>(p.d + i) * p.V];
    for (int v = 0; v < p.V; ++v) logits[v] += xi * row[v];
  }
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

// Teacher-forced log-likelihood of target (which must end with <eos>);
// target_{-1} is <bos>.
inline double sequence_log_prob(const ModelParams& p, const TokenSeq& input,
                                const TokenSeq& target) {
  if (target.empty() || target.back() != kEos)
    throw std::invalid_argument("sequence_log_prob: target must end with <eos>");
  const auto z = encode_context(p, input);
  double lp = 0.0;
  int prev = kBos;
  for (int t : target) {
    if (t == kPad) continue;
    const auto probs = next_token_dist(p, z, prev);
    lp += std::log(probs[static_cast<std::size_t>(t)]);
    prev = t;
  }
  return lp;
}

struct SeqPair {
  TokenSeq input;
  TokenSeq target;
};

// Mean per-token negative log-likelihood over the batch, with exact
// analytic gradients accumulated into `g` (scaled by `weight`).
// Returns (loss, token count).
inline std::pair<double, long> mle_loss_accumulate(const ModelParams& p,
                                                   const std::vector<SeqPair>& batch,
                                                   ModelGrads* g,
                                                   double weight = 1.0) {
  if (batch.empty()) throw std::invalid_argument("mle: empty batch");
  long total_tokens = 0;
  for (const auto& ex : batch)
    for (int t : ex.target)
      if (t != kPad) ++total_tokens;
  if (total_tokens == 0) throw std::invalid_argument("mle: no target tokens");

  const double scale = weight / static_cast<double>(total_tokens);
  double nll_sum = 0.0;
  for (const auto& ex : batch) {
    const auto tr = encode_context_traced(p, ex.input);
    std::vector<double> dz(p.d, 0.0);
    int prev = kBos;
    for (int t : ex.target) {
      if (t == kPad) continue;
      const auto probs = next_token_dist(p, tr.z, prev);
      nll_sum -= std::log(probs[static_cast<std::size_t>(t)]);
      if (g) {
        std::vector<double> dlogits(probs);
        dlogits[static_cast<std::size_t>(t)] -= 1.0;
        for (auto& dl : dlogits) dl *= scale;
        for (int v = 0; v < p.V; ++v) g->b_dec[v] += dlogits[v];
        const double* emb = &p.E[static_cast<std::size_t>(prev) * p.d];
        double* gemb = &g->E[static_cast<std::size_t>(prev) * p.d];
        for (int i = 0; i < p.d; ++i) {
          const double zi = tr.z[i];
          const double* row = &p.W_dec[static_cast<std::size_t>(i) * p.V];
          double* grow = &g->W_dec[static_cast<std::size_t>(i) * p.V];
          double dot = 0.0;
          for (int v = 0; v < p.V; ++v) {
            grow[v] += zi * dlogits[v];
            dot += row[v] * dlogits[v];
          }
          dz[i] += dot;
        }
        for (int i = 0; i < p.d; ++i) {
          const double xi = emb[i];
          const double* row = &p.W_dec[static_cast<std::size_t>(p.d + i) * p.V];
          double* grow = &g->W_dec[static_cast<std::size_t>(p.d + i) * p.V];
          double dot = 0.0;
          for (int v = 0; v < p.V; ++v) {
            grow[v] += xi * dlogits[v];
            dot += row[v] * dlogits[v];
          }
          gemb[i] += dot;
        }
      }
      prev = t;
    }
    if (g) encode_context_backward(p, tr, dz, *g);
  }
  return {nll_sum / static_cast<double>(total_tokens), total_tokens};
}

inline std::pair<double, ModelGrads> mle_loss_and_grads(
    const ModelParams& p, const std::vector<SeqPair>& batch) {
  ModelGrads g;
  g.resize(p.V, p.d);
  double loss = mle_loss_accumulate(p, batch, &g).first;
  return {loss, std::move(g)};
}

struct OptimState {
  ModelParams m;  // first moments
  ModelParams v;  // second moments
  long step = 0;
  double lr = 5e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimState for_params(const ModelParams& p, double lr) {
    OptimState s;
    s.m.resize(p.V, p.d);
    s.v.resize(p.V, p.d);
    s.lr = lr;
    return s;
  }
};

// Standard bias-corrected Adam step. Throws on non-finite gradients, naming
// the offending tensor.
inline void adam_update(ModelParams& p, const ModelGrads& g, OptimState& s) {
  if (!p.same_shape(g) || !p.same_shape(s.m))
    throw std::invalid_argument("adam_update: shape mismatch");
  auto pts = p.tensors();
  auto gts = g.tensors();
  auto mts = s.m.tensors();
  auto vts = s.v.tensors();
  for (std::size_t k = 0; k < gts.size(); ++k)
    for (double x : *gts[k])
      if (!std::isfinite(x))
        throw std::runtime_error(std::string("non-finite gradient in ") +
                                 ModelParams::tensor_name(k));
  s.step += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < pts.size(); ++k) {
    auto& theta = *pts[k];
    const auto& grad = *gts[k];
    auto& m = *mts[k];
    auto& v = *vts[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON tensor dump; load(save(p)) == p bit-exactly
// (doubles serialize via shortest round-trip representation).
// ---------------------------------------------------------------------------

struct ModelBundle {
  ModelParams params;
  Vocab vocab;
};

inline json model_to_json(const ModelBundle& b) {
  json j;
  j["format"] = "prosocial-tiny-seq2seq";
  j["version"] = 1;
  j["V"] = b.params.V;
  j["d"] = b.params.d;
  j["vocab"] = b.vocab.id_to_token;
  j["E"] = b.params.E;
  j["W_enc"] = b.params.W_enc;
  j["b_enc"] = b.params.b_enc;
  j["W_dec"] = b.params.W_dec;
  j["b_dec"] = b.params.b_dec;
  return j;
}

inline ModelBundle model_from_json(const json& j) {
  if (j.value("format", "") != "prosocial-tiny-seq2seq")
    throw std::runtime_error("not a model checkpoint");
  ModelBundle b;
  const int V = j.at("V").get<int>();
  const int d = j.at("d").get<int>();
  b.params.resize(V, d);
  b.params.E = j.at("E").get<std::vector<double>>();
  b.params.W_enc = j.at("W_enc").get<std::vector<double>>();
  b.params.b_enc = j.at("b_enc").get<std::vector<double>>();
  b.params.W_dec = j.at("W_dec").get<std::vector<double>>();
  b.params.b_dec = j.at("b_dec").get<std::vector<double>>();
  if (b.params.E.size() != static_cast<std::size_t>(V) * d ||
      b.params.W_dec.size() != static_cast<std::size_t>(2 * d) * V)
    throw std::runtime_error("checkpoint shape header mismatch");
  for (const auto& t : j.at("vocab")) {
    std::string tok = t.get<std::string>();
    b.vocab.token_to_id[tok] = b.vocab.size();
    b.vocab.id_to_token.push_back(tok);
  }
  if (b.vocab.size() != V) throw std::runtime_error("vocab/V mismatch");
  return b;
}

inline void save_model(const ModelBundle& b, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << model_to_json(b).dump() << "\n";
}

inline ModelBundle load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("unreadable file: " + path);
  json j;
  f >> j;
  return model_from_json(j);
}

}  // namespace prosocial
