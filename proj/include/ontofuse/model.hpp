#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ontofuse/prompt.hpp"
#include "ontofuse/rng.hpp"
#include "ontofuse/types.hpp"

namespace ontofuse {

struct ModelConfig {
  int vocab_size = 0;
  int n_virtual = 0;  // size of the reserved virtual-token block (ids 5..5+n)
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int max_len = 128;
  double dropout = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Which parameter set an update pass may touch. Phase1 is the collective
// training first stage: virtual-token embedding rows and ontology overlay
// rows only; the language-model backbone stays untouched (not even gradient
// accumulation happens for it).
enum class Restrict { All, Phase1 };

// Flat, named view over one parameter tensor and its gradient buffer. Rows of
// the shared token-embedding table are exposed as separate views so the
// phase-1 partition is expressible per tensor.
struct ParamView {
  std::string name;
  Scalar* w = nullptr;
  Scalar* g = nullptr;
  int rows = 0;
  int cols = 0;
  bool phase1 = false;
  bool no_decay = false;

  std::int64_t size() const { return static_cast<std::int64_t>(rows) * cols; }
  Eigen::Map<Matd> value() const { return {w, rows, cols}; }
  Eigen::Map<Matd> grad() const { return {g, rows, cols}; }
};

struct LayerParams {
  Matd wq, wk, wv, wo;
  Vecd bq, bk, bv, bo;
  Vecd ln1g, ln1b, ln2g, ln2b;
  Matd w1, w2;
  Vecd b1, b2;
};

// Pre-norm transformer MLM with weight-tied output head: logits = h E^T + b.
// Ontology token slots read their embeddings from per-segment overlay rows
// (keyed by segment content hash) once materialized.
struct MlmModel {
  ModelConfig cfg;

  Matd tok_emb;  // vocab_size x d_model; rows 5..5+n_virtual are the virtual block
  Matd pos_emb;  // max_len x d_model
  std::vector<LayerParams> layers;
  Vecd lnf_g, lnf_b;
  Vecd out_bias;
  std::map<std::uint64_t, Matd> overlay;

  Matd g_tok_emb, g_pos_emb;
  std::vector<LayerParams> g_layers;
  Vecd g_lnf_g, g_lnf_b, g_out_bias;
  std::map<std::uint64_t, Matd> g_overlay;

  static MlmModel init(const ModelConfig& cfg);

  // Creates overlay rows for every ontology segment of seq that has none yet,
  // copying the current word embeddings of the segment tokens.
  void ensure_overlay(const PromptSequence& seq);

  std::vector<ParamView> params(Restrict restrict_to);
  void zero_grads();
};

// Per-forward cache of everything backward needs.
struct Tape {
  std::vector<int> ids;
  const PromptSequence* seq = nullptr;
  Matd bias;  // empty means no mask (all zero)
  Matd x;     // token + position embeddings, input to layer 0

  struct LayerTape {
    Matd ln1_xhat, ln1_out;
    Vecd ln1_inv;
    Matd q, k, v;
    std::vector<Matd> att;  // per head, post softmax
    Matd cat;
    Matd attn_drop;  // inverted-dropout mask, empty when dropout off
    Matd ln2_xhat, ln2_out;
    Vecd ln2_inv;
    Matd ff_pre, ff_act;
    Matd ff_drop;
  };
  std::vector<LayerTape> layers;
  Matd lnf_xhat;
  Vecd lnf_inv;
  Matd h;  // final hidden states
};

// Runs the encoder, filling the tape; returns tape.h. bias must be L x L or
// empty. seq (optional) routes ontology slots through overlay rows. dropout
// only applies when rate > 0 and rng is given.
const Matd& forward(MlmModel& model, const std::vector<int>& ids, const Matd& bias, Tape& tape,
                    const PromptSequence* seq = nullptr, double dropout_rate = 0.0,
                    Rng* rng = nullptr);

// Vocabulary logits for every position (weight-tied head).
Matd mlm_logits(const MlmModel& model, const Matd& h);
Vecd logits_at(const MlmModel& model, const Matd& h, int pos);

// Convenience wrapper: assemble bias-aware forward and return all logits.
Matd forward_logits(MlmModel& model, const PromptSequence& seq, const Matd& bias);

// Accumulates analytic gradients into the model's g_* buffers given loss
// gradients w.r.t. selected logit rows. Under Restrict::Phase1 the backbone
// buffers are never written, only virtual embedding rows and overlays.
void backward(MlmModel& model, const Tape& tape,
              const std::vector<std::pair<int, Vecd>>& dlogit_rows, Restrict restrict_to);

struct ClassDistribution {
  std::vector<double> scores;  // class id -> verbalizer probability mass
  int predicted = 0;
};

// Full-vocabulary softmax followed by per-class mass summation; ties in the
// argmax go to the smallest class id.
ClassDistribution label_distribution(const Vecd& logits_at_mask, const Verbalizer& verbalizer);

// Negative log of the renormalized gold score, clamped at 1e-12 (increments
// clamp_count when the clamp fires).
double prompt_loss(const ClassDistribution& dist, int gold, long* clamp_count = nullptr);

// d(prompt_loss)/d(logits) over the full vocabulary (nonzero only on
// verbalizer token ids).
Vecd prompt_loss_grad(const Vecd& logits_at_mask, const Verbalizer& verbalizer, int gold);

// Cross entropy against one target token: loss and d/d(logits).
double mlm_loss(const Vecd& logits, int target);
Vecd mlm_loss_grad(const Vecd& logits, int target);

}  // namespace ontofuse
