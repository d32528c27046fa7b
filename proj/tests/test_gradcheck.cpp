#include <cmath>
#include <utility>
#include <vector>

#include "doctest.h"
#include "ontofuse/mask.hpp"
#include "ontofuse/model.hpp"
#include "ontofuse/prompt.hpp"
#include "ontofuse/rng.hpp"

using namespace ontofuse;

namespace {

// Prompt with a mask flanked by the two virtual tokens, two linked ontology
// segments, and a handful of word positions:
//   [CLS] w w w [SEP] v [MASK] v w [SEP] o0 o0 [SEP] o1 [SEP]
PromptSequence grad_seq() {
  PromptSequence seq;
  seq.tokens = {2, 10, 11, 12, 3, 5, 4, 6, 13, 3, 14, 15, 3, 16, 3};
  auto t = Segment{SegmentKind::Template, -1};
  auto in = Segment{SegmentKind::Input, -1};
  seq.segments = {t, in, in, in, t, t, t, t, t, t,
                  {SegmentKind::Ontology, 0}, {SegmentKind::Ontology, 0}, t,
                  {SegmentKind::Ontology, 1}, t};
  seq.mask_pos = 6;
  seq.virtual_positions = {5, 7};
  seq.span_links = {{1, 0}, {3, 1}};
  seq.ontology_begin = {10, 13};
  seq.ontology_len = {2, 1};
  seq.ontology_hash = {111, 222};
  return seq;
}

struct Fixture {
  ModelConfig cfg;
  MlmModel model;
  PromptSequence seq;
  Matd bias;
  Verbalizer vb;
  int gold = 0;
  int tgt_pos = 2;
  int tgt_id = 9;

  Fixture() {
    cfg.vocab_size = 24;
    cfg.n_virtual = 2;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 4;
    cfg.d_ff = 24;
    cfg.max_len = 16;
    cfg.seed = 11;
    model = MlmModel::init(cfg);
    seq = grad_seq();
    model.ensure_overlay(seq);
    bias = to_additive_bias(build_visibility_matrix(seq, false));
    vb.label_tokens = {{20, 21}, {22}};
  }

  double loss() {
    Tape t;
    forward(model, seq.tokens, bias, t, &seq);
    double l = prompt_loss(label_distribution(logits_at(model, t.h, seq.mask_pos), vb), gold);
    l += mlm_loss(logits_at(model, t.h, tgt_pos), tgt_id);
    return l;
  }

  void accumulate(Restrict restrict_to) {
    Tape t;
    forward(model, seq.tokens, bias, t, &seq);
    std::vector<std::pair<int, Vecd>> rows;
    rows.emplace_back(seq.mask_pos,
                      prompt_loss_grad(logits_at(model, t.h, seq.mask_pos), vb, gold));
    rows.emplace_back(tgt_pos, mlm_loss_grad(logits_at(model, t.h, tgt_pos), tgt_id));
    backward(model, t, rows, restrict_to);
  }
};

}  // namespace

TEST_CASE("analytic gradients match central differences on every tensor family") {
  Fixture f;
  f.model.zero_grads();
  f.accumulate(Restrict::All);

  Rng pick(123);
  const double eps = 1e-5;
  long total = 0;
  for (const auto& pv : f.model.params(Restrict::All)) {
    const long n = pv.size();
    const long samples = std::min<long>(n, std::max<long>(4, n / 12));
    for (long s = 0; s < samples; ++s) {
      const long idx = pick.uniform_int(n);
      double* w = pv.w + idx;
      const double orig = *w;
      *w = orig + eps;
      const double lp = f.loss();
      *w = orig - eps;
      const double lm = f.loss();
      *w = orig;
      const double fd = (lp - lm) / (2 * eps);
      const double an = pv.g[idx];
      ++total;
      // floor the denominator: below ~1e-5 the central difference's own
      // roundoff (~f * ulp / eps) makes a pure relative test meaningless
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-5});
      INFO(pv.name << " coordinate " << idx << " analytic " << an << " fd " << fd);
      CHECK(std::abs(fd - an) / denom < 1e-4);
    }
  }
  CHECK(total >= 200);
}

TEST_CASE("phase-1 backward touches no backbone buffer and matches the full pass") {
  Fixture f;
  f.model.zero_grads();
  f.accumulate(Restrict::Phase1);

  // backbone gradients were never written (exact zeros, not small values)
  CHECK(f.model.g_pos_emb.isZero(0.0));
  CHECK(f.model.g_out_bias.isZero(0.0));
  CHECK(f.model.g_lnf_g.isZero(0.0));
  CHECK(f.model.g_lnf_b.isZero(0.0));
  for (const auto& gl : f.model.g_layers) {
    CHECK(gl.wq.isZero(0.0));
    CHECK(gl.wk.isZero(0.0));
    CHECK(gl.wv.isZero(0.0));
    CHECK(gl.wo.isZero(0.0));
    CHECK(gl.w1.isZero(0.0));
    CHECK(gl.w2.isZero(0.0));
    CHECK(gl.ln1g.isZero(0.0));
    CHECK(gl.ln2g.isZero(0.0));
  }
  for (int r = 0; r < f.cfg.vocab_size; ++r) {
    if (r >= 5 && r < 5 + f.cfg.n_virtual) continue;
    CHECK(f.model.g_tok_emb.row(r).isZero(0.0));
  }

  // the phase-1 coordinates themselves carry real gradient
  const Matd virt1 = f.model.g_tok_emb.middleRows(5, f.cfg.n_virtual);
  auto ov1 = f.model.g_overlay;
  CHECK_FALSE(virt1.isZero(0.0));
  CHECK_FALSE(ov1.at(111).isZero(0.0));

  // and agree bitwise with the same coordinates of an unrestricted pass
  f.model.zero_grads();
  f.accumulate(Restrict::All);
  CHECK((f.model.g_tok_emb.middleRows(5, f.cfg.n_virtual).array() == virt1.array()).all());
  for (const auto& [h, g] : ov1) {
    CHECK((f.model.g_overlay.at(h).array() == g.array()).all());
  }
}

TEST_CASE("blocked ontology rows receive zero gradient from positions that cannot attend them") {
  Fixture f;
  f.seq.span_links.clear();  // fully isolated ontology segments
  f.bias = to_additive_bias(build_visibility_matrix(f.seq, false));

  // loss reads only an input-side position
  auto input_loss = [&]() {
    Tape t;
    forward(f.model, f.seq.tokens, f.bias, t, &f.seq);
    return mlm_loss(logits_at(f.model, t.h, f.tgt_pos), f.tgt_id);
  };

  f.model.zero_grads();
  {
    Tape t;
    forward(f.model, f.seq.tokens, f.bias, t, &f.seq);
    std::vector<std::pair<int, Vecd>> rows;
    rows.emplace_back(f.tgt_pos, mlm_loss_grad(logits_at(f.model, t.h, f.tgt_pos), f.tgt_id));
    backward(f.model, t, rows, Restrict::All);
  }
  for (const auto& [h, g] : f.model.g_overlay) {
    CHECK(g.isZero(0.0));
  }

  // finite differences agree: perturbing any overlay coordinate moves nothing
  const double eps = 1e-4;
  const double base = input_loss();
  for (auto& [h, w] : f.model.overlay) {
    for (int i = 0; i < w.rows(); ++i) {
      for (int j = 0; j < w.cols(); j += 5) {
        const double orig = w(i, j);
        w(i, j) = orig + eps;
        const double lp = input_loss();
        w(i, j) = orig - eps;
        const double lm = input_loss();
        w(i, j) = orig;
        CHECK(std::abs(lp - lm) / (2 * eps) < 1e-10);
        CHECK(lp == base);
      }
    }
  }
}

TEST_CASE("gradient accumulation is deterministic") {
  Fixture a, b;
  a.model.zero_grads();
  a.accumulate(Restrict::All);
  b.model.zero_grads();
  b.accumulate(Restrict::All);
  CHECK((a.model.g_tok_emb.array() == b.model.g_tok_emb.array()).all());
  CHECK((a.model.g_layers[1].wq.array() == b.model.g_layers[1].wq.array()).all());
  CHECK((a.model.g_overlay.at(222).array() == b.model.g_overlay.at(222).array()).all());
}
