#include "ontofuse/model.hpp"

#include <algorithm>
#include <cmath>

#include "ontofuse/errors.hpp"
#include "ontofuse/hash.hpp"

namespace ontofuse {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInitStd = 0.02;

void fill_normal(Matd& m, Rng& rng, double std) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal(0.0, std);
  }
}

void layer_norm_fwd(const Matd& x, const Vecd& g, const Vecd& b, Matd& xhat, Vecd& inv,
                    Matd& out) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  xhat.resize(n, d);
  inv.resize(n);
  out.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    inv(i) = 1.0 / std::sqrt(var + kLnEps);
    xhat.row(i) = (x.row(i).array() - mu) * inv(i);
    out.row(i) = xhat.row(i).cwiseProduct(g.transpose()) + b.transpose();
  }
}

Matd layer_norm_bwd(const Matd& dy, const Matd& xhat, const Vecd& inv, const Vecd& g, Vecd* gg,
                    Vecd* gb) {
  const Eigen::Index n = dy.rows();
  Matd dx(n, dy.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto dxhat = dy.row(i).cwiseProduct(g.transpose());
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) = inv(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2);
  }
  if (gg) {
    *gg += dy.cwiseProduct(xhat).colwise().sum().transpose();
    *gb += dy.colwise().sum().transpose();
  }
  return dx;
}

Matd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  const double keep = 1.0 - rate;
  Matd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  }
  return m;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size < 5 + n_virtual) throw ConfigError("vocab_size too small for specials + virtual block");
  if (n_virtual < 0) throw ConfigError("n_virtual must be >= 0");
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model must be a positive multiple of n_heads");
  }
  if (n_layers < 2) throw ConfigError("n_layers must be >= 2 for span knowledge to reach the mask");
  if (d_ff <= 0) throw ConfigError("d_ff must be positive");
  if (max_len <= 0) throw ConfigError("max_len must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
}

MlmModel MlmModel::init(const ModelConfig& cfg) {
  cfg.validate();
  MlmModel m;
  m.cfg = cfg;
  Rng rng(cfg.seed);
  const int d = cfg.d_model;

  m.tok_emb.resize(cfg.vocab_size, d);
  fill_normal(m.tok_emb, rng, kInitStd);
  m.pos_emb.resize(cfg.max_len, d);
  fill_normal(m.pos_emb, rng, kInitStd);

  m.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : m.layers) {
    for (Matd* w : {&l.wq, &l.wk, &l.wv, &l.wo}) {
      w->resize(d, d);
      fill_normal(*w, rng, kInitStd);
    }
    l.bq = Vecd::Zero(d);
    l.bk = Vecd::Zero(d);
    l.bv = Vecd::Zero(d);
    l.bo = Vecd::Zero(d);
    l.ln1g = Vecd::Ones(d);
    l.ln1b = Vecd::Zero(d);
    l.ln2g = Vecd::Ones(d);
    l.ln2b = Vecd::Zero(d);
    l.w1.resize(d, cfg.d_ff);
    fill_normal(l.w1, rng, kInitStd);
    l.b1 = Vecd::Zero(cfg.d_ff);
    l.w2.resize(cfg.d_ff, d);
    fill_normal(l.w2, rng, kInitStd);
    l.b2 = Vecd::Zero(d);
  }
  m.lnf_g = Vecd::Ones(d);
  m.lnf_b = Vecd::Zero(d);
  m.out_bias = Vecd::Zero(cfg.vocab_size);

  m.g_tok_emb = Matd::Zero(cfg.vocab_size, d);
  m.g_pos_emb = Matd::Zero(cfg.max_len, d);
  m.g_layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : m.g_layers) {
    for (Matd* w : {&l.wq, &l.wk, &l.wv, &l.wo}) *w = Matd::Zero(d, d);
    for (Vecd* b : {&l.bq, &l.bk, &l.bv, &l.bo, &l.ln1g, &l.ln1b, &l.ln2g, &l.ln2b, &l.b2}) {
      *b = Vecd::Zero(d);
    }
    l.w1 = Matd::Zero(d, cfg.d_ff);
    l.b1 = Vecd::Zero(cfg.d_ff);
    l.w2 = Matd::Zero(cfg.d_ff, d);
  }
  m.g_lnf_g = Vecd::Zero(d);
  m.g_lnf_b = Vecd::Zero(d);
  m.g_out_bias = Vecd::Zero(cfg.vocab_size);
  return m;
}

void MlmModel::ensure_overlay(const PromptSequence& seq) {
  for (int k = 0; k < seq.ontology_segment_count(); ++k) {
    const std::uint64_t h = seq.ontology_hash[static_cast<std::size_t>(k)];
    if (overlay.count(h)) continue;
    const int b = seq.ontology_begin[static_cast<std::size_t>(k)];
    const int len = seq.ontology_len[static_cast<std::size_t>(k)];
    Matd rows(len, cfg.d_model);
    for (int j = 0; j < len; ++j) {
      const int id = seq.tokens[static_cast<std::size_t>(b + j)];
      rows.row(j) = tok_emb.row(id);
    }
    overlay.emplace(h, std::move(rows));
    g_overlay.emplace(h, Matd::Zero(len, cfg.d_model));
  }
}

std::vector<ParamView> MlmModel::params(Restrict restrict_to) {
  std::vector<ParamView> out;
  const int nv = cfg.n_virtual;
  const int d = cfg.d_model;
  auto add = [&](const std::string& name, Scalar* w, Scalar* g, int rows, int cols, bool phase1,
                 bool no_decay) {
    if (rows == 0 || cols == 0) return;
    if (restrict_to == Restrict::Phase1 && !phase1) return;
    out.push_back({name, w, g, rows, cols, phase1, no_decay});
  };
  auto add_vec = [&](const std::string& name, Vecd& w, Vecd& g, bool no_decay) {
    add(name, w.data(), g.data(), 1, static_cast<int>(w.size()), false, no_decay);
  };

  add("emb.tok.special", tok_emb.data(), g_tok_emb.data(), 5, d, false, false);
  add("emb.tok.virtual", tok_emb.data() + 5 * d, g_tok_emb.data() + 5 * d, nv, d, true, true);
  add("emb.tok.word", tok_emb.data() + (5 + nv) * d, g_tok_emb.data() + (5 + nv) * d,
      cfg.vocab_size - 5 - nv, d, false, false);
  add("emb.pos", pos_emb.data(), g_pos_emb.data(), cfg.max_len, d, false, false);
  for (int i = 0; i < cfg.n_layers; ++i) {
    auto& l = layers[static_cast<std::size_t>(i)];
    auto& g = g_layers[static_cast<std::size_t>(i)];
    const std::string p = "layer" + std::to_string(i) + ".";
    add(p + "attn.wq", l.wq.data(), g.wq.data(), d, d, false, false);
    add_vec(p + "attn.bq", l.bq, g.bq, false);
    add(p + "attn.wk", l.wk.data(), g.wk.data(), d, d, false, false);
    add_vec(p + "attn.bk", l.bk, g.bk, false);
    add(p + "attn.wv", l.wv.data(), g.wv.data(), d, d, false, false);
    add_vec(p + "attn.bv", l.bv, g.bv, false);
    add(p + "attn.wo", l.wo.data(), g.wo.data(), d, d, false, false);
    add_vec(p + "attn.bo", l.bo, g.bo, false);
    add_vec(p + "ln1.g", l.ln1g, g.ln1g, true);
    add_vec(p + "ln1.b", l.ln1b, g.ln1b, true);
    add(p + "ffn.w1", l.w1.data(), g.w1.data(), d, cfg.d_ff, false, false);
    add_vec(p + "ffn.b1", l.b1, g.b1, false);
    add(p + "ffn.w2", l.w2.data(), g.w2.data(), cfg.d_ff, d, false, false);
    add_vec(p + "ffn.b2", l.b2, g.b2, false);
    add_vec(p + "ln2.g", l.ln2g, g.ln2g, true);
    add_vec(p + "ln2.b", l.ln2b, g.ln2b, true);
  }
  add_vec("final_ln.g", lnf_g, g_lnf_g, true);
  add_vec("final_ln.b", lnf_b, g_lnf_b, true);
  add_vec("out.bias", out_bias, g_out_bias, false);
  for (auto& [h, w] : overlay) {
    add("overlay." + to_hex(h), w.data(), g_overlay.at(h).data(), static_cast<int>(w.rows()),
        static_cast<int>(w.cols()), true, true);
  }
  return out;
}

void MlmModel::zero_grads() {
  for (const auto& v : params(Restrict::All)) v.grad().setZero();
}

const Matd& forward(MlmModel& model, const std::vector<int>& ids, const Matd& bias, Tape& tape,
                    const PromptSequence* seq, double dropout_rate, Rng* rng) {
  const auto& cfg = model.cfg;
  const int L = static_cast<int>(ids.size());
  if (L == 0) throw ContractViolation("forward on empty sequence");
  if (L > cfg.max_len) {
    throw LengthError("sequence length " + std::to_string(L) + " exceeds max_len " +
                      std::to_string(cfg.max_len));
  }
  if (bias.size() != 0 && (bias.rows() != L || bias.cols() != L)) {
    throw ContractViolation("attention bias shape does not match sequence length");
  }
  for (int id : ids) {
    if (id < 0 || id >= cfg.vocab_size) throw ContractViolation("token id out of vocab range");
  }
  const bool drop = dropout_rate > 0.0 && rng != nullptr;

  tape.ids = ids;
  tape.seq = seq;
  tape.bias = bias;

  const int d = cfg.d_model;
  const int nh = cfg.n_heads;
  const int dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // map positions to (overlay key, row) when the slot has a materialized overlay
  tape.x.resize(L, d);
  std::vector<std::pair<const Matd*, int>> route(static_cast<std::size_t>(L), {nullptr, 0});
  if (seq) {
    for (int k = 0; k < seq->ontology_segment_count(); ++k) {
      auto it = model.overlay.find(seq->ontology_hash[static_cast<std::size_t>(k)]);
      if (it == model.overlay.end()) continue;
      const int b = seq->ontology_begin[static_cast<std::size_t>(k)];
      for (int j = 0; j < seq->ontology_len[static_cast<std::size_t>(k)]; ++j) {
        route[static_cast<std::size_t>(b + j)] = {&it->second, j};
      }
    }
  }
  for (int i = 0; i < L; ++i) {
    if (route[static_cast<std::size_t>(i)].first) {
      tape.x.row(i) = route[static_cast<std::size_t>(i)].first->row(
          route[static_cast<std::size_t>(i)].second);
    } else {
      tape.x.row(i) = model.tok_emb.row(ids[static_cast<std::size_t>(i)]);
    }
    tape.x.row(i) += model.pos_emb.row(i);
  }

  tape.layers.assign(static_cast<std::size_t>(cfg.n_layers), {});
  Matd x = tape.x;
  for (int li = 0; li < cfg.n_layers; ++li) {
    auto& lp = model.layers[static_cast<std::size_t>(li)];
    auto& lt = tape.layers[static_cast<std::size_t>(li)];

    layer_norm_fwd(x, lp.ln1g, lp.ln1b, lt.ln1_xhat, lt.ln1_inv, lt.ln1_out);
    lt.q = lt.ln1_out * lp.wq;
    lt.q.rowwise() += lp.bq.transpose();
    lt.k = lt.ln1_out * lp.wk;
    lt.k.rowwise() += lp.bk.transpose();
    lt.v = lt.ln1_out * lp.wv;
    lt.v.rowwise() += lp.bv.transpose();

    lt.att.resize(static_cast<std::size_t>(nh));
    lt.cat.resize(L, d);
    for (int h = 0; h < nh; ++h) {
      Matd s = lt.q.middleCols(h * dh, dh) * lt.k.middleCols(h * dh, dh).transpose() * scale;
      if (bias.size() != 0) s += bias;
      softmax_rows_inplace(s);
      lt.cat.middleCols(h * dh, dh).noalias() = s * lt.v.middleCols(h * dh, dh);
      lt.att[static_cast<std::size_t>(h)] = std::move(s);
    }
    Matd attn_out = lt.cat * lp.wo;
    attn_out.rowwise() += lp.bo.transpose();
    if (drop) {
      lt.attn_drop = dropout_mask(L, d, dropout_rate, *rng);
      attn_out = attn_out.cwiseProduct(lt.attn_drop);
    }
    Matd res1 = x + attn_out;

    layer_norm_fwd(res1, lp.ln2g, lp.ln2b, lt.ln2_xhat, lt.ln2_inv, lt.ln2_out);
    lt.ff_pre = lt.ln2_out * lp.w1;
    lt.ff_pre.rowwise() += lp.b1.transpose();
    lt.ff_act = lt.ff_pre.unaryExpr([](Scalar z) { return gelu(z); });
    Matd ff_out = lt.ff_act * lp.w2;
    ff_out.rowwise() += lp.b2.transpose();
    if (drop) {
      lt.ff_drop = dropout_mask(L, d, dropout_rate, *rng);
      ff_out = ff_out.cwiseProduct(lt.ff_drop);
    }
    x = res1 + ff_out;
  }
  layer_norm_fwd(x, model.lnf_g, model.lnf_b, tape.lnf_xhat, tape.lnf_inv, tape.h);
  return tape.h;
}

Matd mlm_logits(const MlmModel& model, const Matd& h) {
  Matd logits = h * model.tok_emb.transpose();
  logits.rowwise() += model.out_bias.transpose();
  return logits;
}

Vecd logits_at(const MlmModel& model, const Matd& h, int pos) {
  if (pos < 0 || pos >= h.rows()) throw ContractViolation("logits_at position out of range");
  return model.tok_emb * h.row(pos).transpose() + model.out_bias;
}

Matd forward_logits(MlmModel& model, const PromptSequence& seq, const Matd& bias) {
  Tape tape;
  forward(model, seq.tokens, bias, tape, &seq);
  return mlm_logits(model, tape.h);
}

void backward(MlmModel& model, const Tape& tape,
              const std::vector<std::pair<int, Vecd>>& dlogit_rows, Restrict restrict_to) {
  const auto& cfg = model.cfg;
  const bool full = restrict_to == Restrict::All;
  const int L = static_cast<int>(tape.ids.size());
  const int d = cfg.d_model;
  const int nh = cfg.n_heads;
  const int dh = d / nh;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const int v_lo = 5;
  const int v_hi = 5 + cfg.n_virtual;
  Matd dstream = Matd::Zero(L, d);
  for (const auto& [r, dz] : dlogit_rows) {
    if (r < 0 || r >= L) throw ContractViolation("logit-row gradient out of range");
    if (dz.size() != cfg.vocab_size) throw ContractViolation("logit gradient has wrong width");
    for (int w = 0; w < cfg.vocab_size; ++w) {
      const double dzw = dz(w);
      if (dzw == 0.0) continue;
      dstream.row(r) += dzw * model.tok_emb.row(w);
      // the tied head contributes to embedding rows too; virtual rows keep
      // that contribution even under the phase-1 restriction
      if (full || (w >= v_lo && w < v_hi)) model.g_tok_emb.row(w) += dzw * tape.h.row(r);
      if (full) model.g_out_bias(w) += dzw;
    }
  }

  Matd dx = layer_norm_bwd(dstream, tape.lnf_xhat, tape.lnf_inv, model.lnf_g,
                           full ? &model.g_lnf_g : nullptr, full ? &model.g_lnf_b : nullptr);

  for (int li = cfg.n_layers - 1; li >= 0; --li) {
    auto& lp = model.layers[static_cast<std::size_t>(li)];
    auto& gp = model.g_layers[static_cast<std::size_t>(li)];
    const auto& lt = tape.layers[static_cast<std::size_t>(li)];

    // x_out = res1 + dropout(ffn(ln2(res1)))
    Matd dffout = lt.ff_drop.size() ? dx.cwiseProduct(lt.ff_drop).eval() : dx;
    if (full) {
      gp.w2.noalias() += lt.ff_act.transpose() * dffout;
      gp.b2 += dffout.colwise().sum().transpose();
    }
    Matd dact = dffout * lp.w2.transpose();
    Matd dpre = dact.cwiseProduct(lt.ff_pre.unaryExpr([](Scalar z) { return gelu_grad(z); }));
    if (full) {
      gp.w1.noalias() += lt.ln2_out.transpose() * dpre;
      gp.b1 += dpre.colwise().sum().transpose();
    }
    Matd dln2out = dpre * lp.w1.transpose();
    Matd dres1 = dx + layer_norm_bwd(dln2out, lt.ln2_xhat, lt.ln2_inv, lp.ln2g,
                                     full ? &gp.ln2g : nullptr, full ? &gp.ln2b : nullptr);

    // res1 = x_in + dropout(attn(ln1(x_in)))
    Matd dattn = lt.attn_drop.size() ? dres1.cwiseProduct(lt.attn_drop).eval() : dres1;
    if (full) {
      gp.wo.noalias() += lt.cat.transpose() * dattn;
      gp.bo += dattn.colwise().sum().transpose();
    }
    Matd dcat = dattn * lp.wo.transpose();
    Matd dq(L, d), dk(L, d), dv(L, d);
    for (int h = 0; h < nh; ++h) {
      const Matd& A = lt.att[static_cast<std::size_t>(h)];
      const auto dch = dcat.middleCols(h * dh, dh);
      const auto kh = lt.k.middleCols(h * dh, dh);
      const auto qh = lt.q.middleCols(h * dh, dh);
      const auto vh = lt.v.middleCols(h * dh, dh);
      Matd dA = dch * vh.transpose();
      dv.middleCols(h * dh, dh).noalias() = A.transpose() * dch;
      const Vecd rs = dA.cwiseProduct(A).rowwise().sum();
      Matd dS = A.array() * (dA.array().colwise() - rs.array());
      dq.middleCols(h * dh, dh).noalias() = dS * kh * scale;
      dk.middleCols(h * dh, dh).noalias() = dS.transpose() * qh * scale;
    }
    if (full) {
      gp.wq.noalias() += lt.ln1_out.transpose() * dq;
      gp.bq += dq.colwise().sum().transpose();
      gp.wk.noalias() += lt.ln1_out.transpose() * dk;
      gp.bk += dk.colwise().sum().transpose();
      gp.wv.noalias() += lt.ln1_out.transpose() * dv;
      gp.bv += dv.colwise().sum().transpose();
    }
    Matd dln1out = dq * lp.wq.transpose() + dk * lp.wk.transpose() + dv * lp.wv.transpose();
    dx = dres1 + layer_norm_bwd(dln1out, lt.ln1_xhat, lt.ln1_inv, lp.ln1g,
                                full ? &gp.ln1g : nullptr, full ? &gp.ln1b : nullptr);
  }

  // input embeddings: overlays always train, token rows only when allowed
  std::vector<std::pair<Matd*, int>> route(static_cast<std::size_t>(L), {nullptr, 0});
  if (tape.seq) {
    const auto* seq = tape.seq;
    for (int k = 0; k < seq->ontology_segment_count(); ++k) {
      auto it = model.g_overlay.find(seq->ontology_hash[static_cast<std::size_t>(k)]);
      if (it == model.g_overlay.end()) continue;
      const int b = seq->ontology_begin[static_cast<std::size_t>(k)];
      for (int j = 0; j < seq->ontology_len[static_cast<std::size_t>(k)]; ++j) {
        route[static_cast<std::size_t>(b + j)] = {&it->second, j};
      }
    }
  }
  for (int i = 0; i < L; ++i) {
    if (full) model.g_pos_emb.row(i) += dx.row(i);
    if (route[static_cast<std::size_t>(i)].first) {
      route[static_cast<std::size_t>(i)].first->row(route[static_cast<std::size_t>(i)].second) +=
          dx.row(i);
      continue;
    }
    const int t = tape.ids[static_cast<std::size_t>(i)];
    if (full || (t >= v_lo && t < v_hi)) model.g_tok_emb.row(t) += dx.row(i);
  }
}

ClassDistribution label_distribution(const Vecd& logits_at_mask, const Verbalizer& verbalizer) {
  // Serial reductions, not Eigen's vectorized ones: class scores must be
  // bit-reproducible across SIMD widths.
  const double mx = logits_at_mask.maxCoeff();
  Vecd e(logits_at_mask.size());
  double denom = 0.0;
  for (Eigen::Index i = 0; i < logits_at_mask.size(); ++i) {
    e[i] = exp_floor(logits_at_mask[i] - mx);
    denom += e[i];
  }
  ClassDistribution dist;
  for (const auto& vy : verbalizer.label_tokens) {
    double s = 0.0;
    for (int w : vy) s += e(w) / denom;
    dist.scores.push_back(s);
  }
  dist.predicted = 0;
  for (int y = 1; y < static_cast<int>(dist.scores.size()); ++y) {
    if (dist.scores[static_cast<std::size_t>(y)] >
        dist.scores[static_cast<std::size_t>(dist.predicted)]) {
      dist.predicted = y;
    }
  }
  return dist;
}

double prompt_loss(const ClassDistribution& dist, int gold, long* clamp_count) {
  if (gold < 0 || gold >= static_cast<int>(dist.scores.size())) {
    throw ContractViolation("gold class out of range");
  }
  double total = 0.0;
  for (double s : dist.scores) total += s;
  if (std::isnan(total)) return total;  // bad scores must not hide behind the clamp
  double ratio = total > 0.0 ? dist.scores[static_cast<std::size_t>(gold)] / total : 0.0;
  if (ratio < 1e-12) {
    ratio = 1e-12;
    if (clamp_count) ++*clamp_count;
  }
  return -std::log(ratio);
}

Vecd prompt_loss_grad(const Vecd& logits_at_mask, const Verbalizer& verbalizer, int gold) {
  if (gold < 0 || gold >= verbalizer.num_classes()) {
    throw ContractViolation("gold class out of range");
  }
  const Vecd p = softmax(logits_at_mask);
  double pg = 0.0, ps = 0.0;
  for (int y = 0; y < verbalizer.num_classes(); ++y) {
    for (int w : verbalizer.label_tokens[static_cast<std::size_t>(y)]) {
      ps += p(w);
      if (y == gold) pg += p(w);
    }
  }
  Vecd dz = Vecd::Zero(logits_at_mask.size());
  if (pg < 1e-300) return dz;  // inside the loss clamp: treat as flat
  for (int y = 0; y < verbalizer.num_classes(); ++y) {
    for (int w : verbalizer.label_tokens[static_cast<std::size_t>(y)]) {
      dz(w) = p(w) * (1.0 / ps - (y == gold ? 1.0 / pg : 0.0));
    }
  }
  return dz;
}

double mlm_loss(const Vecd& logits, int target) {
  const Vecd p = softmax(logits);
  return -std::log(std::max(p(target), 1e-300));
}

Vecd mlm_loss_grad(const Vecd& logits, int target) {
  Vecd dz = softmax(logits);
  dz(target) -= 1.0;
  return dz;
}

}  // namespace ontofuse
