#include "ontofuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ontofuse/errors.hpp"
#include "ontofuse/rng.hpp"

namespace ontofuse {

void TrainConfig::validate() const {
  // beta = 0 is allowed (a documented no-op phase); negatives are not
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("learning rates must be non-negative");
  if (phase1_max_steps < 0 || phase2_max_steps < 0) throw ConfigError("max steps must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (adam_eps <= 0.0) throw ConfigError("adam_eps must be positive");
  if (grad_clip_norm < 0.0) throw ConfigError("grad_clip_norm must be >= 0 (0 disables)");
}

void adamw_update(const std::vector<ParamView>& views, OptimizerState& state, double lr,
                  const TrainConfig& cfg) {
  double sq = 0.0;
  for (const auto& v : views) sq += Eigen::Map<const Vecd>(v.g, v.size()).squaredNorm();
  const double norm = std::sqrt(sq);
  const double scale =
      (cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm) ? cfg.grad_clip_norm / norm : 1.0;

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));

  for (const auto& v : views) {
    const auto n = v.size();
    auto& [m, s2] = state.moments[v.name];
    if (m.size() == 0) {
      m = Vecd::Zero(n);
      s2 = Vecd::Zero(n);
    } else if (m.size() != n) {
      throw ContractViolation("optimizer moment shape mismatch for " + v.name);
    }
    Eigen::Map<Vecd> w(v.w, n);
    const Vecd g = Eigen::Map<const Vecd>(v.g, n) * scale;
    m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
    s2 = cfg.adam_beta2 * s2 + (1.0 - cfg.adam_beta2) * g.cwiseAbs2();
    Vecd upd = ((m / bc1).array() / ((s2 / bc2).array().sqrt() + cfg.adam_eps)).matrix();
    if (!v.no_decay && cfg.weight_decay > 0.0) upd += cfg.weight_decay * w;
    w -= lr * upd;
  }
}

namespace {

double instance_loss(MlmModel& model, const PreparedInstance& inst, const Verbalizer& vb,
                     long* clamps) {
  Tape tape;
  forward(model, inst.seq.tokens, inst.bias, tape, &inst.seq);
  const Vecd z = logits_at(model, tape.h, inst.seq.mask_pos);
  return prompt_loss(label_distribution(z, vb), inst.gold, clamps);
}

std::vector<Vecd> take_snapshot(const std::vector<ParamView>& views) {
  std::vector<Vecd> snap;
  snap.reserve(views.size());
  for (const auto& v : views) snap.emplace_back(Eigen::Map<const Vecd>(v.w, v.size()));
  return snap;
}

void restore_snapshot(const std::vector<ParamView>& views, const std::vector<Vecd>& snap) {
  for (std::size_t i = 0; i < views.size(); ++i) {
    Eigen::Map<Vecd>(views[i].w, views[i].size()) = snap[i];
  }
}

void check_instances(const std::vector<PreparedInstance>& data, const char* which) {
  for (const auto& inst : data) {
    if (inst.seq.mask_pos < 0 || inst.seq.mask_pos >= inst.seq.size()) {
      throw ContractViolation(std::string(which) + " instance has no mask position");
    }
    if (inst.gold < 0) throw ContractViolation(std::string(which) + " instance is unlabeled");
  }
}

PhaseReport run_phase(MlmModel& model, const std::vector<PreparedInstance>& train,
                      const std::vector<PreparedInstance>& dev, const Verbalizer& vb,
                      const TrainConfig& cfg, Restrict restrict_to, double lr, int max_steps) {
  cfg.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  check_instances(train, "train");
  check_instances(dev, "dev");
  for (const auto& inst : train) model.ensure_overlay(inst.seq);
  const auto views = model.params(restrict_to);

  PhaseReport rep;
  OptimizerState state;
  Rng rng(cfg.seed);
  const bool have_dev = !dev.empty();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto eval_dev = [&] {
    const double l = mean_prompt_loss(model, dev, vb);
    if (!std::isfinite(l)) throw NumericalError("non-finite dev loss");
    return l;
  };

  double best = std::numeric_limits<double>::infinity();
  auto best_snap = take_snapshot(views);
  rep.dev_start = have_dev ? eval_dev() : nan;
  rep.curve.push_back({0, mean_prompt_loss(model, train, vb), rep.dev_start});
  if (have_dev) best = rep.dev_start;

  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t cursor = 0;

  rep.stop_reason = "max_steps";
  int bad = 0;
  for (int step = 1; step <= max_steps; ++step) {
    std::vector<int> batch;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    model.zero_grads();
    double loss_sum = 0.0;
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (int idx : batch) {
      const auto& inst = train[static_cast<std::size_t>(idx)];
      Tape tape;
      forward(model, inst.seq.tokens, inst.bias, tape, &inst.seq, model.cfg.dropout, &rng);
      const Vecd z = logits_at(model, tape.h, inst.seq.mask_pos);
      const double li = prompt_loss(label_distribution(z, vb), inst.gold, &rep.clamp_events);
      if (!std::isfinite(li)) {
        throw NumericalError("non-finite training loss at instance " + std::to_string(idx));
      }
      loss_sum += li;
      std::vector<std::pair<int, Vecd>> rows;
      rows.emplace_back(inst.seq.mask_pos, prompt_loss_grad(z, vb, inst.gold) * inv);
      backward(model, tape, rows, restrict_to);
    }
    adamw_update(views, state, lr, cfg);
    rep.steps = step;

    if (step % cfg.eval_every == 0 || step == max_steps) {
      const double dl = have_dev ? eval_dev() : nan;
      rep.curve.push_back({step, loss_sum * inv, dl});
      if (have_dev) {
        if (dl < best) {
          best = dl;
          rep.best_step = step;
          best_snap = take_snapshot(views);
          bad = 0;
        } else if (++bad >= cfg.patience) {
          rep.stop_reason = "early_stop";
          break;
        }
      }
    }
  }

  if (have_dev) {
    restore_snapshot(views, best_snap);
    rep.dev_best = best;
    rep.dev_end = eval_dev();
  } else {
    rep.dev_best = nan;
    rep.dev_end = nan;
  }
  return rep;
}

}  // namespace

double mean_prompt_loss(MlmModel& model, const std::vector<PreparedInstance>& data,
                        const Verbalizer& vb) {
  if (data.empty()) throw ConfigError("cannot evaluate an empty instance set");
  double s = 0.0;
  for (const auto& inst : data) s += instance_loss(model, inst, vb, nullptr);
  return s / static_cast<double>(data.size());
}

PhaseReport train_phase1(MlmModel& model, const std::vector<PreparedInstance>& train,
                         const std::vector<PreparedInstance>& dev, const Verbalizer& vb,
                         const TrainConfig& cfg) {
  return run_phase(model, train, dev, vb, cfg, Restrict::Phase1, cfg.alpha,
                   cfg.phase1_max_steps);
}

PhaseReport train_phase2(MlmModel& model, const std::vector<PreparedInstance>& train,
                         const std::vector<PreparedInstance>& dev, const Verbalizer& vb,
                         const TrainConfig& cfg) {
  return run_phase(model, train, dev, vb, cfg, Restrict::All, cfg.beta, cfg.phase2_max_steps);
}

namespace {

struct MaskedExample {
  std::vector<int> ids;
  std::vector<std::pair<int, int>> targets;  // (position, original id)
};

// Masks each inner word position independently at mask_rate; guarantees at
// least one target per window.
MaskedExample mask_window(const std::vector<int>& window, double rate, Rng& rng) {
  MaskedExample ex;
  ex.ids = window;
  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(window.size()); ++i) {
    if (window[static_cast<std::size_t>(i)] >= 5) candidates.push_back(i);
  }
  for (int pos : candidates) {
    if (rng.uniform() < rate) {
      ex.targets.emplace_back(pos, ex.ids[static_cast<std::size_t>(pos)]);
      ex.ids[static_cast<std::size_t>(pos)] = 4;  // [MASK]
    }
  }
  if (ex.targets.empty() && !candidates.empty()) {
    const int pos =
        candidates[static_cast<std::size_t>(rng.uniform_int(static_cast<long>(candidates.size())))];
    ex.targets.emplace_back(pos, ex.ids[static_cast<std::size_t>(pos)]);
    ex.ids[static_cast<std::size_t>(pos)] = 4;
  }
  return ex;
}

}  // namespace

PretrainReport pretrain_mlm(MlmModel& model, const std::vector<std::vector<int>>& docs,
                            const PretrainConfig& cfg) {
  if (!(cfg.mask_rate > 0.0 && cfg.mask_rate < 1.0)) {
    throw ConfigError("mask_rate must be in (0, 1)");
  }
  if (cfg.steps < 0) throw ConfigError("pretrain steps must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("pretrain batch_size must be >= 1");
  if (cfg.window < 1) throw ConfigError("pretrain window must be >= 1");
  if (cfg.heldout_fraction <= 0.0 || cfg.heldout_fraction >= 1.0) {
    throw ConfigError("heldout_fraction must be in (0, 1)");
  }

  const int body = std::min(cfg.window, model.cfg.max_len - 2);
  std::vector<std::vector<int>> windows;
  for (const auto& doc : docs) {
    for (std::size_t start = 0; start < doc.size(); start += static_cast<std::size_t>(body)) {
      const std::size_t stop = std::min(doc.size(), start + static_cast<std::size_t>(body));
      std::vector<int> w;
      w.push_back(2);  // [CLS]
      w.insert(w.end(), doc.begin() + static_cast<long>(start), doc.begin() + static_cast<long>(stop));
      w.push_back(3);  // [SEP]
      windows.push_back(std::move(w));
    }
  }
  if (windows.size() < 2) throw ConfigError("pretraining corpus has fewer than two windows");

  const int stride = std::max<int>(2, static_cast<int>(std::llround(1.0 / cfg.heldout_fraction)));
  std::vector<int> train_idx, hold_idx;
  for (int i = 0; i < static_cast<int>(windows.size()); ++i) {
    if (i % stride == stride - 1) {
      hold_idx.push_back(i);
    } else {
      train_idx.push_back(i);
    }
  }
  if (hold_idx.empty()) {
    hold_idx.push_back(train_idx.back());
    train_idx.pop_back();
  }
  if (train_idx.empty()) throw ConfigError("heldout split leaves no training windows");

  // held-out masking is frozen once so both perplexity reads see the same task
  Rng hold_rng(cfg.seed ^ 0x517cc1b727220a95ull);
  std::vector<MaskedExample> heldout;
  for (int i : hold_idx) {
    heldout.push_back(mask_window(windows[static_cast<std::size_t>(i)], cfg.mask_rate, hold_rng));
  }

  auto heldout_loss = [&] {
    double s = 0.0;
    long n = 0;
    for (const auto& ex : heldout) {
      Tape tape;
      forward(model, ex.ids, Matd(), tape);
      for (const auto& [pos, tgt] : ex.targets) {
        s += mlm_loss(logits_at(model, tape.h, pos), tgt);
        ++n;
      }
    }
    return n ? s / static_cast<double>(n) : 0.0;
  };

  PretrainReport rep;
  rep.heldout_perplexity_start = std::exp(heldout_loss());

  TrainConfig opt;  // carries the Adam constants for adamw_update
  opt.weight_decay = cfg.weight_decay;
  opt.grad_clip_norm = cfg.grad_clip_norm;

  OptimizerState state;
  Rng rng(cfg.seed);
  const auto views = model.params(Restrict::All);
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<MaskedExample> batch;
    long total_targets = 0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto pick = train_idx[static_cast<std::size_t>(
          rng.uniform_int(static_cast<long>(train_idx.size())))];
      batch.push_back(mask_window(windows[static_cast<std::size_t>(pick)], cfg.mask_rate, rng));
      total_targets += static_cast<long>(batch.back().targets.size());
    }
    if (total_targets == 0) continue;
    model.zero_grads();
    const double inv = 1.0 / static_cast<double>(total_targets);
    for (const auto& ex : batch) {
      Tape tape;
      forward(model, ex.ids, Matd(), tape, nullptr, model.cfg.dropout, &rng);
      std::vector<std::pair<int, Vecd>> rows;
      for (const auto& [pos, tgt] : ex.targets) {
        const double li = mlm_loss(logits_at(model, tape.h, pos), tgt);
        if (!std::isfinite(li)) throw NumericalError("non-finite pretraining loss");
        rows.emplace_back(pos, mlm_loss_grad(logits_at(model, tape.h, pos), tgt) * inv);
      }
      backward(model, tape, rows, Restrict::All);
    }
    adamw_update(views, state, cfg.lr, opt);
  }
  rep.steps = cfg.steps;
  rep.heldout_perplexity = std::exp(heldout_loss());
  return rep;
}

}  // namespace ontofuse
