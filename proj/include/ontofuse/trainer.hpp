#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ontofuse/model.hpp"

namespace ontofuse {

struct TrainConfig {
  double alpha = 5e-3;       // phase-1 learning rate (virtual + overlay rows)
  double beta = 1e-4;        // phase-2 learning rate (all parameters)
  int phase1_max_steps = 300;
  int phase2_max_steps = 1000;
  int patience = 10;         // early-stop patience, counted in evaluations
  int eval_every = 10;       // steps between dev evaluations
  int batch_size = 8;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  double grad_clip_norm = 1.0;  // 0 disables clipping

  void validate() const;
};

// Adam moment buffers keyed by parameter-view name; views not yet seen are
// allocated lazily at zero.
struct OptimizerState {
  std::map<std::string, std::pair<Vecd, Vecd>> moments;
  long step = 0;
};

// One AdamW step over the given views: global-norm gradient clipping,
// bias-corrected moments, decoupled decay on every view not tagged no_decay.
void adamw_update(const std::vector<ParamView>& views, OptimizerState& state, double lr,
                  const TrainConfig& cfg);

// A prompt ready for the model: assembled sequence, additive attention bias,
// gold class id.
struct PreparedInstance {
  PromptSequence seq;
  Matd bias;
  int gold = -1;
};

struct EvalPoint {
  int step = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct PhaseReport {
  int steps = 0;
  std::vector<EvalPoint> curve;
  std::string stop_reason;
  int best_step = 0;
  double dev_start = 0.0;
  double dev_best = 0.0;
  double dev_end = 0.0;
  long clamp_events = 0;
};

double mean_prompt_loss(MlmModel& model, const std::vector<PreparedInstance>& data,
                        const Verbalizer& vb);

// Phase 1 of collective training: only virtual-token rows and ontology
// overlays move; every backbone tensor is bitwise untouched. Early-stops on
// dev loss (patience evaluations without a new best), restores the best-dev
// parameter snapshot before returning.
PhaseReport train_phase1(MlmModel& model, const std::vector<PreparedInstance>& train,
                         const std::vector<PreparedInstance>& dev, const Verbalizer& vb,
                         const TrainConfig& cfg);

// Phase 2: all parameters at learning rate beta, fresh optimizer state, same
// stopping rule.
PhaseReport train_phase2(MlmModel& model, const std::vector<PreparedInstance>& train,
                         const std::vector<PreparedInstance>& dev, const Verbalizer& vb,
                         const TrainConfig& cfg);

struct PretrainConfig {
  int steps = 200;
  int batch_size = 16;
  double mask_rate = 0.15;
  double lr = 1e-3;
  double weight_decay = 0.0;
  double grad_clip_norm = 1.0;
  int window = 32;            // tokens per training window, [CLS]/[SEP] added on top
  double heldout_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct PretrainReport {
  int steps = 0;
  double heldout_perplexity_start = 0.0;
  double heldout_perplexity = 0.0;
};

// Masked-language-model warmup on a plain token corpus. Deterministic under
// seed; returns held-out masked perplexity before and after.
PretrainReport pretrain_mlm(MlmModel& model, const std::vector<std::vector<int>>& docs,
                            const PretrainConfig& cfg);

}  // namespace ontofuse
