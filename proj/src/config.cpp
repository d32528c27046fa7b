#include "ontofuse/config.hpp"

#include <fstream>
#include <set>
#include <string>

#include "ontofuse/errors.hpp"
#include "ontofuse/hash.hpp"

namespace ontofuse {
namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
  throw ConfigError(path + ": " + why);
}

void expect_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) bad_field(path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) bad_field(path + "." + key, "unknown field");
  }
}

template <typename T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    bad_field(path + "." + key, e.what());
  }
}

json model_to_json(const ModelConfig& m) {
  return {{"vocab_size", m.vocab_size}, {"n_virtual", m.n_virtual}, {"d_model", m.d_model},
          {"n_layers", m.n_layers},     {"n_heads", m.n_heads},     {"d_ff", m.d_ff},
          {"max_len", m.max_len},       {"dropout", m.dropout},     {"seed", m.seed}};
}

json train_to_json(const TrainConfig& t) {
  return {{"alpha", t.alpha},
          {"beta", t.beta},
          {"phase1_max_steps", t.phase1_max_steps},
          {"phase2_max_steps", t.phase2_max_steps},
          {"patience", t.patience},
          {"eval_every", t.eval_every},
          {"batch_size", t.batch_size},
          {"weight_decay", t.weight_decay},
          {"adam_beta1", t.adam_beta1},
          {"adam_beta2", t.adam_beta2},
          {"adam_eps", t.adam_eps},
          {"seed", t.seed},
          {"grad_clip_norm", t.grad_clip_norm}};
}

json pretrain_to_json(const PretrainConfig& p) {
  return {{"steps", p.steps},
          {"batch_size", p.batch_size},
          {"mask_rate", p.mask_rate},
          {"lr", p.lr},
          {"weight_decay", p.weight_decay},
          {"grad_clip_norm", p.grad_clip_norm},
          {"window", p.window},
          {"heldout_fraction", p.heldout_fraction},
          {"seed", p.seed}};
}

}  // namespace

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["task"] = cfg.task;
  j["labels"] = cfg.labels;
  j["negative_label"] = cfg.negative_label ? json(*cfg.negative_label) : json(nullptr);
  j["label_words"] = cfg.label_words;
  j["paths"] = {{"vocab", cfg.paths.vocab},
                {"ontology", cfg.paths.ontology},
                {"dataset", cfg.paths.dataset},
                {"corpus", cfg.paths.corpus},
                {"kg_entities", cfg.paths.kg_entities},
                {"kg_relations", cfg.paths.kg_relations},
                {"out_dir", cfg.paths.out_dir},
                {"init_checkpoint", cfg.paths.init_checkpoint}};
  j["model"] = model_to_json(cfg.model);
  j["train"] = train_to_json(cfg.train);
  j["pretrain"] = pretrain_to_json(cfg.pretrain);
  j["prompt"] = {{"template_text", cfg.prompt.template_text},
                 {"onto_template", cfg.prompt.onto_template},
                 {"meta_template", cfg.prompt.meta_template},
                 {"n_left", cfg.prompt.n_left},
                 {"n_right", cfg.prompt.n_right},
                 {"symmetrize", cfg.prompt.symmetrize},
                 {"template_sees_ontology", cfg.prompt.template_sees_ontology},
                 {"span_anchor", cfg.prompt.span_anchor},
                 {"meta_path_segment", cfg.prompt.meta_path_segment},
                 {"onto_max_tokens", cfg.prompt.onto_max_tokens}};
  j["ablation"] = {{"disable_ontology_text", cfg.ablation.disable_ontology_text},
                   {"disable_visibility_matrix", cfg.ablation.disable_visibility_matrix},
                   {"disable_phase1", cfg.ablation.disable_phase1},
                   {"disable_virtual_tokens", cfg.ablation.disable_virtual_tokens}};
  j["k_list"] = cfg.k_list;
  j["seeds"] = cfg.seeds;
  j["eval_queries"] = cfg.eval_queries;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  expect_keys(j, "config",
              {"task", "labels", "negative_label", "label_words", "paths", "model", "train",
               "pretrain", "prompt", "ablation", "k_list", "seeds", "eval_queries"});
  read(j, "config", "task", cfg.task);
  read(j, "config", "labels", cfg.labels);
  if (j.contains("negative_label") && !j.at("negative_label").is_null()) {
    std::string neg;
    read(j, "config", "negative_label", neg);
    cfg.negative_label = neg;
  }
  read(j, "config", "label_words", cfg.label_words);
  read(j, "config", "k_list", cfg.k_list);
  read(j, "config", "seeds", cfg.seeds);
  read(j, "config", "eval_queries", cfg.eval_queries);

  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    expect_keys(p, "paths",
                {"vocab", "ontology", "dataset", "corpus", "kg_entities", "kg_relations", "out_dir",
                 "init_checkpoint"});
    read(p, "paths", "vocab", cfg.paths.vocab);
    read(p, "paths", "ontology", cfg.paths.ontology);
    read(p, "paths", "dataset", cfg.paths.dataset);
    read(p, "paths", "corpus", cfg.paths.corpus);
    read(p, "paths", "kg_entities", cfg.paths.kg_entities);
    read(p, "paths", "kg_relations", cfg.paths.kg_relations);
    read(p, "paths", "out_dir", cfg.paths.out_dir);
    read(p, "paths", "init_checkpoint", cfg.paths.init_checkpoint);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    expect_keys(m, "model",
                {"vocab_size", "n_virtual", "d_model", "n_layers", "n_heads", "d_ff", "max_len",
                 "dropout", "seed"});
    read(m, "model", "vocab_size", cfg.model.vocab_size);
    read(m, "model", "n_virtual", cfg.model.n_virtual);
    read(m, "model", "d_model", cfg.model.d_model);
    read(m, "model", "n_layers", cfg.model.n_layers);
    read(m, "model", "n_heads", cfg.model.n_heads);
    read(m, "model", "d_ff", cfg.model.d_ff);
    read(m, "model", "max_len", cfg.model.max_len);
    read(m, "model", "dropout", cfg.model.dropout);
    read(m, "model", "seed", cfg.model.seed);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    expect_keys(t, "train",
                {"alpha", "beta", "phase1_max_steps", "phase2_max_steps", "patience",
                 "eval_every", "batch_size", "weight_decay", "adam_beta1", "adam_beta2",
                 "adam_eps", "seed", "grad_clip_norm"});
    read(t, "train", "alpha", cfg.train.alpha);
    read(t, "train", "beta", cfg.train.beta);
    read(t, "train", "phase1_max_steps", cfg.train.phase1_max_steps);
    read(t, "train", "phase2_max_steps", cfg.train.phase2_max_steps);
    read(t, "train", "patience", cfg.train.patience);
    read(t, "train", "eval_every", cfg.train.eval_every);
    read(t, "train", "batch_size", cfg.train.batch_size);
    read(t, "train", "weight_decay", cfg.train.weight_decay);
    read(t, "train", "adam_beta1", cfg.train.adam_beta1);
    read(t, "train", "adam_beta2", cfg.train.adam_beta2);
    read(t, "train", "adam_eps", cfg.train.adam_eps);
    read(t, "train", "seed", cfg.train.seed);
    read(t, "train", "grad_clip_norm", cfg.train.grad_clip_norm);
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    expect_keys(p, "pretrain",
                {"steps", "batch_size", "mask_rate", "lr", "weight_decay", "grad_clip_norm",
                 "window", "heldout_fraction", "seed"});
    read(p, "pretrain", "steps", cfg.pretrain.steps);
    read(p, "pretrain", "batch_size", cfg.pretrain.batch_size);
    read(p, "pretrain", "mask_rate", cfg.pretrain.mask_rate);
    read(p, "pretrain", "lr", cfg.pretrain.lr);
    read(p, "pretrain", "weight_decay", cfg.pretrain.weight_decay);
    read(p, "pretrain", "grad_clip_norm", cfg.pretrain.grad_clip_norm);
    read(p, "pretrain", "window", cfg.pretrain.window);
    read(p, "pretrain", "heldout_fraction", cfg.pretrain.heldout_fraction);
    read(p, "pretrain", "seed", cfg.pretrain.seed);
  }
  if (j.contains("prompt")) {
    const auto& p = j.at("prompt");
    expect_keys(p, "prompt",
                {"template_text", "onto_template", "meta_template", "n_left", "n_right",
                 "symmetrize", "template_sees_ontology", "span_anchor", "meta_path_segment",
                 "onto_max_tokens"});
    read(p, "prompt", "template_text", cfg.prompt.template_text);
    read(p, "prompt", "onto_template", cfg.prompt.onto_template);
    read(p, "prompt", "meta_template", cfg.prompt.meta_template);
    read(p, "prompt", "n_left", cfg.prompt.n_left);
    read(p, "prompt", "n_right", cfg.prompt.n_right);
    read(p, "prompt", "symmetrize", cfg.prompt.symmetrize);
    read(p, "prompt", "template_sees_ontology", cfg.prompt.template_sees_ontology);
    read(p, "prompt", "span_anchor", cfg.prompt.span_anchor);
    read(p, "prompt", "meta_path_segment", cfg.prompt.meta_path_segment);
    read(p, "prompt", "onto_max_tokens", cfg.prompt.onto_max_tokens);
  }
  if (j.contains("ablation")) {
    const auto& a = j.at("ablation");
    expect_keys(a, "ablation",
                {"disable_ontology_text", "disable_visibility_matrix", "disable_phase1",
                 "disable_virtual_tokens"});
    read(a, "ablation", "disable_ontology_text", cfg.ablation.disable_ontology_text);
    read(a, "ablation", "disable_visibility_matrix", cfg.ablation.disable_visibility_matrix);
    read(a, "ablation", "disable_phase1", cfg.ablation.disable_phase1);
    read(a, "ablation", "disable_virtual_tokens", cfg.ablation.disable_virtual_tokens);
  }
  return cfg;
}

void ExperimentConfig::validate() const {
  if (task != "re" && task != "ee" && task != "kgc") {
    bad_field("task", "must be one of re, ee, kgc (got \"" + task + "\")");
  }
  if (task != "kgc" && labels.size() < 2) bad_field("labels", "need at least 2 classes");
  if (!label_words.empty() && label_words.size() != labels.size()) {
    bad_field("label_words", "must match labels in length when given");
  }
  if (negative_label) {
    bool found = false;
    for (const auto& l : labels) found = found || l == *negative_label;
    if (!found) bad_field("negative_label", "not in labels");
  }
  if (paths.vocab.empty()) bad_field("paths.vocab", "required");
  if (paths.ontology.empty()) bad_field("paths.ontology", "required");
  if (paths.dataset.empty()) bad_field("paths.dataset", "required");
  if (task == "kgc" && (paths.kg_entities.empty() || paths.kg_relations.empty())) {
    bad_field("paths.kg_entities", "kgc needs entity and relation catalogs");
  }
  if (task == "kgc" && labels.size() != 2 && !labels.empty()) {
    bad_field("labels", "kgc scoring is binary: give exactly two labels or none");
  }
  if (task == "kgc" && ablation.disable_visibility_matrix) {
    bad_field("ablation.disable_visibility_matrix", "unsupported for kgc ranking");
  }
  if (paths.out_dir.empty()) bad_field("paths.out_dir", "required");
  if (prompt.onto_max_tokens < 1) bad_field("prompt.onto_max_tokens", "must be > 0");
  if (prompt.n_left < 0 || prompt.n_right < 0) bad_field("prompt.n_left", "must be >= 0");
  if (prompt.span_anchor != "first" && prompt.span_anchor != "all") {
    bad_field("prompt.span_anchor", "must be \"first\" or \"all\"");
  }
  if (prompt.template_text.find("[MASK]") == std::string::npos) {
    bad_field("prompt.template_text", "must contain [MASK]");
  }
  if (k_list.empty()) bad_field("k_list", "need at least one K");
  for (const int k : k_list) {
    if (k < 1) bad_field("k_list", "entries must be >= 1");
  }
  if (seeds.empty()) bad_field("seeds", "need at least one seed");
  if (eval_queries < 1) bad_field("eval_queries", "must be >= 1");
  try {
    train.validate();
  } catch (const ConfigError& e) {
    bad_field("train", e.what());
  }
}

void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like path.to.field=value: " + assignment);
  }
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // unquoted strings are taken literally
  }

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw ConfigError("empty path segment in override: " + assignment);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null()) {
      throw ConfigError(path.substr(0, dot) + ": cannot descend into a non-object");
    }
    start = dot + 1;
  }
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config does not parse as JSON: " + std::string(e.what()));
  }
  for (const auto& o : overrides) apply_override(j, o);
  auto cfg = config_from_json(j);
  cfg.validate();
  return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
  return to_hex(fnv1a(config_to_json(cfg).dump()));
}

}  // namespace ontofuse
