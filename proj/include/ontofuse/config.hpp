#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ontofuse/model.hpp"
#include "ontofuse/trainer.hpp"

namespace ontofuse {

// Independent, composable knobs that remove one mechanism each.
struct AblationSwitches {
  bool disable_ontology_text = false;      // no ontology segments in prompts
  bool disable_visibility_matrix = false;  // everything attends everything
  bool disable_phase1 = false;             // jump straight to full tuning
  bool disable_virtual_tokens = false;     // no trainable tokens around [MASK]
};

struct PromptSettings {
  std::string template_text = "the relation is [MASK]";
  std::string onto_template = "{name:0} : {desc:0}";
  std::string meta_template = "{path}";
  int n_left = 1;
  int n_right = 1;
  bool symmetrize = false;
  bool template_sees_ontology = false;
  std::string span_anchor = "first";  // "first" | "all"
  bool meta_path_segment = false;
  int onto_max_tokens = 24;
};

struct PathSettings {
  std::string vocab;
  std::string ontology;
  std::string dataset;
  std::string corpus;  // plain-text pretraining corpus
  std::string kg_entities;  // kgc only
  std::string kg_relations;  // kgc only
  std::string out_dir = "runs";
  std::string init_checkpoint;  // optional pretrained weights
};

struct ExperimentConfig {
  std::string task = "re";  // "re" | "ee" | "kgc"
  std::vector<std::string> labels;
  std::optional<std::string> negative_label;
  std::vector<std::vector<std::string>> label_words;  // empty: each label names itself
  PathSettings paths;
  ModelConfig model;  // vocab_size 0 means "derive from the vocab file"
  TrainConfig train;
  PretrainConfig pretrain;
  PromptSettings prompt;
  AblationSwitches ablation;
  std::vector<int> k_list = {8};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  int eval_queries = 20;  // kgc ranking queries per seed

  // ConfigError naming the offending dotted field path.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// "a.b.c=value"; the value parses as JSON when possible, else as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Parse file, apply overrides in order, validate. ConfigError on any failure.
ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides);

// Content hash of the canonical serialized config: names the run directory.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ontofuse
