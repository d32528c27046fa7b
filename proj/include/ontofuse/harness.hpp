#pragma once

#include <cstdint>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

#include "ontofuse/config.hpp"
#include "ontofuse/ontology.hpp"
#include "ontofuse/tasks.hpp"
#include "ontofuse/tokenizer.hpp"
#include "ontofuse/trainer.hpp"

namespace ontofuse {

struct ClassificationData {
  std::vector<TaskInstance> pool;
  int n_classes = 0;
};

// JSONL lines {"text","spans":[{"start","end","role","concepts"}],"label"};
// span indices address the tokenized text.
ClassificationData load_classification_data(const std::string& path,
                                            const std::vector<std::string>& labels,
                                            const Vocab& vocab);

struct KgcData {
  KgcCatalog catalog;
  std::vector<KgcTriple> triples;  // the true set
  std::unordered_set<std::string> known_true;
};

// Catalog JSON files plus the triples JSONL; each relation's domain/range is
// the ontology edge sharing its id as label, when one exists.
KgcData load_kgc_data(const PathSettings& paths, const OntologySchema& schema);

// The full instance pipeline: ontology rendering per linked span, optional
// meta-relation segment, assembly, virtual tokens, visibility bias. Ablation
// switches drop their mechanism entirely.
PreparedInstance prepare_instance(const TaskInstance& inst, const OntologySchema& schema,
                                  const Vocab& vocab, const ExperimentConfig& cfg);

Verbalizer make_verbalizer(const ExperimentConfig& cfg, const Vocab& vocab);

// out_dir/<config-hash>; seed runs live in k<k>_seed<seed> beneath it.
std::string run_base_dir(const ExperimentConfig& cfg);
std::string run_seed_dir(const ExperimentConfig& cfg, int k, std::uint64_t seed);

struct TrainSeedReport {
  std::string run_dir;
  PhaseReport phase1;
  PhaseReport phase2;
};

// Trains one (K, seed) cell and writes model.bin, resolved.json,
// phase1_loss.csv, phase2_loss.csv, train_report.json into its run directory.
TrainSeedReport run_train_seed(const ExperimentConfig& cfg, int k, std::uint64_t seed);

// Evaluates the trained cell: {"micro_f1": v} or {"mr": v, "hits@10": v}.
std::map<std::string, double> run_eval_seed(const ExperimentConfig& cfg, int k,
                                            std::uint64_t seed);

// All cells of k_list x seeds.
nlohmann::json run_train(const ExperimentConfig& cfg);

// Aggregates per-seed metrics into one report per K and writes
// metrics_k<K>.json under the base run directory.
nlohmann::json run_eval(const ExperimentConfig& cfg);

// Trains and evaluates the 2x2 grid over {ontology text, visibility matrix}
// at the first K; writes ablation.json under the base config's directory.
nlohmann::json run_ablate(const ExperimentConfig& cfg);

// Masked-LM pretraining over paths.corpus; writes the checkpoint to
// paths.init_checkpoint (or out_dir/pretrained.bin when unset).
PretrainReport run_pretrain(const ExperimentConfig& cfg, std::string* checkpoint_path = nullptr);

// Ready-to-run config for "re" / "ee" / "kgc", pointing at the files the
// synthetic generator writes into dir. Sized so the full ablation grid stays
// in laptop territory; gen-data ships these next to the data.
ExperimentConfig starter_experiment(const std::string& task, const std::string& dir);

// Loads the configured dataset and fully prepares its index-th instance
// (classification) or triple (kgc); entry point of the inspection commands.
PreparedInstance prepare_example(const ExperimentConfig& cfg, int index);

// Human- and machine-readable views used by the inspection commands.
nlohmann::json describe_prompt(const PromptSequence& seq, const Vocab& vocab);

}  // namespace ontofuse
