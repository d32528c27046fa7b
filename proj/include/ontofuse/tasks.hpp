#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ontofuse/model.hpp"
#include "ontofuse/ontology.hpp"
#include "ontofuse/prompt.hpp"
#include "ontofuse/tokenizer.hpp"

namespace ontofuse {

struct FewShotSplit {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<TaskInstance> train;  // k per class, draw order
  std::vector<TaskInstance> dev;
  std::vector<TaskInstance> test;
  std::vector<int> short_classes;  // classes whose pool had fewer than k
};

// Per-class uniform sampling without replacement; instances not drawn into
// train are shuffled once and split half/half into dev (first) and test.
// Every label must lie in [0, n_classes) and every class must be inhabited.
FewShotSplit few_shot_sample(const std::vector<TaskInstance>& pool, int n_classes, int k,
                             std::uint64_t seed);

// Micro-averaged F1. With a negative class, predictions and golds equal to it
// leave the precision/recall pools (standard relation-extraction scoring);
// without one this reduces to accuracy. Returns 0 when no positives exist on
// either side.
double eval_classification(const std::vector<int>& preds, const std::vector<int>& golds,
                           std::optional<int> negative_class = std::nullopt);

struct KgcEntity {
  std::string id;
  std::string name;
  std::string description;
};

struct KgcRelation {
  std::string id;
  std::string name;
  std::string description;
  std::string domain;  // ontology concept constraining the head
  std::string range;   // ontology concept constraining the tail
};

struct KgcTriple {
  std::string head;
  std::string relation;
  std::string tail;
  bool label = true;  // false: corrupted
};

struct KgcCatalog {
  std::vector<KgcEntity> entities;
  std::vector<KgcRelation> relations;
  std::unordered_map<std::string, int> entity_index;
  std::unordered_map<std::string, int> relation_index;

  const KgcEntity& entity(const std::string& id) const;      // LookupError if absent
  const KgcRelation& relation(const std::string& id) const;  // LookupError if absent
  bool has_entity(const std::string& id) const { return entity_index.count(id) > 0; }
};

KgcCatalog make_kgc_catalog(std::vector<KgcEntity> entities, std::vector<KgcRelation> relations);

// "h|r|t" key for known-true filtering.
std::string triple_key(const std::string& h, const std::string& r, const std::string& t);

struct KgcPromptConfig {
  std::vector<int> template_tokens;  // must contain the mask id
  Verbalizer verbalizer;             // class 0 = corrupted, class 1 = true
  std::string onto_template = "{name:0} : {desc:0}";
  int n_virtual_left = 0;
  int n_virtual_right = 0;
  int max_len = 128;
  int onto_max_tokens = 24;
  bool symmetric_visibility = false;
  bool use_ontology = true;  // off: no domain/range segments are injected
};

// [CLS] head rel tail [SEP] template [SEP] domain-text [SEP] range-text [SEP]
// with virtual tokens around the mask. The head span links the relation's
// domain concept description, the tail span its range concept.
PromptSequence build_triple_prompt(const KgcTriple& triple, const OntologySchema& schema,
                                   const KgcCatalog& catalog, const Vocab& vocab,
                                   const KgcPromptConfig& cfg);

// Probability of the "true" class at the mask, renormalized over the
// verbalizer classes so the class scores always partition to 1.
double score_triple(MlmModel& model, const KgcTriple& triple, const OntologySchema& schema,
                    const KgcCatalog& catalog, const Vocab& vocab, const KgcPromptConfig& cfg);

// 1-based rank of gold_score among competitors, ties counted against gold.
int pessimistic_rank(const std::vector<double>& competitor_scores, double gold_score);

struct RankResult {
  int rank = 0;
  bool hit_at_10 = false;
  int n_candidates = 0;  // after filtering, gold included
};

// Scores every entity substituted into the corrupted slot of `gold`, skipping
// (when filtered) substitutions that reproduce a known-true triple other than
// gold itself.
RankResult rank_candidates(MlmModel& model, const KgcTriple& gold, bool corrupt_tail,
                           const OntologySchema& schema, const KgcCatalog& catalog,
                           const Vocab& vocab, const KgcPromptConfig& cfg,
                           const std::unordered_set<std::string>& known_true, bool filtered = true);

struct RankingSummary {
  double mr = 0.0;
  double hits_at_10 = 0.0;
};

RankingSummary summarize_ranks(const std::vector<int>& ranks);

struct MetricReport {
  std::string task;
  std::string metric;  // "micro_f1" | "mr" | "hits@10"
  std::vector<double> per_seed;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

MetricReport make_metric_report(std::string task, std::string metric,
                                std::vector<double> per_seed);

struct NearestWords {
  int position = 0;  // virtual position within the sequence
  int token_id = 0;
  std::vector<std::pair<int, double>> neighbors;  // (word id, cosine), best first
  bool undefined = false;  // zero-norm virtual embedding: no similarity defined
};

// Cosine neighbors of each virtual token's embedding among ordinary word rows,
// descending similarity, ties toward the smaller token id.
std::vector<NearestWords> nearest_virtual_token_words(const MlmModel& model,
                                                      const PromptSequence& seq, int top_n,
                                                      const Vocab& vocab);

}  // namespace ontofuse
