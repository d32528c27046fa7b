#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ontofuse {

// Controlled synthetic corpora. The classification tasks are built so the
// label is a deterministic function of entity-type concepts that surface only
// in ontology descriptions: the raw text is label-ambiguous by construction
// (entity names and verbs are drawn independently of the label), which makes
// the effect of knowledge injection directly measurable.
struct SynthConfig {
  int n_re = 200;                // relation-extraction instances
  int n_ee = 150;                // event-argument instances
  int n_entity_names = 40;       // surface names shared across types
  int n_kg_entities = 80;        // typed graph nodes (catalog size)
  int n_kg_relations = 8;        // typed relations with domain/range
  int triples_per_relation = 24;
  int n_pretrain_docs = 240;
  std::uint64_t seed = 1;
};

// Writes the full bundle under out_dir:
//   ontology.json             concept/edge schema shared by all tasks
//   corpus.txt                label-neutral pretraining and vocabulary corpus
//   re.jsonl                  {"text","spans":[...],"label"} lines
//   ee.jsonl                  same shape, role-classification labels
//   kg_triples.jsonl          {"h","r","t"} true triples
//   kg_entities.json          [{"id","name","description"}]
//   kg_relations.json         [{"id","name","description"}]
// Identical (config, seed) produce byte-identical files.
void generate_synthetic_data(const std::string& out_dir, const SynthConfig& cfg);

// Label vocabularies for the generated tasks, in class-id order.
std::vector<std::string> synth_re_labels();
std::vector<std::string> synth_ee_labels();

}  // namespace ontofuse
