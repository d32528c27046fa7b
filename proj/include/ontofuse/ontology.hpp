#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ontofuse/tokenizer.hpp"

namespace ontofuse {

struct Concept {
  std::string id;
  std::string name;
  std::string description;
  bool missing_description = false;
};

struct OntoEdge {
  std::string src;
  std::string label;
  std::string dst;
};

// O = {C, E, D}: concepts with names, labeled directed edges, descriptions.
struct OntologySchema {
  std::vector<Concept> concepts;
  std::vector<OntoEdge> edges;
  std::unordered_map<std::string, int> concept_index;

  bool has(const std::string& id) const { return concept_index.count(id) > 0; }
  const Concept& get(const std::string& id) const;
};

struct PathHop {
  std::string label;
  std::string to;       // concept reached by this hop
  bool forward = true;  // false when the edge is traversed dst -> src
};

struct MetaRelationPath {
  std::string from;
  std::string to;
  std::vector<PathHop> hops;
  bool found = false;  // false: endpoints disconnected
};

// Rendered ontology text segment. linked_spans ties the segment to span
// indices of the owning instance; is_meta marks meta-relation-path segments
// (trimmed last under length pressure).
struct OntologyText {
  std::vector<std::string> source_concepts;
  std::vector<int> rendered;
  int segment_id = 0;
  std::vector<int> linked_spans;
  bool is_meta = false;
};

OntologySchema make_schema(std::vector<Concept> concepts, std::vector<OntoEdge> edges);

// JSON file: {"concepts":[{"id","name","description"}], "edges":[{"src","label","dst"}]}.
OntologySchema load_ontology(const std::string& path);

// Shortest undirected path from a to b; ties broken by lexicographically
// smallest edge-label sequence, then smallest node sequence. a == b gives an
// empty found path; disconnected endpoints give found = false.
MetaRelationPath meta_relation_path(const OntologySchema& schema, const std::string& a,
                                    const std::string& b);

// "label1 , label2 , ..." for a found path; empty string otherwise.
std::string render_path(const MetaRelationPath& path);

// Substitutes {name:i}, {desc:i} (empty description renders as empty), and
// {path} into the template, then tokenizes. Result truncated to max_tokens.
OntologyText render_ontology_text(const OntologySchema& schema,
                                  const std::vector<std::string>& concepts,
                                  const std::optional<MetaRelationPath>& path,
                                  const std::string& tmpl, const Vocab& vocab,
                                  int segment_id = 0, int max_tokens = 32);

}  // namespace ontofuse
