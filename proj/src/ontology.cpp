#include "ontofuse/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <queue>

#include <json.hpp>

#include "ontofuse/errors.hpp"

namespace ontofuse {

using nlohmann::json;

const Concept& OntologySchema::get(const std::string& id) const {
  auto it = concept_index.find(id);
  if (it == concept_index.end()) throw LookupError("unknown concept: " + id);
  return concepts[static_cast<std::size_t>(it->second)];
}

OntologySchema make_schema(std::vector<Concept> concepts, std::vector<OntoEdge> edges) {
  OntologySchema s;
  s.concepts = std::move(concepts);
  s.edges = std::move(edges);
  for (int i = 0; i < static_cast<int>(s.concepts.size()); ++i) {
    if (!s.concept_index.emplace(s.concepts[static_cast<std::size_t>(i)].id, i).second) {
      throw ValidationError("duplicate concept id: " + s.concepts[static_cast<std::size_t>(i)].id);
    }
  }
  for (const auto& e : s.edges) {
    if (!s.has(e.src)) throw ValidationError("edge src not in concepts: " + e.src);
    if (!s.has(e.dst)) throw ValidationError("edge dst not in concepts: " + e.dst);
  }
  return s;
}

OntologySchema load_ontology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open ontology file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("ontology parse failure in " + path + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("concepts") || !doc["concepts"].is_array()) {
    throw FormatError("ontology file " + path + ": missing `concepts` array");
  }
  std::vector<Concept> concepts;
  for (const auto& c : doc["concepts"]) {
    if (!c.is_object() || !c.contains("id") || !c["id"].is_string()) {
      throw FormatError("ontology file " + path + ": concept entry without string `id`");
    }
    Concept out;
    out.id = c["id"].get<std::string>();
    out.name = c.contains("name") && c["name"].is_string() ? c["name"].get<std::string>() : out.id;
    if (c.contains("description") && c["description"].is_string()) {
      out.description = c["description"].get<std::string>();
    } else {
      out.missing_description = true;
    }
    concepts.push_back(std::move(out));
  }
  std::vector<OntoEdge> edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) throw FormatError("ontology file " + path + ": `edges` not an array");
    for (const auto& e : doc["edges"]) {
      for (const char* key : {"src", "label", "dst"}) {
        if (!e.is_object() || !e.contains(key) || !e[key].is_string()) {
          throw FormatError("ontology file " + path + ": edge entry without string `" +
                            std::string(key) + "`");
        }
      }
      edges.push_back({e["src"].get<std::string>(), e["label"].get<std::string>(),
                       e["dst"].get<std::string>()});
    }
  }
  return make_schema(std::move(concepts), std::move(edges));
}

namespace {

struct Arc {
  int to;
  std::string label;
  bool forward;
};

std::vector<std::vector<Arc>> build_adjacency(const OntologySchema& schema) {
  std::vector<std::vector<Arc>> adj(schema.concepts.size());
  for (const auto& e : schema.edges) {
    const int u = schema.concept_index.at(e.src);
    const int v = schema.concept_index.at(e.dst);
    adj[static_cast<std::size_t>(u)].push_back({v, e.label, true});
    adj[static_cast<std::size_t>(v)].push_back({u, e.label, false});
  }
  return adj;
}

}  // namespace

MetaRelationPath meta_relation_path(const OntologySchema& schema, const std::string& a,
                                    const std::string& b) {
  const int n = static_cast<int>(schema.concepts.size());
  auto ia = schema.concept_index.find(a);
  auto ib = schema.concept_index.find(b);
  if (ia == schema.concept_index.end()) throw LookupError("unknown concept: " + a);
  if (ib == schema.concept_index.end()) throw LookupError("unknown concept: " + b);

  MetaRelationPath out;
  out.from = a;
  out.to = b;
  if (a == b) {
    out.found = true;
    return out;
  }

  const auto adj = build_adjacency(schema);
  const int inf = std::numeric_limits<int>::max();
  std::vector<int> dist(static_cast<std::size_t>(n), inf);  // undirected distance to b
  std::queue<int> q;
  dist[static_cast<std::size_t>(ib->second)] = 0;
  q.push(ib->second);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (const auto& arc : adj[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(arc.to)] == inf) {
        dist[static_cast<std::size_t>(arc.to)] = dist[static_cast<std::size_t>(u)] + 1;
        q.push(arc.to);
      }
    }
  }
  if (dist[static_cast<std::size_t>(ia->second)] == inf) return out;  // found = false

  const int depth = dist[static_cast<std::size_t>(ia->second)];

  // Pass 1: greedy minimal label sequence over sets of equally good states.
  std::vector<std::string> labels;
  std::vector<std::vector<char>> layer(static_cast<std::size_t>(depth) + 1,
                                       std::vector<char>(static_cast<std::size_t>(n), 0));
  layer[0][static_cast<std::size_t>(ia->second)] = 1;
  for (int t = 0; t < depth; ++t) {
    const std::string* best = nullptr;
    for (int u = 0; u < n; ++u) {
      if (!layer[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)]) continue;
      for (const auto& arc : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(arc.to)] != depth - t - 1) continue;
        if (!best || arc.label < *best) best = &arc.label;
      }
    }
    labels.push_back(*best);
    for (int u = 0; u < n; ++u) {
      if (!layer[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)]) continue;
      for (const auto& arc : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(arc.to)] == depth - t - 1 && arc.label == labels.back()) {
          layer[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(arc.to)] = 1;
        }
      }
    }
  }

  // Pass 2: keep only states that can finish the chosen label sequence.
  for (int t = depth - 1; t >= 0; --t) {
    for (int u = 0; u < n; ++u) {
      if (!layer[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)]) continue;
      bool ok = false;
      for (const auto& arc : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(arc.to)] == depth - t - 1 &&
            arc.label == labels[static_cast<std::size_t>(t)] &&
            layer[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(arc.to)]) {
          ok = true;
          break;
        }
      }
      if (!ok) layer[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)] = 0;
    }
  }

  // Pass 3: walk forward picking the smallest next concept id, forward arcs first.
  int cur = ia->second;
  for (int t = 0; t < depth; ++t) {
    const Arc* pick = nullptr;
    for (const auto& arc : adj[static_cast<std::size_t>(cur)]) {
      if (dist[static_cast<std::size_t>(arc.to)] != depth - t - 1) continue;
      if (arc.label != labels[static_cast<std::size_t>(t)]) continue;
      if (!layer[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(arc.to)]) continue;
      if (!pick) {
        pick = &arc;
        continue;
      }
      const auto& cand_id = schema.concepts[static_cast<std::size_t>(arc.to)].id;
      const auto& pick_id = schema.concepts[static_cast<std::size_t>(pick->to)].id;
      if (cand_id < pick_id || (cand_id == pick_id && arc.forward && !pick->forward)) pick = &arc;
    }
    out.hops.push_back(
        {pick->label, schema.concepts[static_cast<std::size_t>(pick->to)].id, pick->forward});
    cur = pick->to;
  }
  out.found = true;
  return out;
}

std::string render_path(const MetaRelationPath& path) {
  if (!path.found) return "";
  std::string out;
  for (std::size_t i = 0; i < path.hops.size(); ++i) {
    if (i) out += " , ";
    out += path.hops[i].label;
  }
  return out;
}

OntologyText render_ontology_text(const OntologySchema& schema,
                                  const std::vector<std::string>& concepts,
                                  const std::optional<MetaRelationPath>& path,
                                  const std::string& tmpl, const Vocab& vocab, int segment_id,
                                  int max_tokens) {
  std::string text;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] != '{') {
      text += tmpl[i++];
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string::npos) throw TemplateError("unterminated placeholder in: " + tmpl);
    const std::string inner = tmpl.substr(i + 1, close - i - 1);
    if (inner == "path") {
      if (!path) throw TemplateError("{path} used without a meta-relation path");
      text += render_path(*path);
    } else if (inner.rfind("name:", 0) == 0 || inner.rfind("desc:", 0) == 0) {
      const bool want_name = inner[0] == 'n';
      std::size_t idx = 0;
      try {
        idx = static_cast<std::size_t>(std::stoul(inner.substr(5)));
      } catch (...) {
        throw TemplateError("bad placeholder index in {" + inner + "}");
      }
      if (idx >= concepts.size()) {
        throw TemplateError("placeholder {" + inner + "} exceeds concept list of size " +
                            std::to_string(concepts.size()));
      }
      const Concept& c = schema.get(concepts[idx]);
      text += want_name ? c.name : c.description;
    } else {
      throw TemplateError("unknown placeholder {" + inner + "}");
    }
    i = close + 1;
  }

  OntologyText out;
  out.source_concepts = concepts;
  out.segment_id = segment_id;
  out.rendered = tokenize(text, vocab);
  if (max_tokens >= 0 && static_cast<int>(out.rendered.size()) > max_tokens) {
    out.rendered.resize(static_cast<std::size_t>(max_tokens));
  }
  return out;
}

}  // namespace ontofuse
