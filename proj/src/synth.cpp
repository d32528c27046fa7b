#include "ontofuse/synth.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "ontofuse/errors.hpp"
#include "ontofuse/rng.hpp"

namespace ontofuse {
namespace {

using nlohmann::json;

const char* kTypeMarkers[4] = {"crimson", "amber", "viridian", "cobalt"};
const char* kArgMarkers[3] = {"pearl", "onyx", "jade"};
const char* kEvtMarkers[4] = {"maroon", "teal", "ochre", "indigo"};

std::string type_id(int i) { return "type" + std::to_string(i); }
std::string arg_id(int i) { return "arg" + std::to_string(i); }
std::string evt_id(int i) { return "evt" + std::to_string(i); }

json span_json(int start, int end, const std::string& role, const std::string& concept_id) {
  return json{{"start", start}, {"end", end}, {"role", role}, {"concepts", {concept_id}}};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

}  // namespace

std::vector<std::string> synth_re_labels() { return {"alpha", "beta", "gamma", "delta"}; }
std::vector<std::string> synth_ee_labels() { return {"agent", "theme", "place"}; }

void generate_synthetic_data(const std::string& out_dir, const SynthConfig& cfg) {
  if (cfg.n_re < 4 || cfg.n_ee < 3 || cfg.n_entity_names < 2 || cfg.n_kg_entities < 8 ||
      cfg.n_kg_relations < 1 || cfg.triples_per_relation < 1 || cfg.n_pretrain_docs < 1) {
    throw ConfigError("synthetic corpus sizes too small");
  }
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  Rng rng(cfg.seed);

  // ontology: entity types (RE + KG), argument kinds and event kinds (EE)
  json concepts = json::array();
  for (int i = 0; i < 4; ++i) {
    concepts.push_back({{"id", type_id(i)},
                        {"name", "category" + std::to_string(i)},
                        {"description", std::string("entity of the ") + kTypeMarkers[i] +
                                            " family"}});
  }
  for (int i = 0; i < 3; ++i) {
    concepts.push_back({{"id", arg_id(i)},
                        {"name", "argkind" + std::to_string(i)},
                        {"description", std::string("participant of the ") + kArgMarkers[i] +
                                            " circle"}});
  }
  for (int i = 0; i < 4; ++i) {
    concepts.push_back({{"id", evt_id(i)},
                        {"name", "eventkind" + std::to_string(i)},
                        {"description", std::string("happening of the ") + kEvtMarkers[i] +
                                            " order"}});
  }

  // typed KG relations double as ontology edges between entity-type concepts
  std::vector<int> rel_domain, rel_range;
  json edges = json::array();
  for (int j = 0; j < cfg.n_kg_relations; ++j) {
    rel_domain.push_back(static_cast<int>(rng.uniform_int(4)));
    rel_range.push_back(static_cast<int>(rng.uniform_int(4)));
    edges.push_back({{"src", type_id(rel_domain.back())},
                     {"label", "r" + std::to_string(j)},
                     {"dst", type_id(rel_range.back())}});
  }
  for (int e = 0; e < 4; ++e) {
    edges.push_back({{"src", evt_id(e)}, {"label", "involves"}, {"dst", arg_id(e % 3)}});
  }
  write_file(dir / "ontology.json",
             json{{"concepts", concepts}, {"edges", edges}}.dump(2) + "\n");

  const auto re_labels = synth_re_labels();
  const auto ee_labels = synth_ee_labels();
  auto ent_name = [&](int i) { return "ent" + std::to_string(i); };

  // relation extraction: label c = type of the head concept; names and verbs
  // carry no label information
  std::string re_lines;
  for (int i = 0; i < cfg.n_re; ++i) {
    const int c = i % 4;
    const int d = static_cast<int>(rng.uniform_int(4));
    const auto head = ent_name(static_cast<int>(rng.uniform_int(cfg.n_entity_names)));
    const auto tail = ent_name(static_cast<int>(rng.uniform_int(cfg.n_entity_names)));
    const auto verb = "verb" + std::to_string(rng.uniform_int(4));
    json line = {{"text", head + " " + verb + " " + tail},
                 {"spans",
                  {span_json(0, 1, "head", type_id(c)), span_json(2, 3, "tail", type_id(d))}},
                 {"label", re_labels[static_cast<std::size_t>(c)]}};
    re_lines += line.dump() + "\n";
  }
  write_file(dir / "re.jsonl", re_lines);

  // event-argument classification: the role is the argument's concept kind,
  // the trigger word only reveals the event type
  std::string ee_lines;
  for (int i = 0; i < cfg.n_ee; ++i) {
    const int r = i % 3;
    const int e = static_cast<int>(rng.uniform_int(4));
    const auto arg = ent_name(static_cast<int>(rng.uniform_int(cfg.n_entity_names)));
    const auto trig = "trig" + std::to_string(e);
    json line = {{"text", trig + " touches " + arg},
                 {"spans",
                  {span_json(0, 1, "trigger", evt_id(e)), span_json(2, 3, "argument", arg_id(r))}},
                 {"label", ee_labels[static_cast<std::size_t>(r)]}};
    ee_lines += line.dump() + "\n";
  }
  write_file(dir / "ee.jsonl", ee_lines);

  // knowledge graph: typed entities, triples respect each relation's
  // domain/range, entity descriptions stay type-neutral
  std::vector<int> etype;
  json entities = json::array();
  for (int i = 0; i < cfg.n_kg_entities; ++i) {
    etype.push_back(static_cast<int>(rng.uniform_int(4)));
    entities.push_back({{"id", "E" + std::to_string(i)},
                        {"name", "node" + std::to_string(i)},
                        {"description", "member of the graph"}});
  }
  json relations = json::array();
  for (int j = 0; j < cfg.n_kg_relations; ++j) {
    relations.push_back({{"id", "r" + std::to_string(j)},
                         {"name", "rel" + std::to_string(j)},
                         {"description", "typed relation " + std::to_string(j)}});
  }
  std::string triple_lines;
  for (int j = 0; j < cfg.n_kg_relations; ++j) {
    std::vector<int> heads, tails;
    for (int i = 0; i < cfg.n_kg_entities; ++i) {
      if (etype[static_cast<std::size_t>(i)] == rel_domain[static_cast<std::size_t>(j)]) {
        heads.push_back(i);
      }
      if (etype[static_cast<std::size_t>(i)] == rel_range[static_cast<std::size_t>(j)]) {
        tails.push_back(i);
      }
    }
    std::vector<std::pair<int, int>> pairs;
    for (int h : heads) {
      for (int t : tails) {
        if (h != t) pairs.push_back({h, t});
      }
    }
    rng.shuffle(pairs);
    const auto take = std::min<std::size_t>(pairs.size(),
                                            static_cast<std::size_t>(cfg.triples_per_relation));
    for (std::size_t p = 0; p < take; ++p) {
      json line = {{"h", "E" + std::to_string(pairs[p].first)},
                   {"r", "r" + std::to_string(j)},
                   {"t", "E" + std::to_string(pairs[p].second)}};
      triple_lines += line.dump() + "\n";
    }
  }
  write_file(dir / "kg_triples.jsonl", triple_lines);
  write_file(dir / "kg_entities.json", entities.dump(2) + "\n");
  write_file(dir / "kg_relations.json", relations.dump(2) + "\n");

  // pretraining corpus: coverage lines first (every description, name, label,
  // template and verbalizer word in neutral contexts), then random documents
  std::string corpus;
  for (const auto& c : concepts) {
    corpus += c["name"].get<std::string>() + " : " + c["description"].get<std::string>() + "\n";
  }
  corpus += "alpha beta gamma delta agent theme place yes no true false .\n";
  corpus += "the relation is the role is the claim is .\n";
  {
    std::string line = "involves touches";
    for (int j = 0; j < cfg.n_kg_relations; ++j) line += " rel" + std::to_string(j);
    for (int e = 0; e < 4; ++e) line += " trig" + std::to_string(e);
    for (int v = 0; v < 4; ++v) line += " verb" + std::to_string(v);
    corpus += line + " .\n";
    line.clear();
    for (int i = 0; i < cfg.n_entity_names; ++i) line += ent_name(i) + " ";
    corpus += line + ".\n";
    line.clear();
    for (int i = 0; i < cfg.n_kg_entities; ++i) line += "node" + std::to_string(i) + " ";
    corpus += line + ".\n";
  }
  for (int i = 0; i < cfg.n_pretrain_docs; ++i) {
    std::string doc;
    const int clauses = 3 + static_cast<int>(rng.uniform_int(3));
    for (int s = 0; s < clauses; ++s) {
      switch (rng.uniform_int(3)) {
        case 0:
          doc += ent_name(static_cast<int>(rng.uniform_int(cfg.n_entity_names))) + " verb" +
                 std::to_string(rng.uniform_int(4)) + " " +
                 ent_name(static_cast<int>(rng.uniform_int(cfg.n_entity_names))) + " . ";
          break;
        case 1:
          doc += "node" + std::to_string(rng.uniform_int(cfg.n_kg_entities)) + " rel" +
                 std::to_string(rng.uniform_int(cfg.n_kg_relations)) + " node" +
                 std::to_string(rng.uniform_int(cfg.n_kg_entities)) + " . ";
          break;
        default:
          doc += "trig" + std::to_string(rng.uniform_int(4)) + " touches " +
                 ent_name(static_cast<int>(rng.uniform_int(cfg.n_entity_names))) + " . ";
          break;
      }
    }
    doc.pop_back();
    corpus += doc + "\n";
  }
  write_file(dir / "corpus.txt", corpus);
}

}  // namespace ontofuse
