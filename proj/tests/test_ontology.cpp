#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ontofuse/errors.hpp"
#include "ontofuse/ontology.hpp"
#include "ontofuse/rng.hpp"
#include "ontofuse/tokenizer.hpp"
#include "oracles.hpp"

using namespace ontofuse;

namespace {

OntologySchema chain_schema() {
  return make_schema(
      {{"PERSON", "person", "a named person or family", false},
       {"ORG", "organization", "a company or institution", false},
       {"LOC", "location", "a named place", false}},
      {{"PERSON", "member_of", "ORG"}, {"ORG", "located_in", "LOC"}});
}

std::string write_temp(const std::string& name, const std::string& body) {
  std::ofstream out(name);
  out << body;
  return name;
}

}  // namespace

TEST_CASE("load_ontology reads the documented schema") {
  const auto path = write_temp("onto_ok.json", R"({
    "concepts": [
      {"id": "A", "name": "alpha", "description": "first thing"},
      {"id": "B", "name": "beta"}
    ],
    "edges": [{"src": "A", "label": "rel", "dst": "B"}]
  })");
  const OntologySchema s = load_ontology(path);
  CHECK(s.concepts.size() == 2);
  CHECK(s.edges.size() == 1);
  CHECK(s.get("A").description == "first thing");
  CHECK_FALSE(s.get("A").missing_description);
  CHECK(s.get("B").description.empty());
  CHECK(s.get("B").missing_description);
  std::remove(path.c_str());
}

TEST_CASE("load_ontology rejects malformed input") {
  const auto bad_json = write_temp("onto_bad1.json", "{ not json");
  CHECK_THROWS_AS(load_ontology(bad_json), FormatError);
  std::remove(bad_json.c_str());

  const auto dangling = write_temp("onto_bad2.json", R"({
    "concepts": [{"id": "A", "name": "a", "description": ""}],
    "edges": [{"src": "A", "label": "rel", "dst": "MISSING"}]
  })");
  CHECK_THROWS_AS(load_ontology(dangling), ValidationError);
  std::remove(dangling.c_str());

  const auto dup = write_temp("onto_bad3.json", R"({
    "concepts": [{"id": "A", "name": "a"}, {"id": "A", "name": "a2"}],
    "edges": []
  })");
  CHECK_THROWS_AS(load_ontology(dup), ValidationError);
  std::remove(dup.c_str());

  CHECK_THROWS_AS(load_ontology("no_such_ontology.json"), FormatError);
}

TEST_CASE("meta_relation_path on the person-org-loc chain") {
  const OntologySchema s = chain_schema();
  const MetaRelationPath p = meta_relation_path(s, "PERSON", "LOC");
  REQUIRE(p.found);
  REQUIRE(p.hops.size() == 2);
  CHECK(p.hops[0].label == "member_of");
  CHECK(p.hops[0].to == "ORG");
  CHECK(p.hops[1].label == "located_in");
  CHECK(p.hops[1].to == "LOC");
  CHECK(render_path(p) == "member_of , located_in");
}

TEST_CASE("meta_relation_path identity and disconnection") {
  auto s = make_schema({{"A", "a", "", false}, {"B", "b", "", false}}, {});
  const MetaRelationPath same = meta_relation_path(s, "A", "A");
  CHECK(same.found);
  CHECK(same.hops.empty());
  const MetaRelationPath none = meta_relation_path(s, "A", "B");
  CHECK_FALSE(none.found);
  CHECK(render_path(none).empty());
  CHECK_THROWS_AS(meta_relation_path(s, "A", "ZZZ"), LookupError);
}

TEST_CASE("meta_relation_path prefers the lexicographically smallest label sequence") {
  // two 2-hop routes A-B-D (labels x, a) and A-C-D (labels a, z): the minimal
  // sequence is [a, z], even though [x, a] starts from an edge listed first
  const auto s = make_schema(
      {{"A", "a", "", false}, {"B", "b", "", false}, {"C", "c", "", false}, {"D", "d", "", false}},
      {{"A", "x", "B"}, {"B", "a", "D"}, {"A", "a", "C"}, {"C", "z", "D"}});
  const MetaRelationPath p = meta_relation_path(s, "A", "D");
  REQUIRE(p.found);
  REQUIRE(p.hops.size() == 2);
  CHECK(p.hops[0].label == "a");
  CHECK(p.hops[1].label == "z");
}

TEST_CASE("meta_relation_path matches exhaustive enumeration on random graphs") {
  Rng rng(20260815);
  const std::vector<std::string> labels = {"r0", "r1", "r2", "r3"};
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 2 + rng.uniform_int(7);  // 2..8 nodes
    std::vector<Concept> concepts;
    for (int i = 0; i < n; ++i) {
      concepts.push_back({"c" + std::to_string(i), "c" + std::to_string(i), "", false});
    }
    std::vector<OntoEdge> edges;
    std::vector<oracles::UEdge> uedges;
    const int m = rng.uniform_int(2 * n + 1);
    for (int e = 0; e < m; ++e) {
      const int u = rng.uniform_int(n);
      const int v = rng.uniform_int(n);
      if (u == v) continue;
      const auto& lab = labels[static_cast<std::size_t>(rng.uniform_int(4))];
      edges.push_back({"c" + std::to_string(u), lab, "c" + std::to_string(v)});
      uedges.push_back({u, v, lab});
    }
    const auto s = make_schema(concepts, edges);
    const int a = rng.uniform_int(n);
    const int b = rng.uniform_int(n);
    const auto want = oracles::best_path_labels(n, uedges, a, b);
    const auto got = meta_relation_path(s, "c" + std::to_string(a), "c" + std::to_string(b));
    if (!want) {
      CHECK_FALSE(got.found);
      continue;
    }
    REQUIRE(got.found);
    std::vector<std::string> got_labels;
    for (const auto& h : got.hops) got_labels.push_back(h.label);
    CHECK(got_labels == *want);
  }
}

TEST_CASE("render_ontology_text substitutes names, descriptions, and paths") {
  const OntologySchema s = chain_schema();
  const Vocab v = build_vocab(
      {"person : a named person or family organization company institution member_of located_in ,"},
      1, 0);
  SUBCASE("name and description") {
    const OntologyText t =
        render_ontology_text(s, {"PERSON"}, std::nullopt, "{name:0} : {desc:0}", v, 3);
    CHECK(t.segment_id == 3);
    CHECK(t.source_concepts == std::vector<std::string>{"PERSON"});
    CHECK(t.rendered == tokenize("person : a named person or family", v));
  }
  SUBCASE("path only") {
    const MetaRelationPath p = meta_relation_path(s, "PERSON", "LOC");
    const OntologyText t = render_ontology_text(s, {}, p, "{path}", v);
    CHECK(t.rendered == tokenize("member_of , located_in", v));
  }
  SUBCASE("empty description falls back to the name alone") {
    const auto s2 = make_schema({{"P", "person", "", false}}, {});
    const OntologyText t = render_ontology_text(s2, {"P"}, std::nullopt, "{name:0} : {desc:0}", v);
    CHECK(t.rendered == tokenize("person :", v));
  }
  SUBCASE("rendering is deterministic") {
    const OntologyText t1 =
        render_ontology_text(s, {"PERSON", "ORG"}, std::nullopt, "{desc:0} ; {desc:1}", v);
    const OntologyText t2 =
        render_ontology_text(s, {"PERSON", "ORG"}, std::nullopt, "{desc:0} ; {desc:1}", v);
    CHECK(t1.rendered == t2.rendered);
  }
  SUBCASE("truncation bounds the rendered length") {
    const OntologyText t =
        render_ontology_text(s, {"PERSON"}, std::nullopt, "{name:0} : {desc:0}", v, 0, 3);
    CHECK(t.rendered == tokenize("person : a", v));
  }
}

TEST_CASE("render_ontology_text rejects bad templates") {
  const OntologySchema s = chain_schema();
  const Vocab v = build_vocab({"x"}, 1, 0);
  CHECK_THROWS_AS(render_ontology_text(s, {"PERSON"}, std::nullopt, "{desc:1}", v), TemplateError);
  CHECK_THROWS_AS(render_ontology_text(s, {"PERSON"}, std::nullopt, "{bogus}", v), TemplateError);
  CHECK_THROWS_AS(render_ontology_text(s, {"PERSON"}, std::nullopt, "{name:0", v), TemplateError);
  CHECK_THROWS_AS(render_ontology_text(s, {}, std::nullopt, "{path}", v), TemplateError);
  CHECK_THROWS_AS(render_ontology_text(s, {"NOPE"}, std::nullopt, "{name:0}", v), LookupError);
}
