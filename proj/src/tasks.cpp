#include "ontofuse/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "ontofuse/errors.hpp"
#include "ontofuse/mask.hpp"
#include "ontofuse/rng.hpp"

namespace ontofuse {

FewShotSplit few_shot_sample(const std::vector<TaskInstance>& pool, int n_classes, int k,
                             std::uint64_t seed) {
  if (k < 1) throw ContractViolation("k must be >= 1");
  if (n_classes < 1) throw ContractViolation("n_classes must be >= 1");

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int y = pool[i].gold_label;
    if (y < 0 || y >= n_classes) {
      throw ValidationError("pool instance " + std::to_string(i) + " has label " +
                            std::to_string(y) + " outside [0, " + std::to_string(n_classes) + ")");
    }
    by_class[static_cast<std::size_t>(y)].push_back(static_cast<int>(i));
  }
  for (int c = 0; c < n_classes; ++c) {
    if (by_class[static_cast<std::size_t>(c)].empty()) {
      throw ValidationError("class " + std::to_string(c) + " has no pool instances");
    }
  }

  FewShotSplit split;
  split.k = k;
  split.seed = seed;
  Rng rng(seed);
  std::vector<char> taken(pool.size(), 0);
  for (int c = 0; c < n_classes; ++c) {
    auto ids = by_class[static_cast<std::size_t>(c)];
    rng.shuffle(ids);
    const auto take = std::min<std::size_t>(ids.size(), static_cast<std::size_t>(k));
    if (take < static_cast<std::size_t>(k)) split.short_classes.push_back(c);
    for (std::size_t j = 0; j < take; ++j) {
      split.train.push_back(pool[static_cast<std::size_t>(ids[j])]);
      taken[static_cast<std::size_t>(ids[j])] = 1;
    }
  }

  std::vector<int> rest;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!taken[i]) rest.push_back(static_cast<int>(i));
  }
  rng.shuffle(rest);
  const std::size_t half = rest.size() / 2;
  for (std::size_t j = 0; j < rest.size(); ++j) {
    auto& dst = j < half ? split.dev : split.test;
    dst.push_back(pool[static_cast<std::size_t>(rest[j])]);
  }
  return split;
}

double eval_classification(const std::vector<int>& preds, const std::vector<int>& golds,
                           std::optional<int> negative_class) {
  if (preds.size() != golds.size()) {
    throw ContractViolation("preds and golds differ in length");
  }
  long tp = 0, pred_pos = 0, gold_pos = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p_pos = !negative_class || preds[i] != *negative_class;
    const bool g_pos = !negative_class || golds[i] != *negative_class;
    pred_pos += p_pos;
    gold_pos += g_pos;
    if (p_pos && preds[i] == golds[i]) ++tp;
  }
  const double precision =
      pred_pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_pos);
  const double recall =
      gold_pos == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gold_pos);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

const KgcEntity& KgcCatalog::entity(const std::string& id) const {
  const auto it = entity_index.find(id);
  if (it == entity_index.end()) throw LookupError("unknown entity: " + id);
  return entities[static_cast<std::size_t>(it->second)];
}

const KgcRelation& KgcCatalog::relation(const std::string& id) const {
  const auto it = relation_index.find(id);
  if (it == relation_index.end()) throw LookupError("unknown relation: " + id);
  return relations[static_cast<std::size_t>(it->second)];
}

KgcCatalog make_kgc_catalog(std::vector<KgcEntity> entities, std::vector<KgcRelation> relations) {
  KgcCatalog cat;
  cat.entities = std::move(entities);
  cat.relations = std::move(relations);
  for (std::size_t i = 0; i < cat.entities.size(); ++i) {
    if (!cat.entity_index.emplace(cat.entities[i].id, static_cast<int>(i)).second) {
      throw ValidationError("duplicate entity id: " + cat.entities[i].id);
    }
  }
  for (std::size_t i = 0; i < cat.relations.size(); ++i) {
    if (!cat.relation_index.emplace(cat.relations[i].id, static_cast<int>(i)).second) {
      throw ValidationError("duplicate relation id: " + cat.relations[i].id);
    }
  }
  return cat;
}

std::string triple_key(const std::string& h, const std::string& r, const std::string& t) {
  return h + "|" + r + "|" + t;
}

PromptSequence build_triple_prompt(const KgcTriple& triple, const OntologySchema& schema,
                                   const KgcCatalog& catalog, const Vocab& vocab,
                                   const KgcPromptConfig& cfg) {
  const auto& h = catalog.entity(triple.head);
  const auto& r = catalog.relation(triple.relation);
  const auto& t = catalog.entity(triple.tail);

  TaskInstance inst;
  auto append = [&](const std::string& text) {
    const auto ids = tokenize(text, vocab);
    const int start = static_cast<int>(inst.input_tokens.size());
    inst.input_tokens.insert(inst.input_tokens.end(), ids.begin(), ids.end());
    return std::pair<int, int>{start, static_cast<int>(inst.input_tokens.size())};
  };
  const auto [hs, he] = append(h.name);
  append(r.name);
  const auto [ts, te] = append(t.name);
  inst.spans.push_back({hs, he, "head"});
  inst.spans.push_back({ts, te, "tail"});
  inst.gold_label = triple.label ? 1 : 0;

  std::vector<OntologyText> texts;
  if (cfg.use_ontology) {
    auto add_constraint = [&](const std::string& concept_id, int span, int segment) {
      if (concept_id.empty()) return;
      auto text = render_ontology_text(schema, {concept_id}, std::nullopt, cfg.onto_template,
                                       vocab, segment, cfg.onto_max_tokens);
      text.linked_spans = {span};
      if (!text.rendered.empty()) texts.push_back(std::move(text));
    };
    add_constraint(r.domain, 0, static_cast<int>(texts.size()));
    add_constraint(r.range, 1, static_cast<int>(texts.size()));
  }

  auto seq = assemble_prompt(inst, cfg.template_tokens, texts, vocab, cfg.max_len);
  return insert_virtual_tokens(seq, cfg.n_virtual_left, cfg.n_virtual_right, vocab);
}

double score_triple(MlmModel& model, const KgcTriple& triple, const OntologySchema& schema,
                    const KgcCatalog& catalog, const Vocab& vocab, const KgcPromptConfig& cfg) {
  const auto seq = build_triple_prompt(triple, schema, catalog, vocab, cfg);
  const Matd bias = to_additive_bias(build_visibility_matrix(seq, cfg.symmetric_visibility));
  Tape tape;
  forward(model, seq.tokens, bias, tape, &seq);
  const Vecd z = logits_at(model, tape.h, seq.mask_pos);
  const auto dist = label_distribution(z, cfg.verbalizer);
  double total = 0.0;
  for (const double s : dist.scores) total += s;
  // renormalize within the class partition; a fully underflowed partition
  // carries no signal and reads as maximal uncertainty
  return total > 0.0 ? dist.scores[1] / total : 1.0 / static_cast<double>(dist.scores.size());
}

int pessimistic_rank(const std::vector<double>& competitor_scores, double gold_score) {
  int rank = 1;
  for (const double s : competitor_scores) {
    if (s >= gold_score) ++rank;
  }
  return rank;
}

RankResult rank_candidates(MlmModel& model, const KgcTriple& gold, bool corrupt_tail,
                           const OntologySchema& schema, const KgcCatalog& catalog,
                           const Vocab& vocab, const KgcPromptConfig& cfg,
                           const std::unordered_set<std::string>& known_true, bool filtered) {
  const std::string& gold_slot = corrupt_tail ? gold.tail : gold.head;
  if (!catalog.has_entity(gold_slot)) {
    throw ValidationError("gold entity missing from catalog: " + gold_slot);
  }
  const double gold_score = score_triple(model, gold, schema, catalog, vocab, cfg);

  RankResult res;
  res.n_candidates = 1;
  std::vector<double> competitors;
  for (const auto& e : catalog.entities) {
    if (e.id == gold_slot) continue;
    KgcTriple cand = gold;
    (corrupt_tail ? cand.tail : cand.head) = e.id;
    if (filtered && known_true.count(triple_key(cand.head, cand.relation, cand.tail))) continue;
    competitors.push_back(score_triple(model, cand, schema, catalog, vocab, cfg));
    ++res.n_candidates;
  }
  res.rank = pessimistic_rank(competitors, gold_score);
  res.hit_at_10 = res.rank <= 10;
  return res;
}

RankingSummary summarize_ranks(const std::vector<int>& ranks) {
  if (ranks.empty()) throw ConfigError("no ranks to summarize");
  RankingSummary s;
  long hits = 0;
  double sum = 0.0;
  for (const int r : ranks) {
    if (r < 1) throw ContractViolation("rank below 1");
    sum += static_cast<double>(r);
    hits += r <= 10;
  }
  s.mr = sum / static_cast<double>(ranks.size());
  s.hits_at_10 = static_cast<double>(hits) / static_cast<double>(ranks.size());
  return s;
}

MetricReport make_metric_report(std::string task, std::string metric,
                                std::vector<double> per_seed) {
  if (per_seed.empty()) throw ConfigError("no per-seed values");
  MetricReport rep;
  rep.task = std::move(task);
  rep.metric = std::move(metric);
  rep.per_seed = std::move(per_seed);
  const double n = static_cast<double>(rep.per_seed.size());
  rep.mean = std::accumulate(rep.per_seed.begin(), rep.per_seed.end(), 0.0) / n;
  double var = 0.0;
  for (const double v : rep.per_seed) var += (v - rep.mean) * (v - rep.mean);
  rep.stddev = std::sqrt(var / n);
  return rep;
}

std::vector<NearestWords> nearest_virtual_token_words(const MlmModel& model,
                                                      const PromptSequence& seq, int top_n,
                                                      const Vocab& vocab) {
  if (top_n < 1) throw ContractViolation("top_n must be >= 1");
  if (vocab.size() != model.cfg.vocab_size || vocab.virtual_count() != model.cfg.n_virtual) {
    throw ContractViolation("vocab does not match the model layout");
  }

  std::vector<NearestWords> out;
  for (const int pos : seq.virtual_positions) {
    if (pos < 0 || pos >= seq.size()) throw ContractViolation("virtual position out of range");
    NearestWords nw;
    nw.position = pos;
    nw.token_id = seq.tokens[static_cast<std::size_t>(pos)];
    if (!vocab.is_virtual(nw.token_id)) {
      throw ContractViolation("token at a virtual position is not a virtual token");
    }
    const auto v = model.tok_emb.row(nw.token_id);
    const double vn = v.norm();
    if (vn == 0.0) {
      nw.undefined = true;
      out.push_back(std::move(nw));
      continue;
    }
    for (int w = vocab.virtual_end; w < vocab.size(); ++w) {
      const auto e = model.tok_emb.row(w);
      const double en = e.norm();
      if (en == 0.0) continue;  // cosine undefined for this word, not rankable
      nw.neighbors.emplace_back(w, v.dot(e) / (vn * en));
    }
    std::sort(nw.neighbors.begin(), nw.neighbors.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (static_cast<int>(nw.neighbors.size()) > top_n) {
      nw.neighbors.resize(static_cast<std::size_t>(top_n));
    }
    out.push_back(std::move(nw));
  }
  return out;
}

}  // namespace ontofuse
