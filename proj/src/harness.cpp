#include "ontofuse/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "ontofuse/checkpoint.hpp"
#include "ontofuse/errors.hpp"
#include "ontofuse/mask.hpp"
#include "ontofuse/rng.hpp"
#include "ontofuse/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ontofuse {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path + ": cannot write");
  out << text;
}

std::string where(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no) + ": ";
}

json parse_line(const std::string& path, std::size_t line_no, const std::string& line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(where(path, line_no) + e.what());
  }
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const std::string& ctx, const char* key) {
  if (!j.contains(key)) throw FormatError(ctx + "missing field \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(ctx + "field \"" + key + "\": " + e.what());
  }
}

// kgc with no explicit labels scores against false/true.
const std::vector<std::string>& effective_labels(const ExperimentConfig& cfg) {
  static const std::vector<std::string> kBinary = {"false", "true"};
  if (cfg.task == "kgc" && cfg.labels.empty()) return kBinary;
  return cfg.labels;
}

std::vector<std::vector<std::string>> effective_label_words(const ExperimentConfig& cfg) {
  if (!cfg.label_words.empty()) return cfg.label_words;
  std::vector<std::vector<std::string>> words;
  for (const auto& l : effective_labels(cfg)) words.push_back({l});
  return words;
}

ModelConfig resolve_model_config(const ExperimentConfig& cfg, const Vocab& vocab) {
  ModelConfig mc = cfg.model;
  if (mc.vocab_size == 0) {
    mc.vocab_size = vocab.size();
  } else if (mc.vocab_size != vocab.size()) {
    throw ConfigError("model.vocab_size: " + std::to_string(mc.vocab_size) +
                      " does not match the vocab file (" + std::to_string(vocab.size()) + ")");
  }
  if (mc.n_virtual == 0) {
    mc.n_virtual = vocab.virtual_count();
  } else if (mc.n_virtual != vocab.virtual_count()) {
    throw ConfigError("model.n_virtual: " + std::to_string(mc.n_virtual) +
                      " does not match the vocab file (" + std::to_string(vocab.virtual_count()) +
                      ")");
  }
  const int want = cfg.ablation.disable_virtual_tokens ? 0 : cfg.prompt.n_left + cfg.prompt.n_right;
  if (want > vocab.virtual_count()) {
    throw ConfigError("prompt.n_left: n_left + n_right exceeds the vocab's virtual block (" +
                      std::to_string(vocab.virtual_count()) + ")");
  }
  return mc;
}

MlmModel init_model(const ExperimentConfig& cfg, const Vocab& vocab, std::uint64_t seed) {
  ModelConfig mc = resolve_model_config(cfg, vocab);
  if (!cfg.paths.init_checkpoint.empty()) {
    if (!fs::exists(cfg.paths.init_checkpoint)) {
      throw ConfigError("paths.init_checkpoint: " + cfg.paths.init_checkpoint +
                        " not found (run pretrain first)");
    }
    Checkpoint ck = load_checkpoint(cfg.paths.init_checkpoint);
    if (ck.vocab_hash != vocab.content_hash()) {
      throw ConfigError("paths.init_checkpoint: checkpoint was trained against a different vocab");
    }
    const ModelConfig& c = ck.model.cfg;
    if (c.vocab_size != mc.vocab_size || c.n_virtual != mc.n_virtual || c.d_model != mc.d_model ||
        c.n_layers != mc.n_layers || c.n_heads != mc.n_heads || c.d_ff != mc.d_ff ||
        c.max_len != mc.max_len) {
      throw ConfigError("paths.init_checkpoint: checkpoint shape disagrees with model config");
    }
    return std::move(ck.model);
  }
  mc.seed = cfg.model.seed + seed;  // fresh init per run seed
  return MlmModel::init(mc);
}

int negative_class_of(const ExperimentConfig& cfg) {
  if (!cfg.negative_label) return -1;
  for (std::size_t i = 0; i < cfg.labels.size(); ++i) {
    if (cfg.labels[i] == *cfg.negative_label) return static_cast<int>(i);
  }
  return -1;  // validate() already rejected this
}

std::string seg_name(const Segment& s) {
  switch (s.kind) {
    case SegmentKind::Input:
      return "input";
    case SegmentKind::Template:
      return "template";
    case SegmentKind::Ontology:
      return "onto:" + std::to_string(s.k);
  }
  return "?";
}

void write_curve(const std::string& path, const PhaseReport& rep) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,train_loss,dev_loss\n";
  for (const auto& p : rep.curve) {
    out << p.step << ',' << p.train_loss << ',' << p.dev_loss << '\n';
  }
  write_text(path, out.str());
}

json phase_to_json(const PhaseReport& rep) {
  return json{{"steps", rep.steps},         {"stop_reason", rep.stop_reason},
              {"best_step", rep.best_step}, {"dev_start", rep.dev_start},
              {"dev_best", rep.dev_best},   {"dev_end", rep.dev_end},
              {"clamp_events", rep.clamp_events}};
}

struct LoadedTask {
  Vocab vocab;
  OntologySchema schema;
};

LoadedTask load_common(const ExperimentConfig& cfg) {
  return {load_vocab(cfg.paths.vocab), load_ontology(cfg.paths.ontology)};
}

std::vector<PreparedInstance> prepare_all(const std::vector<TaskInstance>& instances,
                                          const OntologySchema& schema, const Vocab& vocab,
                                          const ExperimentConfig& cfg) {
  std::vector<PreparedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(prepare_instance(inst, schema, vocab, cfg));
  return out;
}

KgcPromptConfig make_kgc_prompt_config(const ExperimentConfig& cfg, const Vocab& vocab,
                                       const ModelConfig& mc) {
  KgcPromptConfig kpc;
  kpc.template_tokens = tokenize(cfg.prompt.template_text, vocab);
  kpc.verbalizer = make_verbalizer(cfg, vocab);
  kpc.onto_template = cfg.prompt.onto_template;
  kpc.n_virtual_left = cfg.ablation.disable_virtual_tokens ? 0 : cfg.prompt.n_left;
  kpc.n_virtual_right = cfg.ablation.disable_virtual_tokens ? 0 : cfg.prompt.n_right;
  kpc.max_len = mc.max_len;
  kpc.onto_max_tokens = cfg.prompt.onto_max_tokens;
  kpc.symmetric_visibility = cfg.prompt.symmetrize;
  kpc.use_ontology = !cfg.ablation.disable_ontology_text;
  return kpc;
}

struct KgcSeedData {
  std::vector<KgcTriple> train;    // true and corrupted, labels set
  std::vector<KgcTriple> dev;
  std::vector<KgcTriple> queries;  // held-out true triples to rank
};

// K true triples per relation into train, half that into dev, the rest are
// ranking queries. Each true train/dev triple gets one tail-corrupted twin.
KgcSeedData split_kgc(const KgcData& data, int k, int eval_queries, std::uint64_t seed) {
  std::unordered_map<std::string, std::vector<int>> by_rel;
  for (std::size_t i = 0; i < data.triples.size(); ++i) {
    by_rel[data.triples[i].relation].push_back(static_cast<int>(i));
  }
  std::vector<std::string> rel_ids;
  for (const auto& r : data.catalog.relations) {
    if (by_rel.count(r.id)) rel_ids.push_back(r.id);
  }

  Rng rng(seed);
  KgcSeedData out;
  std::vector<KgcTriple> queries;
  const int dev_per_rel = std::max(1, k / 2);
  for (const auto& rid : rel_ids) {
    auto& idx = by_rel[rid];
    rng.shuffle(idx);
    int taken = 0;
    for (const int i : idx) {
      if (taken < k) {
        out.train.push_back(data.triples[static_cast<std::size_t>(i)]);
      } else if (taken < k + dev_per_rel) {
        out.dev.push_back(data.triples[static_cast<std::size_t>(i)]);
      } else {
        queries.push_back(data.triples[static_cast<std::size_t>(i)]);
      }
      ++taken;
    }
  }
  if (out.dev.empty()) throw ConfigError("kgc dataset too small: no dev triples left");
  if (queries.empty()) throw ConfigError("kgc dataset too small: no ranking queries left");
  rng.shuffle(queries);
  if (static_cast<int>(queries.size()) > eval_queries) {
    queries.resize(static_cast<std::size_t>(eval_queries));
  }
  out.queries = std::move(queries);

  auto corrupt = [&](std::vector<KgcTriple>& set) {
    const auto n = set.size();
    for (std::size_t i = 0; i < n; ++i) {
      const KgcTriple& t = set[i];
      for (int tries = 0; tries < 100; ++tries) {
        const auto& e = data.catalog.entities[static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::int64_t>(data.catalog.entities.size())))];
        if (e.id == t.tail) continue;
        if (data.known_true.count(triple_key(t.head, t.relation, e.id))) continue;
        set.push_back({t.head, t.relation, e.id, false});
        break;
      }
    }
  };
  corrupt(out.train);
  corrupt(out.dev);
  return out;
}

std::vector<PreparedInstance> prepare_kgc(const std::vector<KgcTriple>& triples,
                                          const OntologySchema& schema, const KgcCatalog& catalog,
                                          const Vocab& vocab, const KgcPromptConfig& kpc) {
  std::vector<PreparedInstance> out;
  out.reserve(triples.size());
  for (const auto& t : triples) {
    PreparedInstance pi;
    pi.seq = build_triple_prompt(t, schema, catalog, vocab, kpc);
    pi.bias = to_additive_bias(build_visibility_matrix(pi.seq, kpc.symmetric_visibility));
    pi.gold = t.label ? 1 : 0;
    out.push_back(std::move(pi));
  }
  return out;
}

}  // namespace

ClassificationData load_classification_data(const std::string& path,
                                            const std::vector<std::string>& labels,
                                            const Vocab& vocab) {
  std::unordered_map<std::string, int> label_index;
  for (std::size_t i = 0; i < labels.size(); ++i) label_index[labels[i]] = static_cast<int>(i);

  ClassificationData data;
  data.n_classes = static_cast<int>(labels.size());
  const auto lines = read_lines(path);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::string ctx = where(path, li + 1);
    const json j = parse_line(path, li + 1, lines[li]);
    if (!j.is_object()) throw FormatError(ctx + "expected a JSON object");

    TaskInstance inst;
    inst.input_tokens = tokenize(field<std::string>(j, ctx, "text"), vocab);
    const auto label = field<std::string>(j, ctx, "label");
    const auto it = label_index.find(label);
    if (it == label_index.end()) throw ValidationError(ctx + "unknown label \"" + label + "\"");
    inst.gold_label = it->second;

    if (j.contains("spans")) {
      const auto& spans = j.at("spans");
      if (!spans.is_array()) throw FormatError(ctx + "\"spans\" must be an array");
      for (const auto& sj : spans) {
        Span s;
        s.start = field<int>(sj, ctx, "start");
        s.end = field<int>(sj, ctx, "end");
        s.role = field<std::string>(sj, ctx, "role");
        const int n = static_cast<int>(inst.input_tokens.size());
        if (s.start < 0 || s.end < s.start || s.end > n) {
          throw ValidationError(ctx + "span [" + std::to_string(s.start) + "," +
                                std::to_string(s.end) + ") outside the tokenized text");
        }
        const int span_idx = static_cast<int>(inst.spans.size());
        inst.spans.push_back(s);
        if (sj.contains("concepts")) {
          std::vector<std::string> ids;
          try {
            sj.at("concepts").get_to(ids);
          } catch (const json::exception& e) {
            throw FormatError(ctx + "field \"concepts\": " + e.what());
          }
          if (!ids.empty()) inst.concept_links[span_idx] = std::move(ids);
        }
      }
    }
    data.pool.push_back(std::move(inst));
  }
  if (data.pool.empty()) throw ValidationError(path + ": no instances");
  return data;
}

KgcData load_kgc_data(const PathSettings& paths, const OntologySchema& schema) {
  auto parse_catalog_rows = [](const std::string& path) {
    const json j = load_json_file(path);
    if (!j.is_array()) throw FormatError(path + ": expected a JSON array");
    return j;
  };

  std::vector<KgcEntity> entities;
  for (const auto& ej : parse_catalog_rows(paths.kg_entities)) {
    entities.push_back({field<std::string>(ej, paths.kg_entities + ": ", "id"),
                        field<std::string>(ej, paths.kg_entities + ": ", "name"),
                        field<std::string>(ej, paths.kg_entities + ": ", "description")});
  }

  std::vector<KgcRelation> relations;
  for (const auto& rj : parse_catalog_rows(paths.kg_relations)) {
    KgcRelation r;
    r.id = field<std::string>(rj, paths.kg_relations + ": ", "id");
    r.name = field<std::string>(rj, paths.kg_relations + ": ", "name");
    r.description = field<std::string>(rj, paths.kg_relations + ": ", "description");
    // domain/range come from the ontology edge labeled with the relation id
    for (const auto& e : schema.edges) {
      if (e.label == r.id) {
        r.domain = e.src;
        r.range = e.dst;
        break;
      }
    }
    relations.push_back(std::move(r));
  }

  KgcData data;
  data.catalog = make_kgc_catalog(std::move(entities), std::move(relations));

  const auto lines = read_lines(paths.dataset);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::string ctx = where(paths.dataset, li + 1);
    const json j = parse_line(paths.dataset, li + 1, lines[li]);
    KgcTriple t{field<std::string>(j, ctx, "h"), field<std::string>(j, ctx, "r"),
                field<std::string>(j, ctx, "t"), true};
    if (!data.catalog.has_entity(t.head)) throw ValidationError(ctx + "unknown head " + t.head);
    if (!data.catalog.has_entity(t.tail)) throw ValidationError(ctx + "unknown tail " + t.tail);
    if (!data.catalog.relation_index.count(t.relation)) {
      throw ValidationError(ctx + "unknown relation " + t.relation);
    }
    data.known_true.insert(triple_key(t.head, t.relation, t.tail));
    data.triples.push_back(std::move(t));
  }
  if (data.triples.empty()) throw ValidationError(paths.dataset + ": no triples");
  return data;
}

PreparedInstance prepare_instance(const TaskInstance& inst, const OntologySchema& schema,
                                  const Vocab& vocab, const ExperimentConfig& cfg) {
  const auto& p = cfg.prompt;
  const int n_virtual = cfg.ablation.disable_virtual_tokens ? 0 : p.n_left + p.n_right;

  std::vector<OntologyText> texts;
  if (!cfg.ablation.disable_ontology_text) {
    int seg = 0;
    for (const auto& [span_idx, concepts] : inst.concept_links) {
      for (const auto& cid : concepts) {
        if (cid.empty()) continue;
        OntologyText text = render_ontology_text(schema, {cid}, std::nullopt, p.onto_template,
                                                 vocab, seg, p.onto_max_tokens);
        text.linked_spans = {span_idx};
        if (text.rendered.empty()) continue;
        texts.push_back(std::move(text));
        ++seg;
      }
    }
    if (p.meta_path_segment) {
      // tie the first two linked spans together through the ontology graph
      std::vector<std::pair<int, std::string>> anchors;
      for (const auto& [span_idx, concepts] : inst.concept_links) {
        if (!concepts.empty()) anchors.emplace_back(span_idx, concepts.front());
        if (anchors.size() == 2) break;
      }
      if (anchors.size() == 2) {
        const auto path = meta_relation_path(schema, anchors[0].second, anchors[1].second);
        OntologyText text =
            render_ontology_text(schema, {anchors[0].second, anchors[1].second}, path,
                                 p.meta_template, vocab, seg, p.onto_max_tokens);
        text.linked_spans = {anchors[0].first, anchors[1].first};
        text.is_meta = true;
        if (!text.rendered.empty()) texts.push_back(std::move(text));
      }
    }
  }

  const auto anchor = p.span_anchor == "all" ? SpanAnchor::All : SpanAnchor::First;
  const auto template_tokens = tokenize(p.template_text, vocab);
  PromptSequence seq = assemble_prompt(inst, template_tokens, texts, vocab,
                                       cfg.model.max_len - n_virtual, anchor);
  if (n_virtual > 0) seq = insert_virtual_tokens(seq, p.n_left, p.n_right, vocab);

  PreparedInstance out;
  const int L = seq.size();
  if (cfg.ablation.disable_visibility_matrix) {
    out.bias = Matd::Zero(L, L);
  } else {
    out.bias = to_additive_bias(
        build_visibility_matrix(seq, p.symmetrize, p.template_sees_ontology));
  }
  out.seq = std::move(seq);
  out.gold = inst.gold_label;
  return out;
}

Verbalizer make_verbalizer(const ExperimentConfig& cfg, const Vocab& vocab) {
  return build_verbalizer(effective_label_words(cfg), vocab);
}

std::string run_base_dir(const ExperimentConfig& cfg) {
  return cfg.paths.out_dir + "/" + config_hash(cfg);
}

std::string run_seed_dir(const ExperimentConfig& cfg, int k, std::uint64_t seed) {
  return run_base_dir(cfg) + "/k" + std::to_string(k) + "_seed" + std::to_string(seed);
}

TrainSeedReport run_train_seed(const ExperimentConfig& cfg, int k, std::uint64_t seed) {
  const auto common = load_common(cfg);
  const ModelConfig mc = resolve_model_config(cfg, common.vocab);
  MlmModel model = init_model(cfg, common.vocab, seed);
  const Verbalizer vb = make_verbalizer(cfg, common.vocab);

  std::vector<PreparedInstance> train, dev;
  if (cfg.task == "kgc") {
    const KgcData data = load_kgc_data(cfg.paths, common.schema);
    const KgcSeedData split = split_kgc(data, k, cfg.eval_queries, seed);
    const KgcPromptConfig kpc = make_kgc_prompt_config(cfg, common.vocab, mc);
    train = prepare_kgc(split.train, common.schema, data.catalog, common.vocab, kpc);
    dev = prepare_kgc(split.dev, common.schema, data.catalog, common.vocab, kpc);
  } else {
    const auto data = load_classification_data(cfg.paths.dataset, cfg.labels, common.vocab);
    const auto split = few_shot_sample(data.pool, data.n_classes, k, seed);
    if (split.dev.empty()) throw ConfigError("dataset too small: dev split is empty");
    train = prepare_all(split.train, common.schema, common.vocab, cfg);
    dev = prepare_all(split.dev, common.schema, common.vocab, cfg);
  }

  TrainConfig tc = cfg.train;
  tc.seed = cfg.train.seed + seed;

  TrainSeedReport rep;
  rep.run_dir = run_seed_dir(cfg, k, seed);
  if (cfg.ablation.disable_phase1) {
    rep.phase1.stop_reason = "disabled";
  } else {
    rep.phase1 = train_phase1(model, train, dev, vb, tc);
  }
  rep.phase2 = train_phase2(model, train, dev, vb, tc);

  fs::create_directories(rep.run_dir);
  json resolved = config_to_json(cfg);
  resolved["run"] = {{"k", k},
                     {"seed", seed},
                     {"config_hash", config_hash(cfg)},
                     {"model_seed", model.cfg.seed},
                     {"trainer_seed", tc.seed},
                     {"vocab_size", mc.vocab_size},
                     {"n_virtual", mc.n_virtual}};
  write_text(rep.run_dir + "/resolved.json", resolved.dump(2) + "\n");
  write_curve(rep.run_dir + "/phase1_loss.csv", rep.phase1);
  write_curve(rep.run_dir + "/phase2_loss.csv", rep.phase2);
  write_text(rep.run_dir + "/train_report.json",
             json{{"phase1", phase_to_json(rep.phase1)}, {"phase2", phase_to_json(rep.phase2)}}
                     .dump(2) +
                 "\n");
  save_checkpoint(rep.run_dir + "/model.bin", model, common.vocab.content_hash());
  return rep;
}

std::map<std::string, double> run_eval_seed(const ExperimentConfig& cfg, int k,
                                            std::uint64_t seed) {
  const auto common = load_common(cfg);
  const ModelConfig mc = resolve_model_config(cfg, common.vocab);
  const std::string dir = run_seed_dir(cfg, k, seed);
  const std::string model_path = dir + "/model.bin";
  if (!fs::exists(model_path)) {
    throw ConfigError(model_path + ": missing, run train for this config first");
  }
  Checkpoint ck = load_checkpoint(model_path);
  if (ck.vocab_hash != common.vocab.content_hash()) {
    throw ConfigError(model_path + ": checkpoint vocab differs from paths.vocab");
  }
  MlmModel model = std::move(ck.model);

  if (cfg.task == "kgc") {
    const KgcData data = load_kgc_data(cfg.paths, common.schema);
    const KgcSeedData split = split_kgc(data, k, cfg.eval_queries, seed);
    const KgcPromptConfig kpc = make_kgc_prompt_config(cfg, common.vocab, mc);
    std::vector<int> ranks;
    for (const auto& q : split.queries) {
      for (const bool corrupt_tail : {true, false}) {
        const auto r = rank_candidates(model, q, corrupt_tail, common.schema, data.catalog,
                                       common.vocab, kpc, data.known_true, /*filtered=*/true);
        ranks.push_back(r.rank);
      }
    }
    const auto s = summarize_ranks(ranks);
    return {{"mr", s.mr}, {"hits@10", s.hits_at_10}};
  }

  const auto data = load_classification_data(cfg.paths.dataset, cfg.labels, common.vocab);
  const auto split = few_shot_sample(data.pool, data.n_classes, k, seed);
  const Verbalizer vb = make_verbalizer(cfg, common.vocab);
  std::vector<int> preds, golds;
  for (const auto& inst : split.test) {
    const PreparedInstance pi = prepare_instance(inst, common.schema, common.vocab, cfg);
    Tape tape;
    forward(model, pi.seq.tokens, pi.bias, tape, &pi.seq);
    const Vecd z = logits_at(model, tape.h, pi.seq.mask_pos);
    preds.push_back(label_distribution(z, vb).predicted);
    golds.push_back(inst.gold_label);
  }
  const int neg = negative_class_of(cfg);
  const double f1 = eval_classification(
      preds, golds, neg >= 0 ? std::optional<int>(neg) : std::nullopt);
  return {{"micro_f1", f1}};
}

json run_train(const ExperimentConfig& cfg) {
  json out = json::array();
  for (const int k : cfg.k_list) {
    for (const auto seed : cfg.seeds) {
      const auto rep = run_train_seed(cfg, k, seed);
      out.push_back({{"k", k},
                     {"seed", seed},
                     {"run_dir", rep.run_dir},
                     {"phase1", phase_to_json(rep.phase1)},
                     {"phase2", phase_to_json(rep.phase2)}});
    }
  }
  return out;
}

json run_eval(const ExperimentConfig& cfg) {
  json out = json::array();
  for (const int k : cfg.k_list) {
    std::map<std::string, std::vector<double>> per_seed;
    for (const auto seed : cfg.seeds) {
      for (const auto& [metric, value] : run_eval_seed(cfg, k, seed)) {
        per_seed[metric].push_back(value);
      }
    }
    json report{{"task", cfg.task}, {"K", k}, {"seeds", cfg.seeds}};
    json per, mean, std_;
    for (const auto& [metric, values] : per_seed) {
      const auto mr = make_metric_report(cfg.task, metric, values);
      per[metric] = values;
      mean[metric] = mr.mean;
      std_[metric] = mr.stddev;
    }
    report["per_seed"] = per;
    report["mean"] = mean;
    report["std"] = std_;
    fs::create_directories(run_base_dir(cfg));
    write_text(run_base_dir(cfg) + "/metrics_k" + std::to_string(k) + ".json",
               report.dump(2) + "\n");
    out.push_back(std::move(report));
  }
  return out;
}

json run_ablate(const ExperimentConfig& cfg) {
  if (cfg.task == "kgc") throw ConfigError("ablate: classification tasks only");
  const int k = cfg.k_list.front();

  struct Row {
    const char* name;
    bool no_onto;
    bool no_vis;
  };
  const Row rows[] = {{"full", false, false},
                      {"wo_span_ki", false, true},
                      {"wo_onto_text", true, false},
                      {"wo_both", true, true}};

  json table = json::array();
  for (const Row& row : rows) {
    ExperimentConfig c = cfg;
    c.ablation.disable_ontology_text = row.no_onto;
    c.ablation.disable_visibility_matrix = row.no_vis;
    std::vector<double> per_seed;
    for (const auto seed : cfg.seeds) {
      run_train_seed(c, k, seed);
      per_seed.push_back(run_eval_seed(c, k, seed).at("micro_f1"));
    }
    const auto mr = make_metric_report(cfg.task, "micro_f1", per_seed);
    table.push_back({{"name", row.name},
                     {"disable_ontology_text", row.no_onto},
                     {"disable_visibility_matrix", row.no_vis},
                     {"per_seed", per_seed},
                     {"mean", mr.mean},
                     {"std", mr.stddev}});
  }
  json out{{"task", cfg.task}, {"K", k}, {"seeds", cfg.seeds}, {"rows", table}};
  fs::create_directories(run_base_dir(cfg));
  write_text(run_base_dir(cfg) + "/ablation.json", out.dump(2) + "\n");
  return out;
}

PretrainReport run_pretrain(const ExperimentConfig& cfg, std::string* checkpoint_path) {
  if (cfg.paths.corpus.empty()) {
    throw ConfigError("paths.corpus: required for pretraining");
  }
  const Vocab vocab = load_vocab(cfg.paths.vocab);
  std::vector<std::vector<int>> docs;
  for (const auto& line : read_lines(cfg.paths.corpus)) {
    if (line.empty()) continue;
    auto ids = tokenize(line, vocab);
    if (!ids.empty()) docs.push_back(std::move(ids));
  }
  if (docs.empty()) throw ConfigError(cfg.paths.corpus + ": no usable documents");

  ModelConfig mc = resolve_model_config(cfg, vocab);
  MlmModel model = MlmModel::init(mc);
  const PretrainReport rep = pretrain_mlm(model, docs, cfg.pretrain);

  std::string out = cfg.paths.init_checkpoint.empty() ? cfg.paths.out_dir + "/pretrained.bin"
                                                      : cfg.paths.init_checkpoint;
  const fs::path parent = fs::path(out).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  save_checkpoint(out, model, vocab.content_hash());
  if (checkpoint_path) *checkpoint_path = out;
  return rep;
}

ExperimentConfig starter_experiment(const std::string& task, const std::string& dir) {
  ExperimentConfig cfg;
  cfg.task = task;
  cfg.paths.vocab = dir + "/vocab.txt";
  cfg.paths.ontology = dir + "/ontology.json";
  cfg.paths.corpus = dir + "/corpus.txt";
  cfg.paths.out_dir = dir + "/runs";
  // prompt tuning presumes a trained encoder: train/eval read this checkpoint,
  // so run `pretrain` once after gen-data + build-vocab
  cfg.paths.init_checkpoint = dir + "/pretrained.bin";
  cfg.model.d_model = 32;
  cfg.model.n_layers = 2;
  cfg.model.n_heads = 4;
  cfg.model.d_ff = 64;
  cfg.model.max_len = 96;
  cfg.pretrain.steps = 600;
  cfg.train.alpha = 5e-3;
  cfg.train.beta = 3e-3;
  cfg.train.phase1_max_steps = 200;
  cfg.train.phase2_max_steps = 500;
  cfg.train.patience = 10;
  cfg.train.eval_every = 10;
  cfg.train.batch_size = 8;
  cfg.k_list = {8};
  cfg.seeds = {1, 2, 3, 4, 5};
  if (task == "re") {
    cfg.labels = synth_re_labels();
    cfg.paths.dataset = dir + "/re.jsonl";
    cfg.prompt.template_text = "the relation is [MASK]";
  } else if (task == "ee") {
    cfg.labels = synth_ee_labels();
    cfg.paths.dataset = dir + "/ee.jsonl";
    cfg.prompt.template_text = "the role is [MASK]";
  } else if (task == "kgc") {
    cfg.labels = {"false", "true"};
    cfg.paths.dataset = dir + "/kg_triples.jsonl";
    cfg.paths.kg_entities = dir + "/kg_entities.json";
    cfg.paths.kg_relations = dir + "/kg_relations.json";
    cfg.prompt.template_text = "the claim is [MASK]";
    cfg.eval_queries = 20;
  } else {
    throw ConfigError("no starter config for task \"" + task + "\"");
  }
  return cfg;
}

PreparedInstance prepare_example(const ExperimentConfig& cfg, int index) {
  const auto common = load_common(cfg);
  if (cfg.task == "kgc") {
    const KgcData data = load_kgc_data(cfg.paths, common.schema);
    if (index < 0 || index >= static_cast<int>(data.triples.size())) {
      throw ConfigError("index " + std::to_string(index) + " out of range (" +
                        std::to_string(data.triples.size()) + " triples)");
    }
    const ModelConfig mc = resolve_model_config(cfg, common.vocab);
    const KgcPromptConfig kpc = make_kgc_prompt_config(cfg, common.vocab, mc);
    return prepare_kgc({data.triples[static_cast<std::size_t>(index)]}, common.schema,
                       data.catalog, common.vocab, kpc)
        .front();
  }
  const auto data = load_classification_data(cfg.paths.dataset, cfg.labels, common.vocab);
  if (index < 0 || index >= static_cast<int>(data.pool.size())) {
    throw ConfigError("index " + std::to_string(index) + " out of range (" +
                      std::to_string(data.pool.size()) + " instances)");
  }
  return prepare_instance(data.pool[static_cast<std::size_t>(index)], common.schema, common.vocab,
                          cfg);
}

json describe_prompt(const PromptSequence& seq, const Vocab& vocab) {
  json tokens = json::array(), segments = json::array();
  for (int i = 0; i < seq.size(); ++i) {
    tokens.push_back(vocab.token_of(seq.tokens[static_cast<std::size_t>(i)]));
    segments.push_back(seg_name(seq.segments[static_cast<std::size_t>(i)]));
  }
  json links = json::array();
  for (const auto& l : seq.span_links) links.push_back({{"pos", l.pos}, {"segment", l.segment}});
  json onto = json::array();
  for (int s = 0; s < seq.ontology_segment_count(); ++s) {
    std::ostringstream hash;
    hash << std::hex << seq.ontology_hash[static_cast<std::size_t>(s)];
    onto.push_back({{"segment", s},
                    {"begin", seq.ontology_begin[static_cast<std::size_t>(s)]},
                    {"len", seq.ontology_len[static_cast<std::size_t>(s)]},
                    {"hash", hash.str()}});
  }
  return json{{"tokens", tokens},
              {"segments", segments},
              {"mask_pos", seq.mask_pos},
              {"virtual_positions", seq.virtual_positions},
              {"span_links", links},
              {"ontology_segments", onto}};
}

}  // namespace ontofuse
