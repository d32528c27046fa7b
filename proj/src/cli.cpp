#include "ontofuse/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "ontofuse/checkpoint.hpp"
#include "ontofuse/config.hpp"
#include "ontofuse/errors.hpp"
#include "ontofuse/harness.hpp"
#include "ontofuse/mask.hpp"
#include "ontofuse/synth.hpp"
#include "ontofuse/tasks.hpp"
#include "ontofuse/tokenizer.hpp"

using nlohmann::json;

namespace ontofuse {

namespace {

int fail(const char* kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

ExperimentConfig load_cfg(const std::string& path, const std::vector<std::string>& overrides) {
  return load_experiment_config(path, overrides);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path + ": cannot write");
  out << text;
}

void cmd_gen_data(const std::string& out, std::uint64_t seed) {
  SynthConfig sc;
  sc.seed = seed;
  generate_synthetic_data(out, sc);
  json files = json::array();
  for (const char* f : {"ontology.json", "corpus.txt", "re.jsonl", "ee.jsonl", "kg_triples.jsonl",
                        "kg_entities.json", "kg_relations.json"}) {
    files.push_back(std::string(f));
  }
  for (const char* task : {"re", "ee", "kgc"}) {
    const std::string name = std::string(task) + ".json";
    write_file(out + "/" + name, config_to_json(starter_experiment(task, out)).dump(2) + "\n");
    files.push_back(name);
  }
  emit(json{{"out", out}, {"files", files}});
}

void cmd_build_vocab(const std::string& corpus, const std::string& out, int min_count,
                     int n_virtual) {
  std::ifstream in(corpus);
  if (!in) throw ConfigError(corpus + ": cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  const Vocab vocab = build_vocab(lines, min_count, n_virtual);
  save_vocab(vocab, out);
  emit(json{{"vocab", out}, {"size", vocab.size()}, {"n_virtual", vocab.virtual_count()}});
}

void cmd_pretrain(const ExperimentConfig& cfg) {
  std::string path;
  const PretrainReport rep = run_pretrain(cfg, &path);
  emit(json{{"checkpoint", path},
            {"steps", rep.steps},
            {"heldout_perplexity_start", rep.heldout_perplexity_start},
            {"heldout_perplexity", rep.heldout_perplexity}});
}

void cmd_ablate(const ExperimentConfig& cfg) {
  const json table = run_ablate(cfg);
  std::cout << std::left << std::setw(14) << "row" << std::right << std::setw(8) << "mean"
            << std::setw(8) << "std"
            << "  per-seed\n";
  std::cout << std::fixed << std::setprecision(3);
  for (const auto& row : table.at("rows")) {
    std::cout << std::left << std::setw(14) << row.at("name").get<std::string>() << std::right
              << std::setw(8) << row.at("mean").get<double>() << std::setw(8)
              << row.at("std").get<double>() << " ";
    for (const auto& v : row.at("per_seed")) std::cout << " " << v.get<double>();
    std::cout << "\n";
  }
  std::cout << "wrote " << run_base_dir(cfg) << "/ablation.json\n";
}

int count_visible(const VisibilityMatrix& m) {
  int n = 0;
  for (int i = 0; i < m.size(); ++i) {
    for (int j = 0; j < m.size(); ++j) n += m.visible(i, j) ? 1 : 0;
  }
  return n;
}

// The five-position walkthrough: three input tokens whose middle one anchors
// a two-token ontology segment.
PromptSequence demo_sequence() {
  PromptSequence seq;
  seq.tokens = {0, 0, 0, 0, 0};
  for (int i = 0; i < 3; ++i) seq.segments.push_back({SegmentKind::Input, -1});
  for (int i = 0; i < 2; ++i) seq.segments.push_back({SegmentKind::Ontology, 0});
  seq.span_links = {{1, 0}};
  seq.ontology_begin = {3};
  seq.ontology_len = {2};
  seq.ontology_hash = {0};
  return seq;
}

void cmd_inspect_mask(const ExperimentConfig* cfg, int index, bool demo) {
  PromptSequence seq;
  bool symmetrize = false;
  bool template_sees_ontology = false;
  if (demo) {
    seq = demo_sequence();
  } else {
    seq = prepare_example(*cfg, index).seq;
    symmetrize = cfg->prompt.symmetrize;
    template_sees_ontology = cfg->prompt.template_sees_ontology;
    if (cfg->ablation.disable_visibility_matrix) {
      std::cout << "note: disable_visibility_matrix is on, training uses an all-visible mask;\n"
                   "      showing the span-rule matrix this prompt would get\n";
    }
  }
  const VisibilityMatrix m = build_visibility_matrix(seq, symmetrize, template_sees_ontology);
  std::cout << render_grid(m);
  emit(json{{"positions", m.size()}, {"visible", count_visible(m)}});
}

void cmd_nearest(const ExperimentConfig& cfg, int k, std::uint64_t seed, int index, int top) {
  const std::string path = run_seed_dir(cfg, k, seed) + "/model.bin";
  Checkpoint ck = load_checkpoint(path);
  const Vocab vocab = load_vocab(cfg.paths.vocab);
  if (ck.vocab_hash != vocab.content_hash()) {
    throw ConfigError(path + ": checkpoint vocab differs from paths.vocab");
  }
  const PreparedInstance pi = prepare_example(cfg, index);
  json rows = json::array();
  for (const auto& nw : nearest_virtual_token_words(ck.model, pi.seq, top, vocab)) {
    json neighbors = json::array();
    for (const auto& [id, cosine] : nw.neighbors) {
      neighbors.push_back({{"word", vocab.token_of(id)}, {"cosine", cosine}});
    }
    rows.push_back({{"position", nw.position},
                    {"token", vocab.token_of(nw.token_id)},
                    {"undefined", nw.undefined},
                    {"neighbors", neighbors}});
  }
  emit(rows);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"ontology-enhanced prompt tuning workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config JSON")->required();
    cmd->add_option("--set", overrides, "dotted-path override, e.g. train.alpha=0.01");
  };

  std::string gen_out;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("gen-data", "write synthetic data and starter configs");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->callback([&] { cmd_gen_data(gen_out, gen_seed); });

  std::string bv_corpus, bv_out;
  int bv_min_count = 1, bv_virtual = 2;
  auto* bv = app.add_subcommand("build-vocab", "build a vocabulary from a corpus file");
  bv->add_option("--corpus", bv_corpus, "one document per line")->required();
  bv->add_option("--out", bv_out, "vocab file to write")->required();
  bv->add_option("--min-count", bv_min_count, "frequency threshold");
  bv->add_option("--n-virtual", bv_virtual, "reserved virtual-token slots");
  bv->callback([&] { cmd_build_vocab(bv_corpus, bv_out, bv_min_count, bv_virtual); });

  auto* pre = app.add_subcommand("pretrain", "masked-LM warmup, writes a checkpoint");
  add_config(pre);
  pre->callback([&] { cmd_pretrain(load_cfg(config_path, overrides)); });

  auto* tr = app.add_subcommand("train", "two-phase training over the K x seed grid");
  add_config(tr);
  tr->callback([&] { emit(run_train(load_cfg(config_path, overrides))); });

  auto* ev = app.add_subcommand("eval", "evaluate trained runs, write metric reports");
  add_config(ev);
  ev->callback([&] { emit(run_eval(load_cfg(config_path, overrides))); });

  auto* ab = app.add_subcommand("ablate", "train and score the 2x2 knowledge-injection grid");
  add_config(ab);
  ab->callback([&] { cmd_ablate(load_cfg(config_path, overrides)); });

  int ip_index = 0;
  auto* ip = app.add_subcommand("inspect-prompt", "show one assembled prompt as JSON");
  add_config(ip);
  ip->add_option("--index", ip_index, "dataset row to assemble");
  ip->callback([&] {
    const ExperimentConfig cfg = load_cfg(config_path, overrides);
    const PreparedInstance pi = prepare_example(cfg, ip_index);
    emit(describe_prompt(pi.seq, load_vocab(cfg.paths.vocab)));
  });

  int im_index = 0;
  bool im_demo = false;
  auto* im = app.add_subcommand("inspect-mask", "render a prompt's visibility grid");
  im->add_option("--config", config_path, "experiment config JSON");
  im->add_option("--set", overrides, "dotted-path override");
  im->add_option("--index", im_index, "dataset row to assemble");
  im->add_flag("--demo", im_demo, "use the built-in five-position example");
  im->callback([&] {
    if (im_demo) {
      cmd_inspect_mask(nullptr, 0, true);
    } else {
      if (config_path.empty()) throw UsageError("inspect-mask needs --config or --demo");
      const ExperimentConfig cfg = load_cfg(config_path, overrides);
      cmd_inspect_mask(&cfg, im_index, false);
    }
  });

  int nt_k = -1, nt_index = 0, nt_top = 5;
  std::uint64_t nt_seed = 0;
  bool nt_seed_set = false;
  auto* nt = app.add_subcommand("nearest-tokens", "cosine neighbors of trained virtual tokens");
  add_config(nt);
  nt->add_option("--k", nt_k, "K of the run to load (default: first of k_list)");
  nt->add_option("--seed", nt_seed, "seed of the run to load (default: first of seeds)")
      ->each([&](const std::string&) { nt_seed_set = true; });
  nt->add_option("--index", nt_index, "dataset row to assemble");
  nt->add_option("--top", nt_top, "neighbors per virtual token");
  nt->callback([&] {
    const ExperimentConfig cfg = load_cfg(config_path, overrides);
    const int k = nt_k > 0 ? nt_k : cfg.k_list.front();
    const std::uint64_t seed = nt_seed_set ? nt_seed : cfg.seeds.front();
    cmd_nearest(cfg, k, seed, nt_index, nt_top);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("UsageError", e.what(), 2);
  } catch (const ConfigError& e) {
    return fail("ConfigError", e.what(), 3);
  } catch (const UsageError& e) {
    return fail("UsageError", e.what(), 2);
  } catch (const FormatError& e) {
    return fail("FormatError", e.what(), 1);
  } catch (const ValidationError& e) {
    return fail("ValidationError", e.what(), 1);
  } catch (const NumericalError& e) {
    return fail("NumericalError", e.what(), 1);
  } catch (const Error& e) {
    return fail("RuntimeError", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("RuntimeError", e.what(), 1);
  }
  return 0;
}

}  // namespace ontofuse
