#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "ontofuse/cli.hpp"

using namespace ontofuse;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Capture {
  std::ostringstream out, err;
  std::streambuf* old_out;
  std::streambuf* old_err;
  Capture() : old_out(std::cout.rdbuf(out.rdbuf())), old_err(std::cerr.rdbuf(err.rdbuf())) {}
  ~Capture() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
};

int call(const std::vector<std::string>& args, std::string* out = nullptr,
         std::string* err = nullptr) {
  std::vector<std::string> full = {"ontofuse"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : full) argv.push_back(a.data());
  Capture cap;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  if (out) *out = cap.out.str();
  if (err) *err = cap.err.str();
  return code;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kDir = "/tmp/ontofuse_cli_test";

// Tiny override set shared by the pipeline tests so runs finish in
// milliseconds.
std::vector<std::string> tiny(const std::string& config) {
  return {"--config",
          kDir + "/" + config,
          "--set",
          "k_list=[2]",
          "--set",
          "seeds=[1]",
          "--set",
          "model.d_model=16",
          "--set",
          "model.d_ff=24",
          "--set",
          "train.phase1_max_steps=2",
          "--set",
          "train.phase2_max_steps=2",
          "--set",
          "train.eval_every=1",
          "--set",
          "train.batch_size=4"};
}

std::vector<std::string> with(std::vector<std::string> args, const std::string& cmd) {
  args.insert(args.begin(), cmd);
  return args;
}

void setup_data_once() {
  static bool done = false;
  if (done) return;
  fs::remove_all(kDir);
  REQUIRE(call({"gen-data", "--out", kDir, "--seed", "5"}) == 0);
  REQUIRE(call({"build-vocab", "--corpus", kDir + "/corpus.txt", "--out", kDir + "/vocab.txt",
                "--n-virtual", "2"}) == 0);
  done = true;
}

}  // namespace

TEST_CASE("usage errors exit 2 with a json record") {
  std::string err;
  CHECK(call({}, nullptr, &err) == 2);
  CHECK(json::parse(err).at("error") == "UsageError");

  CHECK(call({"no-such-command"}, nullptr, &err) == 2);
  CHECK(call({"train"}, nullptr, &err) == 2);  // missing required --config
  CHECK(json::parse(err).at("error") == "UsageError");

  CHECK(call({"--help"}) == 0);
}

TEST_CASE("gen-data and build-vocab write their artifacts") {
  setup_data_once();
  for (const char* f : {"corpus.txt", "ontology.json", "re.jsonl", "ee.jsonl", "kg_triples.jsonl",
                        "kg_entities.json", "kg_relations.json", "re.json", "ee.json", "kgc.json",
                        "vocab.txt"}) {
    CHECK(fs::exists(kDir + "/" + f));
  }
  // shipped configs validate as-is
  std::string out;
  CHECK(call({"inspect-prompt", "--config", kDir + "/re.json", "--index", "0"}, &out) == 0);
  CHECK(out.find("mask_pos") != std::string::npos);
  CHECK(out.find("onto:0") != std::string::npos);
}

TEST_CASE("config errors exit 3 and carry the field path") {
  setup_data_once();
  std::string err;
  CHECK(call({"train", "--config", kDir + "/re.json", "--set", "task=qa"}, nullptr, &err) == 3);
  const json rec = json::parse(err);
  CHECK(rec.at("error") == "ConfigError");
  CHECK(rec.at("message").get<std::string>().find("task") != std::string::npos);

  CHECK(call({"train", "--config", "/tmp/ontofuse_nope.json"}, nullptr, &err) == 3);
  CHECK(json::parse(err).at("error") == "ConfigError");
}

TEST_CASE("inspect-mask demo prints the five-position grid") {
  std::string out;
  CHECK(call({"inspect-mask", "--demo"}, &out) == 0);
  CHECK(out.find("###..") != std::string::npos);
  CHECK(out.find("#####") != std::string::npos);
  CHECK(std::count(out.begin(), out.end(), '#') == 15);
  CHECK(call({"inspect-mask"}, nullptr, nullptr) == 2);  // neither --demo nor --config
}

TEST_CASE("train, eval, nearest-tokens pipeline through the cli") {
  setup_data_once();
  std::string out;

  // the shipped configs read paths.init_checkpoint, so warm the encoder first
  auto warm = with(tiny("re.json"), "pretrain");
  warm.push_back("--set");
  warm.push_back("pretrain.steps=2");
  warm.push_back("--set");
  warm.push_back("pretrain.window=8");
  CHECK(call(warm, &out) == 0);
  CHECK(fs::exists(kDir + "/pretrained.bin"));

  // train without the checkpoint in place is a config error pointing at it
  std::string no_warm_err;
  auto cold = with(tiny("re.json"), "train");
  cold.push_back("--set");
  cold.push_back("paths.init_checkpoint=" + kDir + "/absent.bin");
  CHECK(call(cold, nullptr, &no_warm_err) == 3);
  CHECK(no_warm_err.find("pretrain") != std::string::npos);

  CHECK(call(with(tiny("re.json"), "train"), &out) == 0);
  CHECK(json::parse(out)[0].at("phase2").at("steps") == 2);

  CHECK(call(with(tiny("re.json"), "eval"), &out) == 0);
  const json metrics = json::parse(out);
  CHECK(metrics[0].at("K") == 2);
  CHECK(metrics[0].at("per_seed").at("micro_f1").size() == 1);

  // metric file is byte-stable across eval reruns
  json run_row = json::parse(out);
  std::string metrics_path;
  for (const auto& e : fs::recursive_directory_iterator(kDir + "/runs")) {
    if (e.path().filename() == "metrics_k2.json") metrics_path = e.path().string();
  }
  REQUIRE(!metrics_path.empty());
  const std::string before = slurp(metrics_path);
  CHECK(call(with(tiny("re.json"), "eval")) == 0);
  CHECK(slurp(metrics_path) == before);

  auto nt = with(tiny("re.json"), "nearest-tokens");
  nt.push_back("--top");
  nt.push_back("2");
  CHECK(call(nt, &out) == 0);
  const json rows = json::parse(out);
  CHECK(rows.size() == 2);  // n_left + n_right virtual slots
  CHECK(rows[0].at("neighbors").size() == 2);

  // asking for a run that was never trained stays a config error
  auto missing = with(tiny("re.json"), "nearest-tokens");
  missing.push_back("--seed");
  missing.push_back("99");
  std::string err;
  CHECK(call(missing, nullptr, &err) != 0);
}

TEST_CASE("inspect-mask renders the real prompt grid") {
  setup_data_once();
  std::string out;
  auto args = with(tiny("re.json"), "inspect-mask");
  args.push_back("--index");
  args.push_back("1");
  CHECK(call(args, &out) == 0);
  const auto nl = out.find('\n');
  REQUIRE(nl != std::string::npos);
  // square grid: row width equals row count
  const std::string first_row = out.substr(0, nl);
  const json tail = json::parse(out.substr(out.rfind('{')));
  CHECK(static_cast<int>(first_row.size()) == tail.at("positions").get<int>());
  CHECK(tail.at("visible").get<int>() > 0);
}

TEST_CASE("pretrain writes the checkpoint referenced by the config") {
  setup_data_once();
  auto args = with(tiny("re.json"), "pretrain");
  args.push_back("--set");
  args.push_back("pretrain.steps=2");
  args.push_back("--set");
  args.push_back("pretrain.batch_size=2");
  args.push_back("--set");
  args.push_back("pretrain.window=8");
  args.push_back("--set");
  args.push_back("paths.init_checkpoint=" + kDir + "/warm.bin");
  std::string out;
  CHECK(call(args, &out) == 0);
  CHECK(json::parse(out).at("checkpoint") == kDir + "/warm.bin");
  CHECK(fs::exists(kDir + "/warm.bin"));
}
