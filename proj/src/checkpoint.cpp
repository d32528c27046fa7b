#include "ontofuse/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "ontofuse/errors.hpp"
#include "ontofuse/hash.hpp"

namespace ontofuse {

namespace {

using nlohmann::json;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError("checkpoint truncated in header length");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

json config_to_json(const ModelConfig& cfg) {
  return json{{"vocab_size", cfg.vocab_size}, {"n_virtual", cfg.n_virtual},
              {"d_model", cfg.d_model},       {"n_layers", cfg.n_layers},
              {"n_heads", cfg.n_heads},       {"d_ff", cfg.d_ff},
              {"max_len", cfg.max_len},       {"dropout", cfg.dropout},
              {"seed", cfg.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.n_virtual = j.at("n_virtual").get<int>();
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_layers = j.at("n_layers").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.d_ff = j.at("d_ff").get<int>();
  cfg.max_len = j.at("max_len").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, MlmModel& model, std::uint64_t vocab_hash) {
  const auto views = model.params(Restrict::All);
  json header;
  header["config"] = config_to_json(model.cfg);
  header["vocab_hash"] = to_hex(vocab_hash);
  json dir = json::array();
  for (const auto& v : views) {
    dir.push_back(json{{"name", v.name},
                       {"rows", v.rows},
                       {"cols", v.cols},
                       {"phase1", v.phase1},
                       {"no_decay", v.no_decay}});
  }
  header["tensors"] = std::move(dir);
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  const char version = static_cast<char>(kCheckpointVersion);
  out.write(&version, 1);
  put_u32(out, static_cast<std::uint32_t>(head.size()));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& v : views) {
    out.write(reinterpret_cast<const char*>(v.w),
              static_cast<std::streamsize>(v.size() * static_cast<std::int64_t>(sizeof(double))));
  }
  if (!out) throw ConfigError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  char version = 0;
  in.read(&version, 1);
  if (!in) throw FormatError("checkpoint truncated before version byte");
  if (static_cast<unsigned char>(version) != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(static_cast<int>(version)) +
                      " not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t head_len = get_u32(in);
  std::string head(head_len, '\0');
  in.read(head.data(), head_len);
  if (!in) throw FormatError("checkpoint truncated in header");

  json header;
  try {
    header = json::parse(head);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.model = MlmModel::init(config_from_json(header.at("config")));
    bool hex_ok = false;
    ck.vocab_hash = from_hex(header.at("vocab_hash").get<std::string>(), &hex_ok);
    if (!hex_ok) throw FormatError("checkpoint vocab hash is not 16 hex digits");

    // materialize overlay rows named in the directory before resolving views
    for (const auto& t : header.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      if (name.rfind("overlay.", 0) != 0) continue;
      const std::uint64_t key = from_hex(name.substr(8), &hex_ok);
      if (!hex_ok) throw FormatError("overlay tensor with malformed key: " + name);
      const int rows = t.at("rows").get<int>();
      const int cols = t.at("cols").get<int>();
      ck.model.overlay.emplace(key, Matd::Zero(rows, cols));
      ck.model.g_overlay.emplace(key, Matd::Zero(rows, cols));
    }

    std::map<std::string, ParamView> by_name;
    for (const auto& v : ck.model.params(Restrict::All)) by_name.emplace(v.name, v);
    if (header.at("tensors").size() != by_name.size()) {
      throw ValidationError("checkpoint tensor directory does not cover the parameter set");
    }
    for (const auto& t : header.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      auto it = by_name.find(name);
      if (it == by_name.end()) throw ValidationError("unknown tensor in checkpoint: " + name);
      const ParamView& v = it->second;
      if (t.at("rows").get<int>() != v.rows || t.at("cols").get<int>() != v.cols) {
        throw ValidationError("tensor shape mismatch for " + name);
      }
      if (t.at("phase1").get<bool>() != v.phase1 || t.at("no_decay").get<bool>() != v.no_decay) {
        throw ValidationError("partition tag mismatch for " + name);
      }
      in.read(reinterpret_cast<char*>(v.w),
              static_cast<std::streamsize>(v.size() * static_cast<std::int64_t>(sizeof(double))));
      if (!in) throw FormatError("checkpoint truncated in payload of " + name);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header malformed: ") + e.what());
  }
  in.peek();
  if (!in.eof()) throw FormatError("checkpoint has trailing bytes");
  return ck;
}

}  // namespace ontofuse
