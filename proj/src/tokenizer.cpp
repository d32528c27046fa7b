#include "ontofuse/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "ontofuse/errors.hpp"
#include "ontofuse/hash.hpp"

namespace ontofuse {

namespace {

const char* kSpecialNames[] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string to_upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) || c == '_'; }

int special_index(const std::string& chunk) {
  const std::string up = to_upper(chunk);
  for (int i = 0; i < 5; ++i) {
    if (up == kSpecialNames[i]) return i;
  }
  return -1;
}

std::string virtual_name(int k) { return "[u" + std::to_string(k + 1) + "]"; }

}  // namespace

int Vocab::id_of(const std::string& token) const {
  auto it = index.find(token);
  if (it == index.end()) throw LookupError("unknown token: " + token);
  return it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || id >= size()) throw LookupError("token id out of range: " + std::to_string(id));
  return tokens[static_cast<std::size_t>(id)];
}

std::uint64_t Vocab::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const char nl = '\n';
  for (const auto& t : tokens) {
    h = fnv1a(std::string_view(t), h);
    h = fnv1a_bytes(&nl, 1, h);
  }
  return h;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string chunk;
  while (in >> chunk) {
    if (special_index(chunk) >= 0) {
      out.push_back(to_upper(chunk));
      continue;
    }
    std::size_t i = 0;
    while (i < chunk.size()) {
      const auto c = static_cast<unsigned char>(chunk[i]);
      if (is_word_char(c)) {
        std::size_t j = i;
        while (j < chunk.size() && is_word_char(static_cast<unsigned char>(chunk[j]))) ++j;
        out.push_back(to_lower(chunk.substr(i, j - i)));
        i = j;
      } else if (std::isspace(c)) {
        ++i;
      } else {
        out.push_back(chunk.substr(i, 1));
        ++i;
      }
    }
  }
  return out;
}

Vocab build_vocab(const std::vector<std::string>& corpus, int min_count, int n_virtual) {
  if (corpus.empty()) throw ConfigError("build_vocab: empty corpus");
  if (min_count < 1) throw ConfigError("build_vocab: min_count must be >= 1");
  if (n_virtual < 0) throw ConfigError("build_vocab: n_virtual must be >= 0");

  std::map<std::string, long> counts;
  for (const auto& doc : corpus) {
    for (const auto& w : split_words(doc)) {
      if (special_index(w) >= 0) continue;  // literal specials never become corpus tokens
      ++counts[w];
    }
  }

  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, c] : counts) {
    if (c >= min_count) kept.emplace_back(tok, c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  for (const char* s : kSpecialNames) v.tokens.emplace_back(s);
  v.virtual_begin = 5;
  for (int k = 0; k < n_virtual; ++k) v.tokens.push_back(virtual_name(k));
  v.virtual_end = 5 + n_virtual;
  for (const auto& [tok, c] : kept) v.tokens.push_back(tok);

  for (int i = 0; i < v.size(); ++i) v.index.emplace(v.tokens[static_cast<std::size_t>(i)], i);
  return v;
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) {
    const int sp = special_index(w);
    if (sp >= 0) {
      ids.push_back(sp);
      continue;
    }
    auto it = vocab.index.find(w);
    if (it == vocab.index.end() || vocab.is_virtual(it->second)) {
      ids.push_back(vocab.unk_id);
    } else {
      ids.push_back(it->second);
    }
  }
  return ids;
}

std::string detokenize(const std::vector<int>& ids, const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token_of(ids[i]);
  }
  return out;
}

void save_vocab(const Vocab& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open vocab file for writing: " + path);
  for (const auto& t : vocab.tokens) out << t << '\n';
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open vocab file: " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.tokens.push_back(line);
  }
  if (v.tokens.size() < 5) throw FormatError("vocab file too short: " + path);
  for (int i = 0; i < 5; ++i) {
    if (v.tokens[static_cast<std::size_t>(i)] != kSpecialNames[i]) {
      throw FormatError("vocab file line " + std::to_string(i) + " must be " +
                        std::string(kSpecialNames[i]));
    }
  }
  v.virtual_begin = 5;
  int k = 0;
  while (5 + k < v.size() && v.tokens[static_cast<std::size_t>(5 + k)] == virtual_name(k)) ++k;
  v.virtual_end = 5 + k;
  for (int i = 0; i < v.size(); ++i) {
    if (!v.index.emplace(v.tokens[static_cast<std::size_t>(i)], i).second) {
      throw FormatError("duplicate token at line " + std::to_string(i) + ": " +
                        v.tokens[static_cast<std::size_t>(i)]);
    }
  }
  return v;
}

}  // namespace ontofuse
