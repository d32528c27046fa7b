#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ontofuse {

// Word-level vocabulary with dense 0-based ids. Layout is fixed:
//   0..4            [PAD] [UNK] [CLS] [SEP] [MASK]
//   5..5+n_virtual  [u1] .. [uN]   (reserved slots, never produced by tokenize)
//   rest            corpus tokens, frequency descending, ties lexicographic
// Immutable after construction; safe for concurrent reads.
struct Vocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  int pad_id = 0;
  int unk_id = 1;
  int cls_id = 2;
  int sep_id = 3;
  int mask_id = 4;
  int virtual_begin = 5;  // [virtual_begin, virtual_end)
  int virtual_end = 5;

  int size() const { return static_cast<int>(tokens.size()); }
  int virtual_count() const { return virtual_end - virtual_begin; }
  bool is_special(int id) const { return id >= 0 && id < virtual_begin; }
  bool is_virtual(int id) const { return id >= virtual_begin && id < virtual_end; }

  // Id for a known token; throws LookupError for unknown ones.
  int id_of(const std::string& token) const;
  const std::string& token_of(int id) const;

  // Fingerprint over the full token list; stored in checkpoints so a model
  // can refuse a mismatched vocabulary.
  std::uint64_t content_hash() const;
};

// Split text into word-level pieces: lowercased alphanumeric/underscore runs
// and single punctuation characters. Chunks that literally spell a special
// token ("[MASK]", case-insensitive) stay whole.
std::vector<std::string> split_words(const std::string& text);

// Frequency-threshold vocabulary over a corpus of documents.
// min_count >= 1, n_virtual >= 0; throws ConfigError on an empty corpus.
Vocab build_vocab(const std::vector<std::string>& corpus, int min_count, int n_virtual);

// Total function: OOV words map to UNK, literal special-token strings map to
// their ids. Never emits an id from the virtual block.
std::vector<int> tokenize(const std::string& text, const Vocab& vocab);

// Space-joined inverse of tokenize (round-trips up to whitespace
// normalization for in-vocabulary text).
std::string detokenize(const std::vector<int>& ids, const Vocab& vocab);

// One token per line, line number = id.
void save_vocab(const Vocab& vocab, const std::string& path);
Vocab load_vocab(const std::string& path);

}  // namespace ontofuse
