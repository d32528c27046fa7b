#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ontofuse/ontology.hpp"
#include "ontofuse/tokenizer.hpp"

namespace ontofuse {

struct Span {
  int start = 0;  // token index into input_tokens, inclusive
  int end = 0;    // exclusive
  std::string role;
};

struct TaskInstance {
  std::vector<int> input_tokens;
  std::vector<Span> spans;
  int gold_label = -1;  // -1: unlabeled
  std::map<int, std::vector<std::string>> concept_links;  // span index -> concept ids
};

enum class SegmentKind { Input, Template, Ontology };

struct Segment {
  SegmentKind kind = SegmentKind::Template;
  int k = -1;  // ontology segment id, valid only for Ontology
  bool operator==(const Segment&) const = default;
};

struct SpanLink {
  int pos = 0;  // anchor position p_k in the assembled sequence
  int segment = 0;
};

struct PromptSequence {
  std::vector<int> tokens;
  std::vector<Segment> segments;  // one label per token
  int mask_pos = -1;
  std::vector<SpanLink> span_links;
  std::vector<int> virtual_positions;
  std::vector<int> ontology_token_slots;
  // Per ontology segment id: first position, length, and the content hash of
  // its rendered token ids used to key the model's embedding overlay.
  std::vector<int> ontology_begin;
  std::vector<int> ontology_len;
  std::vector<std::uint64_t> ontology_hash;

  int size() const { return static_cast<int>(tokens.size()); }
  int ontology_segment_count() const { return static_cast<int>(ontology_begin.size()); }
};

struct Verbalizer {
  std::vector<std::vector<int>> label_tokens;  // class id -> V_y
  int num_classes() const { return static_cast<int>(label_tokens.size()); }
};

enum class SpanAnchor { First, All };

// Layout: [CLS] input [SEP] template [SEP] onto_1 [SEP] ... onto_m [SEP].
// Ontology texts over budget are trimmed longest-first (meta texts last);
// segments trimmed to nothing are dropped. Input or template overflow is a
// length error.
PromptSequence assemble_prompt(const TaskInstance& instance, const std::vector<int>& task_template,
                               const std::vector<OntologyText>& ontology_texts, const Vocab& vocab,
                               int max_len, SpanAnchor anchor = SpanAnchor::First);

// Places n_left virtual tokens immediately before the mask and n_right after,
// consuming the vocab's virtual block in order; all recorded positions are
// re-indexed.
PromptSequence insert_virtual_tokens(const PromptSequence& seq, int n_left, int n_right,
                                     const Vocab& vocab);

Verbalizer build_verbalizer(const std::vector<std::vector<std::string>>& label_words,
                            const Vocab& vocab);

void validate_prompt(const PromptSequence& seq, const Vocab& vocab);

}  // namespace ontofuse
