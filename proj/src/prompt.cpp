#include "ontofuse/prompt.hpp"

#include <algorithm>

#include "ontofuse/errors.hpp"
#include "ontofuse/hash.hpp"

namespace ontofuse {

namespace {

void check_instance(const TaskInstance& instance) {
  const int L = static_cast<int>(instance.input_tokens.size());
  for (const auto& s : instance.spans) {
    if (s.start < 0 || s.end < s.start || s.end > L) {
      throw ValidationError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                            ") outside input of length " + std::to_string(L));
    }
  }
  for (const auto& [idx, concepts] : instance.concept_links) {
    if (idx < 0 || idx >= static_cast<int>(instance.spans.size())) {
      throw ValidationError("concept link refers to missing span " + std::to_string(idx));
    }
    (void)concepts;
  }
}

}  // namespace

PromptSequence assemble_prompt(const TaskInstance& instance, const std::vector<int>& task_template,
                               const std::vector<OntologyText>& ontology_texts, const Vocab& vocab,
                               int max_len, SpanAnchor anchor) {
  check_instance(instance);
  const int mask_id = vocab.mask_id;
  const int n_mask = static_cast<int>(
      std::count(task_template.begin(), task_template.end(), mask_id));
  if (n_mask != 1) {
    throw TemplateError("template must contain exactly one [MASK], found " +
                        std::to_string(n_mask));
  }
  if (std::count(instance.input_tokens.begin(), instance.input_tokens.end(), mask_id) > 0) {
    throw TemplateError("input text may not contain [MASK]");
  }

  const int L = static_cast<int>(instance.input_tokens.size());
  const int T = static_cast<int>(task_template.size());
  const int base_len = 1 + L + 1 + T + 1;
  if (base_len > max_len) {
    throw LengthError("input and template need " + std::to_string(base_len) +
                      " tokens, max_len is " + std::to_string(max_len));
  }

  // Working lengths for truncation; empty texts are dropped outright.
  std::vector<int> keep;
  std::vector<int> len;
  for (int i = 0; i < static_cast<int>(ontology_texts.size()); ++i) {
    if (!ontology_texts[static_cast<std::size_t>(i)].rendered.empty()) {
      keep.push_back(i);
      len.push_back(static_cast<int>(ontology_texts[static_cast<std::size_t>(i)].rendered.size()));
    }
  }
  auto total = [&]() {
    int t = base_len;
    for (int l : len) {
      if (l > 0) t += l + 1;
    }
    return t;
  };
  while (total() > max_len) {
    int victim = -1;
    for (int pass = 0; pass < 2 && victim < 0; ++pass) {
      const bool want_meta = pass == 1;  // plain texts trimmed before meta texts
      for (int i = 0; i < static_cast<int>(keep.size()); ++i) {
        const auto& ot = ontology_texts[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])];
        if (ot.is_meta != want_meta || len[static_cast<std::size_t>(i)] == 0) continue;
        if (victim < 0 || len[static_cast<std::size_t>(i)] >= len[static_cast<std::size_t>(victim)]) {
          victim = i;
        }
      }
    }
    if (victim < 0) break;  // unreachable: base_len already fits
    --len[static_cast<std::size_t>(victim)];
  }

  PromptSequence seq;
  auto push = [&seq](int id, Segment seg) {
    seq.tokens.push_back(id);
    seq.segments.push_back(seg);
  };
  const Segment tmpl_seg{SegmentKind::Template, -1};
  const Segment input_seg{SegmentKind::Input, -1};

  push(vocab.cls_id, tmpl_seg);
  for (int id : instance.input_tokens) push(id, input_seg);
  push(vocab.sep_id, tmpl_seg);
  for (int id : task_template) {
    if (id == mask_id) seq.mask_pos = seq.size();
    push(id, tmpl_seg);
  }
  push(vocab.sep_id, tmpl_seg);

  for (int i = 0; i < static_cast<int>(keep.size()); ++i) {
    if (len[static_cast<std::size_t>(i)] == 0) continue;
    const auto& ot = ontology_texts[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])];
    const int k = seq.ontology_segment_count();
    std::vector<int> ids(ot.rendered.begin(),
                         ot.rendered.begin() + len[static_cast<std::size_t>(i)]);
    seq.ontology_begin.push_back(seq.size());
    seq.ontology_len.push_back(static_cast<int>(ids.size()));
    seq.ontology_hash.push_back(fnv1a(ids));
    for (int id : ids) {
      seq.ontology_token_slots.push_back(seq.size());
      push(id, Segment{SegmentKind::Ontology, k});
    }
    push(vocab.sep_id, tmpl_seg);
    for (int span_idx : ot.linked_spans) {
      if (span_idx < 0 || span_idx >= static_cast<int>(instance.spans.size())) {
        throw ValidationError("ontology text linked to missing span " + std::to_string(span_idx));
      }
      const Span& sp = instance.spans[static_cast<std::size_t>(span_idx)];
      if (sp.start == sp.end) throw ValidationError("ontology text linked to empty span");
      if (anchor == SpanAnchor::First) {
        seq.span_links.push_back({1 + sp.start, k});
      } else {
        for (int t = sp.start; t < sp.end; ++t) seq.span_links.push_back({1 + t, k});
      }
    }
  }
  validate_prompt(seq, vocab);
  return seq;
}

PromptSequence insert_virtual_tokens(const PromptSequence& seq, int n_left, int n_right,
                                     const Vocab& vocab) {
  if (n_left < 0 || n_right < 0) throw ConfigError("virtual token counts must be >= 0");
  if (n_left + n_right > vocab.virtual_count()) {
    throw ConfigError("virtual budget exceeded: need " + std::to_string(n_left + n_right) +
                      ", vocab has " + std::to_string(vocab.virtual_count()));
  }
  if (!seq.virtual_positions.empty()) throw ConfigError("virtual tokens already inserted");
  if (n_left + n_right == 0) return seq;

  const int m = seq.mask_pos;
  auto remap = [m, n_left, n_right](int p) {
    if (p < m) return p;
    if (p == m) return p + n_left;
    return p + n_left + n_right;
  };

  PromptSequence out;
  const Segment tmpl_seg{SegmentKind::Template, -1};
  for (int p = 0; p < seq.size(); ++p) {
    if (p == m) {
      for (int j = 0; j < n_left; ++j) {
        out.virtual_positions.push_back(out.size() + j);
      }
      for (int j = 0; j < n_left; ++j) {
        out.tokens.push_back(vocab.virtual_begin + j);
        out.segments.push_back(tmpl_seg);
      }
      out.tokens.push_back(seq.tokens[static_cast<std::size_t>(p)]);
      out.segments.push_back(seq.segments[static_cast<std::size_t>(p)]);
      for (int j = 0; j < n_right; ++j) {
        out.virtual_positions.push_back(out.size());
        out.tokens.push_back(vocab.virtual_begin + n_left + j);
        out.segments.push_back(tmpl_seg);
      }
    } else {
      out.tokens.push_back(seq.tokens[static_cast<std::size_t>(p)]);
      out.segments.push_back(seq.segments[static_cast<std::size_t>(p)]);
    }
  }
  out.mask_pos = m + n_left;
  for (const auto& link : seq.span_links) out.span_links.push_back({remap(link.pos), link.segment});
  for (int p : seq.ontology_token_slots) out.ontology_token_slots.push_back(remap(p));
  for (int b : seq.ontology_begin) out.ontology_begin.push_back(remap(b));
  out.ontology_len = seq.ontology_len;
  out.ontology_hash = seq.ontology_hash;
  validate_prompt(out, vocab);
  return out;
}

Verbalizer build_verbalizer(const std::vector<std::vector<std::string>>& label_words,
                            const Vocab& vocab) {
  Verbalizer v;
  std::vector<char> seen(static_cast<std::size_t>(vocab.size()), 0);
  for (std::size_t y = 0; y < label_words.size(); ++y) {
    if (label_words[y].empty()) {
      throw ConfigError("verbalizer class " + std::to_string(y) + " has no label words");
    }
    std::vector<int> ids;
    for (const auto& w : label_words[y]) {
      auto it = vocab.index.find(w);
      if (it == vocab.index.end()) throw ConfigError("label word not in vocab: " + w);
      const int id = it->second;
      if (vocab.is_special(id) || vocab.is_virtual(id)) {
        throw ConfigError("label word may not be special or virtual: " + w);
      }
      if (seen[static_cast<std::size_t>(id)]) {
        throw ConfigError("label word used by two classes: " + w);
      }
      seen[static_cast<std::size_t>(id)] = 1;
      ids.push_back(id);
    }
    v.label_tokens.push_back(std::move(ids));
  }
  return v;
}

void validate_prompt(const PromptSequence& seq, const Vocab& vocab) {
  if (seq.tokens.size() != seq.segments.size()) {
    throw ContractViolation("prompt tokens and segment labels differ in length");
  }
  if (seq.mask_pos < 0 || seq.mask_pos >= seq.size() ||
      seq.tokens[static_cast<std::size_t>(seq.mask_pos)] != vocab.mask_id) {
    throw ContractViolation("mask_pos does not point at [MASK]");
  }
  int masks = 0;
  for (int id : seq.tokens) masks += id == vocab.mask_id;
  if (masks != 1) throw ContractViolation("prompt must contain exactly one [MASK]");
  const int n_onto = seq.ontology_segment_count();
  for (const auto& link : seq.span_links) {
    if (link.pos < 0 || link.pos >= seq.size() ||
        seq.segments[static_cast<std::size_t>(link.pos)].kind != SegmentKind::Input) {
      throw ContractViolation("span link anchor is not an input position");
    }
    if (link.segment < 0 || link.segment >= n_onto) {
      throw ContractViolation("span link names a missing ontology segment");
    }
  }
  for (int p : seq.virtual_positions) {
    if (p < 0 || p >= seq.size() ||
        seq.segments[static_cast<std::size_t>(p)].kind != SegmentKind::Template ||
        !vocab.is_virtual(seq.tokens[static_cast<std::size_t>(p)])) {
      throw ContractViolation("virtual position is not a template-segment virtual token");
    }
  }
  for (int k = 0; k < n_onto; ++k) {
    const int b = seq.ontology_begin[static_cast<std::size_t>(k)];
    const int l = seq.ontology_len[static_cast<std::size_t>(k)];
    if (b < 0 || l <= 0 || b + l > seq.size()) {
      throw ContractViolation("ontology segment bounds out of range");
    }
    for (int p = b; p < b + l; ++p) {
      if (seq.segments[static_cast<std::size_t>(p)] != Segment{SegmentKind::Ontology, k}) {
        throw ContractViolation("ontology segment labels inconsistent");
      }
    }
  }
}

}  // namespace ontofuse
