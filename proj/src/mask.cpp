#include "ontofuse/mask.hpp"

namespace ontofuse {

VisibilityMatrix build_visibility_matrix(const PromptSequence& seq, bool symmetrize,
                                         bool template_sees_ontology) {
  const int n = seq.size();
  VisibilityMatrix m;
  m.visible = BoolGrid::Constant(n, n, false);

  auto group_of = [&seq](int p) {
    const Segment& s = seq.segments[static_cast<std::size_t>(p)];
    return s.kind == SegmentKind::Ontology ? s.k : -1;  // -1: Input or Template side
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (group_of(i) == group_of(j)) m.visible(i, j) = true;
    }
  }
  for (const auto& link : seq.span_links) {
    const int b = seq.ontology_begin[static_cast<std::size_t>(link.segment)];
    const int l = seq.ontology_len[static_cast<std::size_t>(link.segment)];
    for (int j = b; j < b + l; ++j) {
      m.visible(link.pos, j) = true;
      if (symmetrize) m.visible(j, link.pos) = true;
    }
  }
  if (template_sees_ontology) {
    for (int i = 0; i < n; ++i) {
      if (seq.segments[static_cast<std::size_t>(i)].kind != SegmentKind::Template) continue;
      for (int j = 0; j < n; ++j) {
        if (seq.segments[static_cast<std::size_t>(j)].kind != SegmentKind::Ontology) continue;
        m.visible(i, j) = true;
        if (symmetrize) m.visible(j, i) = true;
      }
    }
  }
  return m;
}

Matd to_additive_bias(const VisibilityMatrix& matrix) {
  const int n = matrix.size();
  Matd bias = Matd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!matrix.visible(i, j)) bias(i, j) = kNegBlock;
    }
  }
  return bias;
}

std::string render_grid(const VisibilityMatrix& matrix) {
  std::string out;
  const int n = matrix.size();
  out.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n + 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out += matrix.visible(i, j) ? '#' : '.';
    out += '\n';
  }
  return out;
}

}  // namespace ontofuse
