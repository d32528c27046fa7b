#pragma once

#include <string>

#include "ontofuse/prompt.hpp"
#include "ontofuse/types.hpp"

namespace ontofuse {

struct VisibilityMatrix {
  BoolGrid visible;
  int size() const { return static_cast<int>(visible.rows()); }
};

// visible[i][j] holds iff i and j are both input-side (Input or Template), or
// both in the same ontology segment, or i is a span anchor linked to j's
// segment (mirrored when symmetrize). template_sees_ontology additionally
// lets every template position attend every ontology position.
VisibilityMatrix build_visibility_matrix(const PromptSequence& seq, bool symmetrize,
                                         bool template_sees_ontology = false);

// 0 where visible, -1e9 where blocked; blocked attention underflows to zero
// after the row-max-shifted softmax in double precision.
Matd to_additive_bias(const VisibilityMatrix& matrix);

// Text grid with '#' for visible and '.' for blocked, one row per line.
std::string render_grid(const VisibilityMatrix& matrix);

}  // namespace ontofuse
