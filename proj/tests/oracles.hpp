// Independent brute-force reference implementations used only by tests.
// Each oracle restates the target rule in the most literal form available so
// test failures localize to the production implementation.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace oracles {

// ---- graph paths -----------------------------------------------------------

struct UEdge {
  int u, v;
  std::string label;
};

// Enumerates every simple path between a and b and returns the minimal
// (length, label sequence) pair, or nullopt when disconnected.
inline std::optional<std::vector<std::string>> best_path_labels(int n,
                                                                const std::vector<UEdge>& edges,
                                                                int a, int b) {
  if (a == b) return std::vector<std::string>{};
  std::optional<std::vector<std::string>> best;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<std::string> labels;
  std::function<void(int)> dfs = [&](int cur) {
    if (cur == b) {
      if (!best || labels.size() < best->size() ||
          (labels.size() == best->size() && labels < *best)) {
        best = labels;
      }
      return;
    }
    if (best && labels.size() >= best->size()) return;  // only longer from here
    used[static_cast<std::size_t>(cur)] = 1;
    for (const auto& e : edges) {
      int nxt = -1;
      if (e.u == cur) nxt = e.v;
      if (e.v == cur) nxt = e.u;
      if (nxt < 0 || used[static_cast<std::size_t>(nxt)]) continue;
      labels.push_back(e.label);
      dfs(nxt);
      labels.pop_back();
    }
    used[static_cast<std::size_t>(cur)] = 0;
  };
  dfs(a);
  return best;
}

// ---- visibility rule (four-case enumeration) -------------------------------

// group[i]: -1 for the input side (Input or Template), k >= 0 for ontology
// segment k. links: (anchor position, segment). Evaluates the four rule cases
// literally and independently for every (i, j).
// Evaluates the four rule cases for every (i, j) and hands both the
// asymmetric and the symmetrized verdict to the sink as
// sink(i, j, visible_asym, visible_sym). The link existentials are memoized
// into a position-by-segment table up front; the rule itself is unchanged.
template <typename Sink>
inline void visibility_by_rules_each(const std::vector<int>& group,
                                     const std::vector<std::pair<int, int>>& links, Sink&& sink) {
  const int n = static_cast<int>(group.size());
  int m = 0;
  for (int g : group) m = std::max(m, g + 1);
  // linked[p * m + k] holds iff some link (p, k) exists
  std::vector<char> linked(static_cast<std::size_t>(n) * static_cast<std::size_t>(std::max(m, 1)),
                           0);
  for (const auto& [p, k] : links) {
    linked[static_cast<std::size_t>(p) * static_cast<std::size_t>(m) +
           static_cast<std::size_t>(k)] = 1;
  }
  for (int i = 0; i < n; ++i) {
    const int gi = group[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      const int gj = group[static_cast<std::size_t>(j)];
      const bool both_x = gi == -1 && gj == -1;
      const bool same_onto = gi >= 0 && gi == gj;
      const bool anchor =
          gj >= 0 && linked[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
                            static_cast<std::size_t>(gj)] != 0;
      const bool mirror =
          gi >= 0 && linked[static_cast<std::size_t>(j) * static_cast<std::size_t>(m) +
                            static_cast<std::size_t>(gi)] != 0;
      const bool asym = both_x || same_onto || anchor;
      sink(i, j, asym, asym || mirror);
    }
  }
}

inline std::vector<std::vector<bool>> visibility_by_rules(
    const std::vector<int>& group, const std::vector<std::pair<int, int>>& links,
    bool symmetrize) {
  const int n = static_cast<int>(group.size());
  std::vector<std::vector<bool>> m(static_cast<std::size_t>(n),
                                   std::vector<bool>(static_cast<std::size_t>(n), false));
  visibility_by_rules_each(group, links, [&](int i, int j, bool asym, bool sym) {
    m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = symmetrize ? sym : asym;
  });
  return m;
}

// ---- verbalizer aggregation -------------------------------------------------

// Per-token softmax followed by per-class summation, written element by
// element with no shared code.
inline std::vector<double> class_scores_by_summation(const std::vector<double>& logits,
                                                     const std::vector<std::vector<int>>& vy) {
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double denom = 0.0;
  for (double z : logits) denom += std::exp(z - mx);
  std::vector<double> out;
  for (const auto& cls : vy) {
    double s = 0.0;
    for (int w : cls) s += std::exp(logits[static_cast<std::size_t>(w)] - mx) / denom;
    out.push_back(s);
  }
  return out;
}

// ---- classification metric --------------------------------------------------

// Walks the confusion cells one prediction at a time.
inline double micro_f1_by_counting(const std::vector<int>& preds, const std::vector<int>& golds,
                                   int negative_class) {
  int tp = 0, pred_pos = 0, gold_pos = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p_pos = preds[i] != negative_class;
    const bool g_pos = golds[i] != negative_class;
    if (p_pos) ++pred_pos;
    if (g_pos) ++gold_pos;
    if (p_pos && g_pos && preds[i] == golds[i]) ++tp;
  }
  const double precision = pred_pos == 0 ? 0.0 : static_cast<double>(tp) / pred_pos;
  const double recall = gold_pos == 0 ? 0.0 : static_cast<double>(tp) / gold_pos;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

inline double accuracy_by_counting(const std::vector<int>& preds, const std::vector<int>& golds) {
  if (preds.empty()) return 0.0;
  int ok = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) ok += preds[i] == golds[i];
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

// ---- ranking ----------------------------------------------------------------

// Sorts candidates by score descending and places gold after all ties.
inline int pessimistic_rank_by_sorting(const std::vector<double>& scores, int gold) {
  int rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (static_cast<int>(i) == gold) continue;
    if (scores[i] >= scores[static_cast<std::size_t>(gold)]) ++rank;
  }
  return rank;
}

}  // namespace oracles
