#include <doctest.h>

#include <cmath>

#include "enumerate.hpp"
#include "ontofuse/mask.hpp"
#include "ontofuse/rng.hpp"
#include "oracles.hpp"

using namespace ontofuse;

namespace {

int count_true(const VisibilityMatrix& m) {
  int n = 0;
  for (int i = 0; i < m.size(); ++i) {
    for (int j = 0; j < m.size(); ++j) n += m.visible(i, j);
  }
  return n;
}

bool matches_oracle(const VisibilityMatrix& got, const std::vector<std::vector<bool>>& want) {
  for (int i = 0; i < got.size(); ++i) {
    for (int j = 0; j < got.size(); ++j) {
      if (got.visible(i, j) !=
          want[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace

TEST_CASE("pure input sequence is all visible") {
  const auto seq = enumerate::seq_from_groups({-1, -1, -1}, {});
  const auto m = build_visibility_matrix(seq, false);
  CHECK(count_true(m) == 9);
}

TEST_CASE("five position example: anchor row opens the only cross window") {
  // 0..2 input with anchor at 1, 3..4 ontology segment 0
  const auto seq = enumerate::seq_from_groups({-1, -1, -1, 0, 0}, {{1, 0}});
  SUBCASE("asymmetric default") {
    const auto m = build_visibility_matrix(seq, false);
    // 9 input-block entries + 4 ontology-block entries + anchor row (1,3), (1,4)
    CHECK(count_true(m) == 15);
    CHECK(m.visible(1, 3));
    CHECK(m.visible(1, 4));
    CHECK_FALSE(m.visible(0, 3));
    CHECK_FALSE(m.visible(0, 4));
    CHECK_FALSE(m.visible(2, 3));
    CHECK_FALSE(m.visible(2, 4));
    CHECK_FALSE(m.visible(3, 1));
    CHECK_FALSE(m.visible(4, 1));
    for (int j = 0; j < 3; ++j) {
      CHECK_FALSE(m.visible(3, j));
      CHECK_FALSE(m.visible(4, j));
    }
  }
  SUBCASE("symmetrize mirrors the anchor window") {
    const auto m = build_visibility_matrix(seq, true);
    CHECK(count_true(m) == 17);
    CHECK(m.visible(3, 1));
    CHECK(m.visible(4, 1));
    CHECK_FALSE(m.visible(3, 0));
    CHECK_FALSE(m.visible(4, 2));
  }
}

TEST_CASE("diagonal is always visible and groups are internally complete") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + rng.uniform_int(7);
    std::vector<int> groups;
    int next = 0;
    for (int i = 0; i < n;) {
      if (rng.uniform() < 0.5) {
        groups.push_back(-1);
        ++i;
      } else {
        const int len = 1 + rng.uniform_int(std::min(3, n - i));
        for (int j = 0; j < len; ++j) groups.push_back(next);
        ++next;
        i += len;
      }
    }
    const auto seq = enumerate::seq_from_groups(groups, {});
    const auto m = build_visibility_matrix(seq, rng.uniform() < 0.5);
    for (int i = 0; i < m.size(); ++i) {
      CHECK(m.visible(i, i));
      for (int j = 0; j < m.size(); ++j) {
        if (groups[static_cast<std::size_t>(i)] == groups[static_cast<std::size_t>(j)]) {
          CHECK(m.visible(i, j));
        }
      }
    }
  }
}

TEST_CASE("rule oracle equivalence, exhaustive for short sequences") {
  for (int n = 1; n <= 5; ++n) {
    enumerate::for_each_layout(n, [&](const std::vector<int>& groups) {
      enumerate::for_each_link_set(groups, -1, [&](const std::vector<std::pair<int, int>>& links) {
        const auto seq = enumerate::seq_from_groups(groups, links);
        for (bool sym : {false, true}) {
          const auto got = build_visibility_matrix(seq, sym);
          const auto want = oracles::visibility_by_rules(groups, links, sym);
          REQUIRE(matches_oracle(got, want));
        }
      });
    });
  }
}

TEST_CASE("rule oracle equivalence on random longer configurations") {
  Rng rng(99);
  for (int trial = 0; trial < 3000; ++trial) {
    const int n = 6 + rng.uniform_int(3);  // 6..8
    std::vector<int> groups;
    int next = 0;
    for (int i = 0; i < n;) {
      if (rng.uniform() < 0.55) {
        groups.push_back(-1);
        ++i;
      } else {
        const int len = 1 + rng.uniform_int(std::min(3, n - i));
        for (int j = 0; j < len; ++j) groups.push_back(next);
        ++next;
        i += len;
      }
    }
    std::vector<std::pair<int, int>> links;
    for (int i = 0; i < n; ++i) {
      if (groups[static_cast<std::size_t>(i)] != -1 || next == 0) continue;
      const int picks = rng.uniform_int(3);
      for (int j = 0; j < picks; ++j) links.push_back({i, rng.uniform_int(next)});
    }
    const auto seq = enumerate::seq_from_groups(groups, links);
    const bool sym = rng.uniform() < 0.5;
    const auto got = build_visibility_matrix(seq, sym);
    const auto want = oracles::visibility_by_rules(groups, links, sym);
    REQUIRE(matches_oracle(got, want));
  }
}

TEST_CASE("template positions join the x group; optional flag opens ontology") {
  PromptSequence seq;
  seq.tokens = {0, 0, 0, 0};
  seq.segments = {{SegmentKind::Template, -1},
                  {SegmentKind::Input, -1},
                  {SegmentKind::Ontology, 0},
                  {SegmentKind::Ontology, 0}};
  seq.ontology_begin = {2};
  seq.ontology_len = {2};
  seq.ontology_hash = {0};
  const auto plain = build_visibility_matrix(seq, false);
  CHECK(plain.visible(0, 1));
  CHECK(plain.visible(1, 0));
  CHECK_FALSE(plain.visible(0, 2));
  const auto open = build_visibility_matrix(seq, false, true);
  CHECK(open.visible(0, 2));
  CHECK(open.visible(0, 3));
  CHECK_FALSE(open.visible(1, 2));  // input positions still need an anchor link
  CHECK_FALSE(open.visible(2, 0));  // asymmetric unless symmetrize
  const auto open_sym = build_visibility_matrix(seq, true, true);
  CHECK(open_sym.visible(2, 0));
}

TEST_CASE("additive bias constant and softmax underflow") {
  const auto seq = enumerate::seq_from_groups({-1, -1, 0}, {});
  const auto m = build_visibility_matrix(seq, false);
  const Matd bias = to_additive_bias(m);
  CHECK(bias(0, 1) == 0.0);
  CHECK(bias(0, 2) == kNegBlock);
  CHECK(bias(2, 0) == kNegBlock);
  CHECK(kNegBlock == -1e9);

  // softmax([0, 0, -1e9]): blocked entry must vanish entirely
  Matd row(1, 3);
  row << 0.0, 0.0, kNegBlock;
  const Matd p = softmax_rows(row);
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p(0, 2) < 1e-300);
  CHECK(p(0, 2) == 0.0);  // exp(-1e9) underflows to exactly zero
}

TEST_CASE("all true matrix maps to all zero bias") {
  const auto seq = enumerate::seq_from_groups({-1, -1, -1, -1}, {});
  const auto m = build_visibility_matrix(seq, false);
  const Matd bias = to_additive_bias(m);
  CHECK(bias.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("render_grid draws hash for visible") {
  const auto seq = enumerate::seq_from_groups({-1, 0}, {});
  const auto m = build_visibility_matrix(seq, false);
  CHECK(render_grid(m) == "#.\n.#\n");
}
