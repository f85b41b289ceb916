#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "spgnn/classes.hpp"
#include "spgnn/graph.hpp"
#include "spgnn/rng.hpp"
#include "testutil/oracles.hpp"

using namespace spgnn;

namespace {

TreeGraph path_graph(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(i - 1, i);
  return oracles::graph_from_edges(n, edges);
}

TreeGraph star_graph(int leaves) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i <= leaves; ++i) edges.emplace_back(0, i);
  return oracles::graph_from_edges(leaves + 1, edges);
}

}  // namespace

TEST_CASE("bfs_shortest_paths") {
  SUBCASE("path graph hops") {
    TreeGraph g = path_graph(3);
    CHECK(bfs_shortest_paths(g, 0) == std::vector<int>{0, 1, 2});
    CHECK(bfs_shortest_paths(g, 2) == std::vector<int>{2, 1, 0});
  }
  SUBCASE("unknown source rejected") {
    TreeGraph g = path_graph(3);
    CHECK_THROWS(bfs_shortest_paths(g, 5));
    CHECK_THROWS(bfs_shortest_paths(g, -1));
  }
  SUBCASE("unreachable nodes flagged") {
    TreeGraph g;
    g.ids = {1, 2, 3};
    g.edges = {{0, 1}};
    CHECK(bfs_shortest_paths(g, 0) == std::vector<int>{0, 1, -1});
  }
  SUBCASE("matches Floyd-Warshall on random trees") {
    Rng rng(101);
    for (int rep = 0; rep < 200; ++rep) {
      int n = 2 + static_cast<int>(rng.below(19));
      auto edges = oracles::random_tree_edges(n, rng);
      TreeGraph g = oracles::graph_from_edges(n, edges);
      auto want = oracles::floyd_warshall(n, edges);
      for (int s = 0; s < n; ++s) {
        auto got = bfs_shortest_paths(g, s);
        for (int t = 0; t < n; ++t)
          REQUIRE(got[static_cast<std::size_t>(t)] ==
                  want[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)]);
      }
    }
  }
}

TEST_CASE("graph_diameter") {
  CHECK(graph_diameter(path_graph(4)) == 3);
  CHECK(graph_diameter(star_graph(5)) == 2);
  SUBCASE("rejects single node and disconnected graphs") {
    CHECK_THROWS(graph_diameter(path_graph(1)));
    TreeGraph g;
    g.ids = {1, 2, 3};
    g.edges = {{0, 1}};
    CHECK_THROWS(graph_diameter(g));
  }
  SUBCASE("matches all-pairs oracle") {
    Rng rng(103);
    for (int rep = 0; rep < 50; ++rep) {
      int n = 2 + static_cast<int>(rng.below(19));
      auto edges = oracles::random_tree_edges(n, rng);
      TreeGraph g = oracles::graph_from_edges(n, edges);
      auto d = oracles::floyd_warshall(n, edges);
      int want = 0;
      for (const auto& row : d)
        for (int x : row) want = std::max(want, x);
      CHECK(graph_diameter(g) == want);
    }
  }
}

TEST_CASE("find_leaves") {
  SUBCASE("path rooted at one end") {
    TreeGraph g = path_graph(3);
    CHECK(find_leaves(g, 0) == std::vector<int>{2});
  }
  SUBCASE("star rooted at hub") {
    TreeGraph g = star_graph(4);
    CHECK(find_leaves(g, 0) == std::vector<int>{1, 2, 3, 4});
  }
  SUBCASE("subtree filter keeps descendants only") {
    // 0 - 1 - 2, 0 - 3: leaves through node 1 -> {2}
    TreeGraph g = oracles::graph_from_edges(4, {{0, 1}, {1, 2}, {0, 3}});
    CHECK(find_leaves(g, 0, 1) == std::vector<int>{2});
    CHECK(find_leaves(g, 0) == std::vector<int>{2, 3});
  }
  SUBCASE("unknown root rejected") {
    CHECK_THROWS(find_leaves(path_graph(2), 7));
  }
  SUBCASE("degree oracle on random trees") {
    Rng rng(105);
    for (int rep = 0; rep < 50; ++rep) {
      int n = 2 + static_cast<int>(rng.below(15));
      auto edges = oracles::random_tree_edges(n, rng);
      TreeGraph g = oracles::graph_from_edges(n, edges);
      int root = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
      std::vector<int> deg(static_cast<std::size_t>(n), 0);
      for (auto [a, b] : edges) {
        ++deg[static_cast<std::size_t>(a)];
        ++deg[static_cast<std::size_t>(b)];
      }
      std::vector<int> want;
      for (int v = 0; v < n; ++v)
        if (v != root && deg[static_cast<std::size_t>(v)] == 1)
          want.push_back(v);
      CHECK(find_leaves(g, root) == want);
    }
  }
}

namespace {

// Random tree with >= 21 nodes plus an injective named-class map.
struct AnchorFixture {
  TreeGraph g;
  std::array<int, 21> class_to_node;
};

AnchorFixture make_anchor_fixture(Rng& rng) {
  AnchorFixture f;
  int n = 21 + static_cast<int>(rng.below(15));
  f.g = oracles::graph_from_edges(n, oracles::random_tree_edges(n, rng));
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng.below(static_cast<uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  for (int c = 0; c < 21; ++c)
    f.class_to_node[static_cast<std::size_t>(c)] = perm[static_cast<std::size_t>(c)];
  return f;
}

}  // namespace

TEST_CASE("select_anchors") {
  SUBCASE("segmental with a unique descendant leaf") {
    // trachea(0) - seg(1) - other(2): leaf of seg is 2
    TreeGraph g = oracles::graph_from_edges(3, {{0, 1}, {1, 2}});
    std::array<int, 21> map;
    map.fill(0);
    map[0] = 0;
    map[kSegmentalBegin] = 1;
    AnchorSet s = select_anchors(g, map);
    REQUIRE(s.nodes.size() == 39);
    CHECK(s.nodes[0] == 0);
    CHECK(s.nodes[kSegmentalBegin] == 1);
    CHECK(s.nodes[21] == 2);  // leaf anchor of the first segmental
  }
  SUBCASE("leaf segmental anchors itself") {
    TreeGraph g = oracles::graph_from_edges(3, {{0, 1}, {0, 2}});
    std::array<int, 21> map;
    map.fill(0);
    map[kSegmentalBegin] = 1;  // node 1 is a leaf
    AnchorSet s = select_anchors(g, map);
    CHECK(s.nodes[21] == 1);
  }
  SUBCASE("incomplete map rejected") {
    TreeGraph g = path_graph(3);
    std::array<int, 21> map;
    map.fill(-1);
    CHECK_THROWS(select_anchors(g, map));
  }
  SUBCASE("farthest leaf matches exhaustive subtree scan") {
    Rng rng(107);
    for (int rep = 0; rep < 60; ++rep) {
      AnchorFixture f = make_anchor_fixture(rng);
      AnchorSet s = select_anchors(f.g, f.class_to_node);
      REQUIRE(s.nodes.size() == 39);
      int root = f.class_to_node[0];
      auto fw = oracles::floyd_warshall(
          f.g.node_count(),
          f.g.edges);
      auto deg = f.g.degrees();
      for (int c = kSegmentalBegin; c < kSegmentalEnd; ++c) {
        int seg = f.class_to_node[static_cast<std::size_t>(c)];
        int got = s.nodes[static_cast<std::size_t>(21 + (c - kSegmentalBegin))];
        if (deg[static_cast<std::size_t>(seg)] == 1 && seg != root) {
          REQUIRE(got == seg);
          continue;
        }
        // oracle: leaves whose unique tree path to root passes through seg
        int best = -1, best_d = -1;
        for (int v = 0; v < f.g.node_count(); ++v) {
          if (v == root || deg[static_cast<std::size_t>(v)] != 1) continue;
          // on a tree, v's path to root goes through seg iff
          // d(v, root) == d(v, seg) + d(seg, root)
          if (fw[static_cast<std::size_t>(v)][static_cast<std::size_t>(root)] !=
              fw[static_cast<std::size_t>(v)][static_cast<std::size_t>(seg)] +
                  fw[static_cast<std::size_t>(seg)][static_cast<std::size_t>(root)])
            continue;
          int dd = fw[static_cast<std::size_t>(v)][static_cast<std::size_t>(seg)];
          if (dd > best_d) {
            best_d = dd;
            best = v;
          }
        }
        if (best < 0) best = seg;
        REQUIRE(got == best);
      }
    }
  }
}

TEST_CASE("compute_positional_encodings") {
  SUBCASE("path with a single endpoint anchor") {
    TreeGraph g = path_graph(3);
    AnchorSet s;
    s.nodes = {0};
    Tensor pe = compute_positional_encodings(g, s);
    REQUIRE(pe.shape == Shape{3, 1});
    CHECK(pe.at(0) == 0.0f);
    CHECK(pe.at(1) == 0.5f);
    CHECK(pe.at(2) == 1.0f);
  }
  SUBCASE("anchor self-entries are zero and range is [0,1]") {
    Rng rng(109);
    for (int rep = 0; rep < 40; ++rep) {
      int n = 2 + static_cast<int>(rng.below(19));
      TreeGraph g = oracles::graph_from_edges(
          n, oracles::random_tree_edges(n, rng));
      AnchorSet s;
      int k = 1 + static_cast<int>(rng.below(5));
      for (int a = 0; a < k; ++a)
        s.nodes.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(n))));
      Tensor pe = compute_positional_encodings(g, s);
      REQUIRE(pe.shape == Shape{n, k});
      for (int a = 0; a < k; ++a)
        CHECK(pe.at(static_cast<std::size_t>(s.nodes[static_cast<std::size_t>(a)]) * k +
                    static_cast<std::size_t>(a)) == 0.0f);
      for (std::size_t i = 0; i < pe.numel(); ++i) {
        CHECK(pe.at(i) >= 0.0f);
        CHECK(pe.at(i) <= 1.0f);
      }
    }
  }
  SUBCASE("matches Floyd-Warshall distances and diameter") {
    Rng rng(111);
    for (int rep = 0; rep < 60; ++rep) {
      int n = 2 + static_cast<int>(rng.below(19));
      auto edges = oracles::random_tree_edges(n, rng);
      TreeGraph g = oracles::graph_from_edges(n, edges);
      auto fw = oracles::floyd_warshall(n, edges);
      int diam = 0;
      for (const auto& row : fw)
        for (int x : row) diam = std::max(diam, x);
      AnchorSet s;
      for (int a = 0; a < 3; ++a)
        s.nodes.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(n))));
      Tensor pe = compute_positional_encodings(g, s);
      for (int b = 0; b < n; ++b)
        for (int a = 0; a < 3; ++a) {
          // same arithmetic route as the implementation, so the float
          // values must agree exactly
          float want = static_cast<float>(
              static_cast<double>(
                  fw[static_cast<std::size_t>(b)]
                    [static_cast<std::size_t>(s.nodes[static_cast<std::size_t>(a)])]) /
              diam);
          REQUIRE(pe.at(static_cast<std::size_t>(b) * 3 +
                        static_cast<std::size_t>(a)) == want);
        }
    }
  }
  SUBCASE("diameter endpoint anchor realizes an entry of exactly 1") {
    TreeGraph g = path_graph(5);
    AnchorSet s;
    s.nodes = {0, 2};
    Tensor pe = compute_positional_encodings(g, s);
    bool has_one = false;
    for (std::size_t i = 0; i < pe.numel(); ++i)
      if (pe.at(i) == 1.0f) has_one = true;
    CHECK(has_one);
  }
  SUBCASE("distance sensitivity on a path with an endpoint anchor") {
    TreeGraph g = path_graph(6);
    AnchorSet s;
    s.nodes = {0};
    Tensor pe = compute_positional_encodings(g, s);
    auto row_dist = [&](int u, int v) {
      return std::abs(pe.at(static_cast<std::size_t>(u)) -
                      pe.at(static_cast<std::size_t>(v)));
    };
    // closer nodes have closer encodings
    for (int u = 0; u < 6; ++u)
      for (int v = 0; v < 6; ++v)
        for (int w = 0; w < 6; ++w)
          if (std::abs(u - v) < std::abs(u - w))
            CHECK(row_dist(u, v) <= row_dist(u, w));
  }
  SUBCASE("rejects disconnected input") {
    TreeGraph g;
    g.ids = {1, 2, 3};
    g.edges = {{0, 1}};
    AnchorSet s;
    s.nodes = {0};
    CHECK_THROWS(compute_positional_encodings(g, s));
  }
  SUBCASE("permutation equivariance: relabeling permutes rows") {
    Rng rng(113);
    int n = 10;
    auto edges = oracles::random_tree_edges(n, rng);
    TreeGraph g = oracles::graph_from_edges(n, edges);
    AnchorSet s;
    s.nodes = {2, 7};
    Tensor pe = compute_positional_encodings(g, s);
    // relabel node i -> new id (reverse order); sorted ids flip the index
    // order so row i of the original should appear at row n-1-i
    TreeGraph h;
    for (int i = 0; i < n; ++i) h.ids.push_back(i + 1);
    for (auto [a, b] : edges)
      h.edges.emplace_back(n - 1 - a, n - 1 - b);
    h.sort_edges();
    AnchorSet s2;
    s2.nodes = {n - 1 - 2, n - 1 - 7};
    Tensor pe2 = compute_positional_encodings(h, s2);
    for (int b = 0; b < n; ++b)
      for (int a = 0; a < 2; ++a)
        CHECK(pe.at(static_cast<std::size_t>(b) * 2 + static_cast<std::size_t>(a)) ==
              pe2.at(static_cast<std::size_t>(n - 1 - b) * 2 +
                     static_cast<std::size_t>(a)));
  }
}

TEST_CASE("graph json round trip") {
  TreeGraph g;
  g.ids = {3, 7, 9};
  g.edges = {{0, 1}, {1, 2}};
  g.centers = {{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  g.voxel_counts = {10, 20, 30};
  g.labels = {0, 1, -1};
  std::string text = graph_to_json(g);
  TreeGraph r = graph_from_json(text);
  CHECK(r.ids == g.ids);
  CHECK(r.edges == g.edges);
  CHECK(r.centers == g.centers);
  CHECK(r.voxel_counts == g.voxel_counts);
  CHECK(r.labels == g.labels);
  CHECK(graph_to_json(r) == text);  // canonical form is a fixed point
  SUBCASE("self-looped graphs are not serialized") {
    CHECK_THROWS(graph_to_json(g.with_self_loops()));
  }
  SUBCASE("bad edges rejected") {
    CHECK_THROWS(graph_from_json(
        "{\"nodes\":[{\"id\":1,\"center\":null,\"voxels\":0,\"label\":null}],"
        "\"edges\":[[1,2]]}"));
  }
}

TEST_CASE("with_self_loops") {
  TreeGraph g = path_graph(3);
  TreeGraph s = g.with_self_loops();
  CHECK(s.self_loops);
  CHECK(s.edges.size() == g.edges.size() + 3);
  // degrees and adjacency ignore self loops
  CHECK(s.degrees() == g.degrees());
  CHECK(s.adjacency() == g.adjacency());
}
