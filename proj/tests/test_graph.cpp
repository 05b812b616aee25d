#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <set>

#include "ssgnn/graph.hpp"
#include "test_util.hpp"

using namespace ssgnn;
using namespace ssgnn::testing;

TEST_CASE("load_dataset: minimal three-node file") {
  TempDir tmp("load_min");
  const std::string path = write_text(tmp.file("g.json"), R"({
    "num_nodes": 3,
    "edges": [[0,1],[1,2]],
    "features": [[1.0],[2.0],[3.0]],
    "labels": [0,1,0],
    "num_classes": 2,
    "train": [0], "val": [1], "test": [2]
  })");
  auto [g, masks] = load_dataset(path);
  CHECK(g.num_nodes == 3);
  CHECK(g.num_edges() == 2);
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(1) == 2);
  CHECK(g.degree(2) == 1);
  CHECK(masks.train == std::vector<int>{0});
}

TEST_CASE("load_dataset: duplicates, reversed edges and self-loops are cleaned") {
  TempDir tmp("load_dirty");
  const std::string path = write_text(tmp.file("g.json"), R"({
    "num_nodes": 3,
    "edges": [[0,1],[1,0],[0,0],[1,2],[1,2],[2,2]],
    "features": [[0],[0],[0]],
    "labels": [0,0,1],
    "num_classes": 2,
    "train": [0], "val": [], "test": [2]
  })");
  auto [g, masks] = load_dataset(path);
  CHECK(g.num_edges() == 2);
  CHECK_FALSE(g.has_edge(0, 0));
  CHECK(g.has_edge(0, 1));
  CHECK(g.has_edge(1, 0));
}

TEST_CASE("load_dataset: errors name the offending field") {
  TempDir tmp("load_bad");
  SUBCASE("missing num_classes") {
    const std::string path = write_text(tmp.file("a.json"), R"({
      "num_nodes": 1, "edges": [], "features": [[0]], "labels": [0],
      "train": [], "val": [], "test": []
    })");
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("num_classes"),
                         std::runtime_error);
  }
  SUBCASE("ragged feature rows") {
    const std::string path = write_text(tmp.file("b.json"), R"({
      "num_nodes": 2, "edges": [], "features": [[0,1],[0]], "labels": [0,0],
      "num_classes": 1, "train": [], "val": [], "test": []
    })");
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("features"), std::runtime_error);
  }
  SUBCASE("overlapping masks are a validation error") {
    const std::string path = write_text(tmp.file("c.json"), R"({
      "num_nodes": 2, "edges": [[0,1]], "features": [[0],[0]], "labels": [0,0],
      "num_classes": 1, "train": [0], "val": [], "test": [0]
    })");
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("disjoint"), std::runtime_error);
  }
  SUBCASE("label out of class range") {
    const std::string path = write_text(tmp.file("d.json"), R"({
      "num_nodes": 1, "edges": [], "features": [[0]], "labels": [3],
      "num_classes": 2, "train": [], "val": [], "test": []
    })");
    CHECK_THROWS_AS(load_dataset(path), std::runtime_error);
  }
}

TEST_CASE("dataset round-trip preserves structure") {
  auto [g, masks] = generate_sbm({{8, 8}, 0.6, 0.1, 4, 0.2, 2, 2, 5});
  TempDir tmp("roundtrip");
  save_dataset(tmp.file("g.json"), g, masks);
  auto [g2, masks2] = load_dataset(tmp.file("g.json"));
  CHECK(g2.num_nodes == g.num_nodes);
  CHECK(g2.col_idx == g.col_idx);
  CHECK(g2.row_ptr == g.row_ptr);
  CHECK(g2.labels == g.labels);
  CHECK(masks2.train == masks.train);
  CHECK((g2.features - g.features).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("generate_sbm: extreme probabilities") {
  SUBCASE("p_in=1, p_out=0 gives two disjoint cliques") {
    auto [g, masks] = generate_sbm({{10, 10}, 1.0, 0.0, 2, 0.0, 2, 2, 3});
    for (int v = 0; v < 20; ++v) CHECK(g.degree(v) == 9);
    for (int u = 0; u < 10; ++u) {
      for (int v = 10; v < 20; ++v) CHECK_FALSE(g.has_edge(u, v));
    }
  }
  SUBCASE("p_in=0 on a single block gives an edgeless graph") {
    auto [g, masks] = generate_sbm({{5}, 0.0, 0.0, 1, 0.0, 1, 1, 0});
    CHECK(g.num_edges() == 0);
  }
  SUBCASE("same seed twice is byte-identical") {
    SbmParams p{{6, 7}, 0.4, 0.1, 3, 0.3, 2, 2, 42};
    auto [g1, m1] = generate_sbm(p);
    auto [g2, m2] = generate_sbm(p);
    CHECK(g1.col_idx == g2.col_idx);
    CHECK(m1.train == m2.train);
    CHECK(std::memcmp(g1.features.data(), g2.features.data(),
                      sizeof(double) * static_cast<std::size_t>(g1.features.size())) == 0);
  }
  SUBCASE("empty block list rejected") {
    CHECK_THROWS_AS(generate_sbm({{}, 0.5, 0.1, 2, 0.1, 1, 1, 0}), std::runtime_error);
  }
  SUBCASE("feature_dim below block count rejected") {
    CHECK_THROWS_AS(generate_sbm({{4, 4, 4}, 0.5, 0.1, 2, 0.1, 1, 1, 0}), std::runtime_error);
  }
}

TEST_CASE("normalize_adjacency: closed forms") {
  SUBCASE("single edge") {
    Graph g = make_graph(2, {{0, 1}});
    Matrix a = Matrix(normalize_adjacency(g));
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
  SUBCASE("triangle") {
    Graph g = clique_graph(3);
    Matrix a = Matrix(normalize_adjacency(g));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) CHECK(a(i, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    }
  }
  SUBCASE("isolated node") {
    Graph g = make_graph(3, {{0, 1}});
    Matrix a = Matrix(normalize_adjacency(g));
    CHECK(a(2, 2) == 1.0);
    CHECK(a(2, 0) == 0.0);
    CHECK(a(2, 1) == 0.0);
  }
}

TEST_CASE("normalize_adjacency: exact symmetry and entrywise formula") {
  Graph g = random_graph(40, 0.15, 99);
  SpMatrix a_hat = normalize_adjacency(g);
  Matrix dense = Matrix(a_hat);
  for (int i = 0; i < g.num_nodes; ++i) {
    const double dhat_i = g.degree(i) + 1.0;
    for (int j = 0; j < g.num_nodes; ++j) {
      CHECK(dense(i, j) == dense(j, i));  // bitwise by symmetric construction
      const double dhat_j = g.degree(j) + 1.0;
      const double aij = (i == j || g.has_edge(i, j)) ? 1.0 : 0.0;
      CHECK(std::abs(dense(i, j) - aij / std::sqrt(dhat_i * dhat_j)) <= 1e-12);
    }
  }
}

TEST_CASE("adjacency symmetry and CSR ordering on random graphs") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    Graph g = random_graph(30, 0.2, s);
    for (int u = 0; u < g.num_nodes; ++u) {
      auto nb = g.neighbors(u);
      for (std::size_t i = 1; i < nb.size(); ++i) CHECK(nb[i - 1] < nb[i]);
      for (int v : nb) CHECK(g.has_edge(v, u));
    }
  }
}

TEST_CASE("bfs_distances: basic cases") {
  Graph path = path_graph(3);
  auto rows = bfs_distances(path, {0});
  CHECK(rows[0] == std::vector<int>{0, 1, 2});

  Graph two = make_graph(4, {{0, 1}, {2, 3}});
  auto cross = bfs_distances(two, {0});
  CHECK(cross[0][2] == kNoPath);
  CHECK(cross[0][3] == kNoPath);
}

TEST_CASE("bfs_distances: cutoff stops exploration but agrees below it") {
  Graph path = path_graph(6);
  auto cut = bfs_distances(path, {0}, 2);
  CHECK(cut[0] == std::vector<int>{0, 1, 2, kNoPath, kNoPath, kNoPath});
}

TEST_CASE("bfs_distances equals Floyd-Warshall on random graphs") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const int n = 10 + static_cast<int>(s % 41);
    Graph g = random_graph(n, 0.08 + 0.002 * static_cast<double>(s), s);
    auto oracle = floyd_warshall(g);
    std::vector<int> sources(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) sources[static_cast<std::size_t>(v)] = v;
    auto rows = bfs_distances(g, sources);
    for (int u = 0; u < n; ++u) {
      CHECK(rows[static_cast<std::size_t>(u)] == oracle[static_cast<std::size_t>(u)]);
    }
  }
}

TEST_CASE("bfs_distances satisfies the triangle inequality") {
  Graph g = random_graph(35, 0.15, 4);
  std::vector<int> all(35);
  for (int v = 0; v < 35; ++v) all[static_cast<std::size_t>(v)] = v;
  auto d = bfs_distances(g, all);
  RngStream rng(0, "test/triples");
  for (int t = 0; t < 500; ++t) {
    const int a = static_cast<int>(rng.uniform_int(0, 34));
    const int b = static_cast<int>(rng.uniform_int(0, 34));
    const int c = static_cast<int>(rng.uniform_int(0, 34));
    const int ab = d[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    const int bc = d[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
    const int ac = d[static_cast<std::size_t>(a)][static_cast<std::size_t>(c)];
    if (ab != kNoPath && bc != kNoPath) {
      REQUIRE(ac != kNoPath);
      CHECK(ac <= ab + bc);
    }
  }
}

TEST_CASE("khop_neighbors") {
  SUBCASE("star center at k=1 reaches all leaves") {
    Graph g = star_graph(5);
    CHECK(khop_neighbors(g, 0, 1) == std::vector<int>{1, 2, 3, 4, 5});
  }
  SUBCASE("path end at k=2") {
    Graph g = path_graph(4);
    CHECK(khop_neighbors(g, 0, 2) == std::vector<int>{1, 2});
  }
  SUBCASE("k = diameter covers the whole component, excluding the node") {
    Graph g = random_graph(25, 0.12, 11);
    auto oracle = floyd_warshall(g);
    for (int v = 0; v < g.num_nodes; v += 5) {
      std::vector<int> expect;
      for (int u = 0; u < g.num_nodes; ++u) {
        if (u != v && oracle[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)] != kNoPath) {
          expect.push_back(u);
        }
      }
      CHECK(khop_neighbors(g, v, g.num_nodes) == expect);
    }
  }
  SUBCASE("matches the all-pairs oracle at every radius") {
    Graph g = random_graph(20, 0.15, 12);
    auto oracle = floyd_warshall(g);
    for (int k = 1; k <= 4; ++k) {
      for (int v = 0; v < g.num_nodes; v += 3) {
        std::vector<int> expect;
        for (int u = 0; u < g.num_nodes; ++u) {
          const int d = oracle[static_cast<std::size_t>(v)][static_cast<std::size_t>(u)];
          if (u != v && d != kNoPath && d <= k) expect.push_back(u);
        }
        CHECK(khop_neighbors(g, v, k) == expect);
      }
    }
  }
}

namespace {

int edge_cut(const Graph& g, const std::vector<int>& cluster_of) {
  int cut = 0;
  for (const auto& [u, v] : g.edge_list()) {
    if (cluster_of[static_cast<std::size_t>(u)] != cluster_of[static_cast<std::size_t>(v)]) ++cut;
  }
  return cut;
}

}  // namespace

TEST_CASE("partition_graph") {
  SUBCASE("k=1 puts everything in one cluster with the max-degree center") {
    Graph g = star_graph(4);
    Partition part = partition_graph(g, 1, 0);
    CHECK(part.num_clusters == 1);
    for (int c : part.cluster_of) CHECK(c == 0);
    CHECK(part.centers[0] == 0);  // hub has max degree
  }
  SUBCASE("two disjoint cliques split into their components") {
    auto [g, masks] = generate_sbm({{10, 10}, 1.0, 0.0, 2, 0.0, 2, 2, 3});
    Partition part = partition_graph(g, 2, 7);
    std::set<int> first, second;
    for (int v = 0; v < 10; ++v) first.insert(part.cluster_of[static_cast<std::size_t>(v)]);
    for (int v = 10; v < 20; ++v) second.insert(part.cluster_of[static_cast<std::size_t>(v)]);
    CHECK(first.size() == 1);
    CHECK(second.size() == 1);
    CHECK(*first.begin() != *second.begin());
  }
  SUBCASE("k above num_nodes rejected") {
    Graph g = path_graph(3);
    CHECK_THROWS_AS(partition_graph(g, 4, 0), std::runtime_error);
  }
  SUBCASE("k=10 on a 5x20 SBM: non-empty clusters, cut no worse than random") {
    auto [g, masks] = generate_sbm({{20, 20, 20, 20, 20}, 0.4, 0.01, 5, 0.1, 3, 3, 1});
    Partition part = partition_graph(g, 10, 5);
    std::vector<int> sizes(10, 0);
    for (int c : part.cluster_of) ++sizes[static_cast<std::size_t>(c)];
    for (int s : sizes) CHECK(s > 0);
    RngStream rng(5, "test/random-partition");
    std::vector<int> random_assign(static_cast<std::size_t>(g.num_nodes));
    for (auto& c : random_assign) c = static_cast<int>(rng.uniform_int(0, 9));
    CHECK(edge_cut(g, part.cluster_of) <= edge_cut(g, random_assign));
  }
  SUBCASE("fixed seed reproduces the identical assignment") {
    Graph g = random_graph(50, 0.1, 8);
    Partition a = partition_graph(g, 5, 123);
    Partition b = partition_graph(g, 5, 123);
    CHECK(a.cluster_of == b.cluster_of);
    CHECK(a.centers == b.centers);
  }
  SUBCASE("centers have maximal degree within their cluster, ties to lowest index") {
    Graph g = make_graph(5, {{0, 1}, {1, 2}, {3, 4}});
    Partition part = partition_from_assignment(g, {0, 0, 0, 1, 1});
    CHECK(part.centers[0] == 1);  // degree 2
    CHECK(part.centers[1] == 3);  // tie between 3 and 4, lowest index wins
  }
  SUBCASE("imported assignment with an empty cluster rejected") {
    Graph g = path_graph(3);
    CHECK_THROWS_AS(partition_from_assignment(g, {0, 0, 2}), std::runtime_error);
  }
}

TEST_CASE("without_edges removes both directions and keeps the original intact") {
  Graph g = clique_graph(3);
  Graph masked = g.without_edges({{0, 1}});
  CHECK(masked.num_edges() == 2);
  CHECK_FALSE(masked.has_edge(0, 1));
  CHECK_FALSE(masked.has_edge(1, 0));
  CHECK(g.num_edges() == 3);
}
