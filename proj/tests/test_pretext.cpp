#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "ssgnn/optim.hpp"
#include "ssgnn/pretext.hpp"
#include "test_util.hpp"
#include "grad_check.hpp"

using namespace ssgnn;
using namespace ssgnn::testing;

TEST_CASE("node_property_targets") {
  SUBCASE("path degrees") {
    DegreeTarget t = node_property_targets(path_graph(3));
    CHECK(t.degrees(0, 0) == 1.0);
    CHECK(t.degrees(1, 0) == 2.0);
    CHECK(t.degrees(2, 0) == 1.0);
  }
  SUBCASE("clique degrees are k-1") {
    DegreeTarget t = node_property_targets(clique_graph(5));
    for (int v = 0; v < 5; ++v) CHECK(t.degrees(v, 0) == 4.0);
  }
  SUBCASE("SBM degrees equal the dense row-sum oracle") {
    auto [g, masks] = generate_sbm({{12, 12}, 0.4, 0.1, 3, 0.1, 2, 2, 17});
    Matrix dense = Matrix::Zero(g.num_nodes, g.num_nodes);
    for (const auto& [u, v] : g.edge_list()) dense(u, v) = dense(v, u) = 1.0;
    DegreeTarget t = node_property_targets(g);
    for (int v = 0; v < g.num_nodes; ++v) CHECK(t.degrees(v, 0) == dense.row(v).sum());
  }
}

TEST_CASE("edgemask_setup") {
  Graph tri = clique_graph(3);
  SUBCASE("m_e = 0 leaves the graph untouched with empty pair sets") {
    EdgePairsTarget t = edgemask_setup(tri, 0, 5);
    CHECK(t.positives.empty());
    CHECK(t.negatives.empty());
    CHECK(t.masked.num_edges() == 3);
  }
  SUBCASE("triangle with m_e = 1") {
    // A triangle has no non-edges, so negatives cannot be sampled.
    CHECK_THROWS_AS(edgemask_setup(tri, 1, 5), std::invalid_argument);
    Graph square = make_graph(4, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
    EdgePairsTarget t = edgemask_setup(square, 1, 5);
    CHECK(t.masked.num_edges() == 3);
    REQUIRE(t.negatives.size() == 1);
    CHECK_FALSE(square.has_edge(t.negatives[0].first, t.negatives[0].second));
  }
  SUBCASE("m_e above |E| rejected") {
    CHECK_THROWS_AS(edgemask_setup(tri, 4, 0), std::invalid_argument);
  }
  SUBCASE("invariants hold exhaustively on a random graph") {
    Graph g = random_graph(30, 0.15, 19);
    const int m_e = g.num_edges() / 3;
    EdgePairsTarget t = edgemask_setup(g, m_e, 7);
    CHECK(static_cast<int>(t.positives.size()) == m_e);
    CHECK(t.negatives.size() == t.positives.size());
    for (auto [u, v] : t.positives) {
      CHECK(g.has_edge(u, v));                  // M_e subset of E
      CHECK_FALSE(t.masked.has_edge(u, v));     // removed in the masked graph
    }
    for (auto [u, v] : t.negatives) CHECK_FALSE(g.has_edge(u, v));  // no overlap with E
    std::set<std::pair<int, int>> uniq(t.negatives.begin(), t.negatives.end());
    CHECK(uniq.size() == t.negatives.size());
    CHECK(t.masked.num_edges() == g.num_edges() - m_e);
  }
  SUBCASE("deterministic per seed") {
    Graph g = random_graph(20, 0.2, 23);
    EdgePairsTarget a = edgemask_setup(g, 5, 9);
    EdgePairsTarget b = edgemask_setup(g, 5, 9);
    CHECK(a.positives == b.positives);
    CHECK(a.negatives == b.negatives);
  }
}

TEST_CASE("pairwise_distance_targets") {
  SUBCASE("path categories follow the four-bin coding") {
    Graph g = path_graph(6);
    DistPairsTarget t = pairwise_distance_targets(g);
    auto category_of = [&](int u, int v) {
      const std::uint64_t key = static_cast<std::uint64_t>(u) * 6 + static_cast<std::uint64_t>(v);
      for (int c = 0; c < 4; ++c) {
        const auto& pool = t.pools[static_cast<std::size_t>(c)];
        if (std::find(pool.begin(), pool.end(), key) != pool.end()) return c;
      }
      return -1;
    };
    CHECK(category_of(0, 1) == 0);
    CHECK(category_of(0, 3) == 2);
    CHECK(category_of(0, 5) == 3);
  }
  SUBCASE("disconnected pair lands in the high bin") {
    Graph g = make_graph(4, {{0, 1}, {2, 3}});
    DistPairsTarget t = pairwise_distance_targets(g);
    const std::uint64_t key = 0 * 4 + 2;
    CHECK(std::find(t.pools[3].begin(), t.pools[3].end(), key) != t.pools[3].end());
  }
  SUBCASE("binning equals the all-pairs oracle on random 40-node graphs") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      Graph g = random_graph(40, 0.07, 100 + s);
      auto oracle = floyd_warshall(g);
      DistPairsTarget t = pairwise_distance_targets(g);
      std::size_t total = 0;
      for (int c = 0; c < 4; ++c) {
        for (std::uint64_t key : t.pools[static_cast<std::size_t>(c)]) {
          const int u = static_cast<int>(key / 40);
          const int v = static_cast<int>(key % 40);
          const int d = oracle[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)];
          const int expect = (d == kNoPath || d >= 4) ? 3 : d - 1;
          CHECK(expect == c);
          ++total;
        }
      }
      CHECK(total == static_cast<std::size_t>(40 * 39 / 2));
    }
  }
  SUBCASE("tiny graph rejected") {
    CHECK_THROWS_AS(pairwise_distance_targets(make_graph(1, {})), std::invalid_argument);
  }
}

TEST_CASE("sample_distance_pairs") {
  Graph g = random_graph(40, 0.1, 31);
  DistPairsTarget t = pairwise_distance_targets(g);
  t.pair_sample = 80;
  SUBCASE("class-balanced draw without duplicates") {
    SampledPairs batch = sample_distance_pairs(t, 3, 0);
    CHECK(batch.left.size() == 80);
    std::set<std::pair<int, int>> seen;
    std::vector<int> counts(4, 0);
    for (std::size_t i = 0; i < batch.left.size(); ++i) {
      CHECK(seen.insert({batch.left[i], batch.right[i]}).second);  // no pair twice per epoch
      ++counts[static_cast<std::size_t>(batch.categories[i])];
    }
    for (int c = 0; c < 4; ++c) {
      const int avail = static_cast<int>(t.pools[static_cast<std::size_t>(c)].size());
      if (c < 3) CHECK(counts[static_cast<std::size_t>(c)] == std::min(20, avail));
    }
  }
  SUBCASE("exhausted categories backfill from the high bin") {
    Graph clique = clique_graph(10);  // only category 0 exists
    DistPairsTarget tc = pairwise_distance_targets(clique);
    tc.pair_sample = 12;
    SampledPairs batch = sample_distance_pairs(tc, 1, 0);
    CHECK(batch.left.size() == 3);  // categories 1..3 empty, nothing to backfill
    for (int c : batch.categories) CHECK(c == 0);

    Graph star = star_graph(8);  // categories 0 and 1 populated
    DistPairsTarget ts = pairwise_distance_targets(star);
    ts.pair_sample = 16;
    SampledPairs sb = sample_distance_pairs(ts, 1, 0);
    std::vector<int> counts(4, 0);
    for (int c : sb.categories) ++counts[static_cast<std::size_t>(c)];
    CHECK(counts[0] == 4);
    CHECK(counts[1] == 4);  // leaf-leaf pairs, distance 2
    CHECK(counts[2] == 0);
    CHECK(counts[3] == 0);
  }
  SUBCASE("epochs draw different batches, same epoch draws the same batch") {
    SampledPairs a0 = sample_distance_pairs(t, 3, 0);
    SampledPairs a0_again = sample_distance_pairs(t, 3, 0);
    SampledPairs a1 = sample_distance_pairs(t, 3, 1);
    CHECK(a0.left == a0_again.left);
    CHECK(a0.left != a1.left);
  }
  SUBCASE("sample below 4 rejected") {
    t.pair_sample = 3;
    CHECK_THROWS_AS(sample_distance_pairs(t, 0, 0), std::invalid_argument);
  }
}

TEST_CASE("distance2clusters_targets") {
  SUBCASE("star with k=1: hub at distance 0, leaves at 1") {
    Graph g = star_graph(4);
    ClusterDistTarget t = distance2clusters_targets(g, 1, 0);
    CHECK(t.partition.centers[0] == 0);
    CHECK(t.dists(0, 0) == 0.0);
    for (int v = 1; v <= 4; ++v) CHECK(t.dists(v, 0) == 1.0);
  }
  SUBCASE("a center's own coordinate is zero") {
    Graph g = random_graph(20, 0.2, 41);
    ClusterDistTarget t = distance2clusters_targets(g, 3, 7);
    for (int c = 0; c < t.partition.num_clusters; ++c) {
      CHECK(t.dists(t.partition.centers[static_cast<std::size_t>(c)], c) == 0.0);
    }
  }
  SUBCASE("distances equal a per-center BFS oracle; unreachable capped at N") {
    Graph g = make_graph(6, {{0, 1}, {1, 2}, {3, 4}});  // node 5 isolated
    ClusterDistTarget t = distance2clusters_targets(g, 2, 3);
    auto oracle = floyd_warshall(g);
    for (int c = 0; c < t.partition.num_clusters; ++c) {
      const int center = t.partition.centers[static_cast<std::size_t>(c)];
      for (int v = 0; v < 6; ++v) {
        const int d = oracle[static_cast<std::size_t>(v)][static_cast<std::size_t>(center)];
        CHECK(t.dists(v, c) == (d == kNoPath ? 6.0 : static_cast<double>(d)));
      }
    }
  }
  SUBCASE("external partition overrides the built-in partitioner") {
    Graph g = path_graph(4);
    std::vector<int> assignment{0, 0, 1, 1};
    ClusterDistTarget t = distance2clusters_targets(g, 99, 0, &assignment);
    CHECK(t.partition.num_clusters == 2);
    CHECK(t.partition.cluster_of == assignment);
  }
}

TEST_CASE("attributemask_setup") {
  Matrix x = seeded_matrix(12, 6, 51);
  SUBCASE("m_a = 0: input equals the PCA features") {
    AttrMaskTarget t = attributemask_setup(x, 0, 4, 3);
    CHECK(t.masked_nodes.empty());
    CHECK((t.ssl_input - t.pca_features).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("masked rows of the model input are exactly zero") {
    AttrMaskTarget t = attributemask_setup(x, 5, 4, 3);
    CHECK(t.masked_nodes.size() == 5);
    for (int v : t.masked_nodes) {
      CHECK(t.ssl_input.row(v).cwiseAbs().maxCoeff() == 0.0);
      CHECK(t.pca_features.row(v).cwiseAbs().maxCoeff() > 0.0);  // target keeps the values
    }
  }
  SUBCASE("d_pca is capped at the feature dimension") {
    AttrMaskTarget t = attributemask_setup(x, 2, 256, 3);
    CHECK(t.pca_features.cols() == 6);
  }
  SUBCASE("m_a out of range rejected") {
    CHECK_THROWS_AS(attributemask_setup(x, 13, 4, 3), std::invalid_argument);
  }
}

TEST_CASE("pairwise_attrsim_pairs") {
  SUBCASE("duplicated feature rows pair up with similarity 1") {
    Matrix x = seeded_matrix(8, 4, 61);
    x.row(1) = x.row(0);
    std::vector<int> anchors(8);
    std::iota(anchors.begin(), anchors.end(), 0);
    AttrSimTarget t = pairwise_attrsim_pairs(x, 2, anchors);
    bool found = false;
    for (std::size_t i = 0; i < t.pairs.size(); ++i) {
      const auto [u, v] = std::minmax(t.pairs[i].first, t.pairs[i].second);
      if (u == 0 && v == 1) {
        found = true;
        CHECK(t.sims[i] == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
    CHECK(found);
  }
  SUBCASE("membership equals the exhaustive sort oracle on a 30-node fixture") {
    Matrix x = seeded_matrix(30, 5, 62);
    std::vector<int> anchors{0, 3, 7, 11, 18, 29};
    const int k_pairs = 3;
    AttrSimTarget t = pairwise_attrsim_pairs(x, k_pairs, anchors);

    Matrix sims = cosine_similarity_matrix(x);
    std::set<std::pair<int, int>> expected;
    for (int i : anchors) {
      std::vector<int> others;
      for (int j = 0; j < 30; ++j) {
        if (j != i) others.push_back(j);
      }
      auto by_top = [&](int a, int b) {
        if (sims(i, a) != sims(i, b)) return sims(i, a) > sims(i, b);
        return a < b;
      };
      std::sort(others.begin(), others.end(), by_top);
      for (int r = 0; r < k_pairs; ++r) {
        expected.insert({std::min(i, others[static_cast<std::size_t>(r)]),
                         std::max(i, others[static_cast<std::size_t>(r)])});
      }
      for (std::size_t r = others.size() - k_pairs; r < others.size(); ++r) {
        expected.insert({std::min(i, others[r]), std::max(i, others[r])});
      }
    }
    std::set<std::pair<int, int>> actual;
    for (auto [u, v] : t.pairs) actual.insert({std::min(u, v), std::max(u, v)});
    CHECK(actual == expected);
    CHECK(t.pairs.size() == actual.size());  // deduplicated
  }
  SUBCASE("needs at least K+1 nodes") {
    Matrix x = seeded_matrix(3, 2, 63);
    CHECK_THROWS_AS(pairwise_attrsim_pairs(x, 3, {0, 1, 2}), std::invalid_argument);
  }
}

TEST_CASE("ssl output dimensions per task") {
  auto [g, masks] = generate_sbm({{10, 10}, 0.5, 0.05, 4, 0.2, 3, 3, 71});
  PretextConfig cfg;
  cfg.m_e = 4;
  cfg.m_a = 4;
  cfg.d_pca = 3;
  cfg.k_clusters = 5;
  cfg.pair_sample = 40;
  cfg.k_pairs = 2;
  CHECK(ssl_output_dim(build_pretext_target(PretextKind::NodeProperty, g, masks, cfg, 0)) == 1);
  CHECK(ssl_output_dim(build_pretext_target(PretextKind::EdgeMask, g, masks, cfg, 0)) == 1);
  CHECK(ssl_output_dim(build_pretext_target(PretextKind::PairwiseDistance, g, masks, cfg, 0)) == 4);
  CHECK(ssl_output_dim(build_pretext_target(PretextKind::Distance2Clusters, g, masks, cfg, 0)) == 5);
  CHECK(ssl_output_dim(build_pretext_target(PretextKind::AttributeMask, g, masks, cfg, 0)) == 3);
  CHECK(ssl_output_dim(build_pretext_target(PretextKind::PairwiseAttrSim, g, masks, cfg, 0)) == 1);
}

TEST_CASE("target generation is deterministic in (graph, config, seed)") {
  auto [g, masks] = generate_sbm({{12, 12}, 0.4, 0.05, 4, 0.2, 3, 3, 73});
  PretextConfig cfg;
  cfg.m_e = 5;
  cfg.m_a = 5;
  cfg.d_pca = 3;
  cfg.k_clusters = 4;
  cfg.pair_sample = 20;
  cfg.k_pairs = 2;
  for (int kind = 0; kind < 6; ++kind) {
    PretextTarget a = build_pretext_target(static_cast<PretextKind>(kind), g, masks, cfg, 11);
    PretextTarget b = build_pretext_target(static_cast<PretextKind>(kind), g, masks, cfg, 11);
    CHECK(pretext_target_to_json(a) == pretext_target_to_json(b));
  }
}

TEST_CASE("task-only optimization reduces every pretext loss on the SBM fixture") {
  auto [g, masks] = generate_sbm({{15, 15}, 0.5, 0.03, 4, 0.3, 4, 4, 77});
  SpMatrix a_hat = normalize_adjacency(g);
  PretextConfig cfg;
  cfg.m_e = 8;
  cfg.m_a = 8;
  cfg.d_pca = 4;
  cfg.k_clusters = 3;
  cfg.pair_sample = 60;
  cfg.k_pairs = 2;
  ArchConfig arch = ArchConfig::preset("2GC");
  arch.hidden_dim = 8;
  arch.dropout = 0.0;
  std::vector<int> du = unlabeled_nodes(g, masks);

  for (int kind_idx = 0; kind_idx < 6; ++kind_idx) {
    const PretextKind kind = static_cast<PretextKind>(kind_idx);
    PretextTarget target = build_pretext_target(kind, g, masks, cfg, 5);
    const SpMatrix a_ssl = kind == PretextKind::EdgeMask
                                ? normalize_adjacency(std::get<EdgePairsTarget>(target).masked)
                                : a_hat;
    const Matrix x_ssl = kind == PretextKind::AttributeMask
                             ? std::get<AttrMaskTarget>(target).ssl_input
                             : g.features;
    ModelParams params = init_params(arch, static_cast<int>(x_ssl.cols()), g.num_classes,
                                     ssl_output_dim(target), 1);
    AdamState adam;
    std::vector<double> losses;
    for (int epoch = 0; epoch < 20; ++epoch) {
      ad::Tape tape;
      ParamVars pv = stage_params(tape, params);
      ad::Var x = tape.constant(x_ssl);
      ad::Var z = forward_extract(a_ssl, x, pv, arch, true, 1, static_cast<std::uint64_t>(epoch), "xs");
      ad::Var loss = pretext_ssl_loss(tape, target, z, pv, arch, du, true, 1,
                                      static_cast<std::uint64_t>(epoch));
      tape.backward(loss);
      ParamGroup group = collect_params(params, pv, true, false, true);
      if (!adam.initialized()) adam.init(group.params);
      std::vector<Matrix> grads;
      for (const ad::Var* v : group.vars) grads.push_back(v->grad());
      adam_step(group.params, grads, group.decay, adam, 0.01, 0.0);
      losses.push_back(loss.value()(0, 0));
    }
    CHECK_MESSAGE(losses.back() < losses.front(),
                  "pretext kind " << kind_idx << ": " << losses.front() << " -> "
                                  << losses.back());
  }
}
