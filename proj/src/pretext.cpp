#include "ssgnn/pretext.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace ssgnn {

DegreeTarget node_property_targets(const Graph& g) {
  Matrix d(g.num_nodes, 1);
  for (int v = 0; v < g.num_nodes; ++v) d(v, 0) = static_cast<double>(g.degree(v));
  return {std::move(d)};
}

EdgePairsTarget edgemask_setup(const Graph& g, int m_e, std::uint64_t seed) {
  auto edges = g.edge_list();
  if (m_e < 0 || m_e > static_cast<int>(edges.size())) {
    throw std::invalid_argument("edgemask: m_e = " + std::to_string(m_e) +
                                " exceeds edge count " + std::to_string(edges.size()));
  }
  EdgePairsTarget target;
  RngStream rng(seed, "pretext/edgemask");
  auto picks = rng.sample_without_replacement(static_cast<int>(edges.size()), m_e);
  for (int p : picks) target.positives.push_back(edges[static_cast<std::size_t>(p)]);

  // Negatives: uniform rejection sampling over distinct non-adjacent pairs.
  std::set<std::pair<int, int>> chosen;
  const long long max_pairs = static_cast<long long>(g.num_nodes) * (g.num_nodes - 1) / 2;
  if (max_pairs - g.num_edges() < m_e) {
    throw std::invalid_argument("edgemask: graph too dense to sample " + std::to_string(m_e) +
                                " non-edges");
  }
  while (static_cast<int>(target.negatives.size()) < m_e) {
    int u = static_cast<int>(rng.uniform_int(0, g.num_nodes - 1));
    int v = static_cast<int>(rng.uniform_int(0, g.num_nodes - 1));
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (g.has_edge(u, v) || chosen.count({u, v})) continue;
    chosen.insert({u, v});
    target.negatives.emplace_back(u, v);
  }
  target.masked = g.without_edges(target.positives);
  return target;
}

DistPairsTarget pairwise_distance_targets(const Graph& g) {
  if (g.num_nodes < 2) {
    throw std::invalid_argument("pairwise_distance: graph needs at least 2 nodes");
  }
  DistPairsTarget target;
  target.num_nodes = g.num_nodes;
  target.pools.resize(4);
  const std::uint64_t n = static_cast<std::uint64_t>(g.num_nodes);
  // Hop counts above 3 are all category 3, so BFS stops at depth 3.
  std::vector<int> all(g.num_nodes);
  for (int v = 0; v < g.num_nodes; ++v) all[static_cast<std::size_t>(v)] = v;
  auto rows = bfs_distances(g, all, 3);
  for (int u = 0; u < g.num_nodes; ++u) {
    const auto& dist = rows[static_cast<std::size_t>(u)];
    for (int v = u + 1; v < g.num_nodes; ++v) {
      const int d = dist[static_cast<std::size_t>(v)];
      const int cat = (d == kNoPath) ? 3 : d - 1;
      target.pools[static_cast<std::size_t>(cat)].push_back(static_cast<std::uint64_t>(u) * n +
                                                            static_cast<std::uint64_t>(v));
    }
  }
  return target;
}

SampledPairs sample_distance_pairs(const DistPairsTarget& target, std::uint64_t seed,
                                   std::uint64_t epoch) {
  const int n_sample = target.pair_sample;
  if (n_sample < 4) throw std::invalid_argument("pairwise_distance: sample size must be >= 4");
  RngStream rng(seed, "pretext/pairsample", epoch);

  // n/4 per category without replacement; exhausted categories backfill from
  // category 3, which also absorbs the division remainder. Demand beyond all
  // pools is dropped.
  const int per_cat = n_sample / 4;
  std::vector<std::vector<int>> picked(4);
  int deficit = n_sample - 4 * per_cat;
  for (int c = 0; c < 3; ++c) {
    const int avail = static_cast<int>(target.pools[static_cast<std::size_t>(c)].size());
    const int take = std::min(per_cat, avail);
    picked[static_cast<std::size_t>(c)] = rng.sample_without_replacement(avail, take);
    deficit += per_cat - take;
  }
  {
    const int avail = static_cast<int>(target.pools[3].size());
    const int take = std::min(per_cat + deficit, avail);
    picked[3] = rng.sample_without_replacement(avail, take);
  }

  SampledPairs out;
  for (int c = 0; c < 4; ++c) {
    for (int idx : picked[static_cast<std::size_t>(c)]) {
      const std::uint64_t packed = target.pools[static_cast<std::size_t>(c)][static_cast<std::size_t>(idx)];
      out.left.push_back(static_cast<int>(packed / static_cast<std::uint64_t>(target.num_nodes)));
      out.right.push_back(static_cast<int>(packed % static_cast<std::uint64_t>(target.num_nodes)));
      out.categories.push_back(c);
    }
  }
  return out;
}

ClusterDistTarget distance2clusters_targets(const Graph& g, int k, std::uint64_t seed,
                                            const std::vector<int>* external_partition) {
  ClusterDistTarget target;
  target.partition = external_partition ? partition_from_assignment(g, *external_partition)
                                        : partition_graph(g, k, seed);
  const int kk = target.partition.num_clusters;
  auto rows = bfs_distances(g, target.partition.centers);
  target.dists.resize(g.num_nodes, kk);
  for (int c = 0; c < kk; ++c) {
    for (int v = 0; v < g.num_nodes; ++v) {
      const int d = rows[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)];
      target.dists(v, c) = (d == kNoPath) ? static_cast<double>(g.num_nodes) : static_cast<double>(d);
    }
  }
  return target;
}

AttrMaskTarget attributemask_setup(const Matrix& x, int m_a, int d_pca, std::uint64_t seed) {
  const int n = static_cast<int>(x.rows());
  if (m_a < 0 || m_a > n) {
    throw std::invalid_argument("attributemask: m_a out of range");
  }
  const Eigen::Index d = std::min<Eigen::Index>(d_pca, std::min(x.rows(), x.cols()));
  AttrMaskTarget target;
  target.pca_features = pca_reduce(x, d);
  RngStream rng(seed, "pretext/attrmask");
  target.masked_nodes = rng.sample_without_replacement(n, m_a);
  std::sort(target.masked_nodes.begin(), target.masked_nodes.end());
  target.ssl_input = target.pca_features;
  for (int v : target.masked_nodes) target.ssl_input.row(v).setZero();
  return target;
}

AttrSimTarget pairwise_attrsim_pairs(const Matrix& x, int k_pairs,
                                     const std::vector<int>& anchors) {
  const int n = static_cast<int>(x.rows());
  if (k_pairs < 1) throw std::invalid_argument("pairwise_attrsim: K must be >= 1");
  if (n < k_pairs + 1) {
    throw std::invalid_argument("pairwise_attrsim: need at least K+1 nodes");
  }
  Matrix sims = cosine_similarity_matrix(x);

  // For each anchor, top-K and bottom-K partners (ties to lower index);
  // unordered pairs deduplicated, keeping the first similarity seen.
  std::set<std::pair<int, int>> seen;
  AttrSimTarget target;
  std::vector<int> partners(static_cast<std::size_t>(n) - 1);
  auto add_pair = [&](int i, int j) {
    const auto key = std::minmax(i, j);
    if (seen.insert({key.first, key.second}).second) {
      target.pairs.emplace_back(i, j);
      target.sims.push_back(sims(i, j));
    }
  };
  for (int i : anchors) {
    int w = 0;
    for (int j = 0; j < n; ++j) {
      if (j != i) partners[static_cast<std::size_t>(w++)] = j;
    }
    auto top_cmp = [&](int a, int b) {
      if (sims(i, a) != sims(i, b)) return sims(i, a) > sims(i, b);
      return a < b;
    };
    auto bottom_cmp = [&](int a, int b) {
      if (sims(i, a) != sims(i, b)) return sims(i, a) < sims(i, b);
      return a < b;
    };
    std::vector<int> order(partners);
    std::partial_sort(order.begin(), order.begin() + k_pairs, order.end(), top_cmp);
    for (int t = 0; t < k_pairs; ++t) add_pair(i, order[static_cast<std::size_t>(t)]);
    order = partners;
    std::partial_sort(order.begin(), order.begin() + k_pairs, order.end(), bottom_cmp);
    for (int t = 0; t < k_pairs; ++t) add_pair(i, order[static_cast<std::size_t>(t)]);
  }
  return target;
}

PretextTarget build_pretext_target(PretextKind kind, const Graph& g, const SplitMasks& masks,
                                   const PretextConfig& cfg, std::uint64_t seed) {
  switch (kind) {
    case PretextKind::NodeProperty:
      return node_property_targets(g);
    case PretextKind::EdgeMask:
      return edgemask_setup(g, cfg.m_e, seed);
    case PretextKind::PairwiseDistance: {
      DistPairsTarget t = pairwise_distance_targets(g);
      t.pair_sample = cfg.pair_sample;
      return t;
    }
    case PretextKind::Distance2Clusters:
      return distance2clusters_targets(
          g, cfg.k_clusters, seed,
          cfg.external_partition.empty() ? nullptr : &cfg.external_partition);
    case PretextKind::AttributeMask:
      return attributemask_setup(g.features, cfg.m_a, cfg.d_pca, seed);
    case PretextKind::PairwiseAttrSim:
      return pairwise_attrsim_pairs(g.features, cfg.k_pairs, unlabeled_nodes(g, masks));
  }
  throw std::logic_error("build_pretext_target: unhandled kind");
}

int ssl_output_dim(const PretextTarget& target) {
  return std::visit(
      [](const auto& t) -> int {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, DegreeTarget>) return 1;
        if constexpr (std::is_same_v<T, EdgePairsTarget>) return 1;
        if constexpr (std::is_same_v<T, DistPairsTarget>) return 4;
        if constexpr (std::is_same_v<T, ClusterDistTarget>) return t.partition.num_clusters;
        if constexpr (std::is_same_v<T, AttrMaskTarget>) return static_cast<int>(t.pca_features.cols());
        if constexpr (std::is_same_v<T, AttrSimTarget>) return 1;
      },
      target);
}

bool needs_separate_ssl_forward(PretextKind kind) {
  return kind == PretextKind::EdgeMask || kind == PretextKind::AttributeMask;
}

PretextKind pretext_kind_of(const PretextTarget& target) {
  return static_cast<PretextKind>(target.index());
}

ad::Var pretext_ssl_loss(ad::Tape& tape, const PretextTarget& target, ad::Var z,
                         const ParamVars& pv, const ArchConfig& arch,
                         const std::vector<int>& unlabeled, bool train,
                         std::uint64_t master_seed, std::uint64_t epoch) {
  if (const auto* t = std::get_if<DegreeTarget>(&target)) {
    ad::Var out = forward_ssl(z, pv, arch, train, master_seed, epoch);
    return ad::mse_rows(out, t->degrees, unlabeled);
  }
  if (const auto* t = std::get_if<EdgePairsTarget>(&target)) {
    std::vector<int> left, right;
    std::vector<double> labels, weights;
    const double wpos = t->positives.empty() ? 0.0 : 1.0 / static_cast<double>(t->positives.size());
    const double wneg = t->negatives.empty() ? 0.0 : 1.0 / static_cast<double>(t->negatives.size());
    for (auto [u, v] : t->positives) {
      left.push_back(u);
      right.push_back(v);
      labels.push_back(1.0);
      weights.push_back(wpos);
    }
    for (auto [u, v] : t->negatives) {
      left.push_back(u);
      right.push_back(v);
      labels.push_back(0.0);
      weights.push_back(wneg);
    }
    if (left.empty()) return tape.constant(Matrix::Zero(1, 1));
    ad::Var logits = forward_ssl_pairs(z, left, right, pv, arch, train, master_seed, epoch);
    return ad::bce_with_logits(logits, labels, &weights);
  }
  if (const auto* t = std::get_if<DistPairsTarget>(&target)) {
    SampledPairs batch = sample_distance_pairs(*t, master_seed, epoch);
    ad::Var logits = forward_ssl_pairs(z, batch.left, batch.right, pv, arch, train,
                                       master_seed, epoch);
    std::vector<int> mask(batch.categories.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = static_cast<int>(i);
    return ad::softmax_cross_entropy(logits, batch.categories, mask);
  }
  if (const auto* t = std::get_if<ClusterDistTarget>(&target)) {
    ad::Var out = forward_ssl(z, pv, arch, train, master_seed, epoch);
    return ad::mse_rows(out, t->dists, unlabeled);
  }
  if (const auto* t = std::get_if<AttrMaskTarget>(&target)) {
    if (t->masked_nodes.empty()) return tape.constant(Matrix::Zero(1, 1));
    ad::Var out = forward_ssl(z, pv, arch, train, master_seed, epoch);
    return ad::mse_rows(out, t->pca_features, t->masked_nodes);
  }
  if (const auto* t = std::get_if<AttrSimTarget>(&target)) {
    std::vector<int> left, right;
    for (auto [u, v] : t->pairs) {
      left.push_back(u);
      right.push_back(v);
    }
    ad::Var out = forward_ssl_pairs(z, left, right, pv, arch, train, master_seed, epoch);
    Matrix sim_target(static_cast<Eigen::Index>(t->sims.size()), 1);
    for (std::size_t i = 0; i < t->sims.size(); ++i) {
      sim_target(static_cast<Eigen::Index>(i), 0) = t->sims[i];
    }
    std::vector<int> mask(t->sims.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = static_cast<int>(i);
    return ad::mse_rows(out, sim_target, mask);
  }
  throw std::logic_error("pretext_ssl_loss: unhandled target");
}

nlohmann::json pretext_target_to_json(const PretextTarget& target) {
  using nlohmann::json;
  json j;
  if (const auto* t = std::get_if<DegreeTarget>(&target)) {
    j["kind"] = "node-property";
    std::vector<double> d(t->degrees.data(), t->degrees.data() + t->degrees.size());
    j["degrees"] = std::move(d);
  } else if (const auto* t = std::get_if<EdgePairsTarget>(&target)) {
    j["kind"] = "edge-mask";
    json pos = json::array(), neg = json::array();
    for (auto [u, v] : t->positives) pos.push_back({u, v});
    for (auto [u, v] : t->negatives) neg.push_back({u, v});
    j["masked_edges"] = std::move(pos);
    j["negative_pairs"] = std::move(neg);
    j["masked_edge_count"] = t->positives.size();
  } else if (const auto* t = std::get_if<DistPairsTarget>(&target)) {
    j["kind"] = "pairwise-distance";
    json sizes = json::array();
    for (const auto& pool : t->pools) sizes.push_back(pool.size());
    j["category_pool_sizes"] = std::move(sizes);
    j["pair_sample"] = t->pair_sample;
  } else if (const auto* t = std::get_if<ClusterDistTarget>(&target)) {
    j["kind"] = "distance2clusters";
    j["cluster_of"] = t->partition.cluster_of;
    j["centers"] = t->partition.centers;
  } else if (const auto* t = std::get_if<AttrMaskTarget>(&target)) {
    j["kind"] = "attribute-mask";
    j["masked_nodes"] = t->masked_nodes;
    j["pca_dim"] = t->pca_features.cols();
  } else if (const auto* t = std::get_if<AttrSimTarget>(&target)) {
    j["kind"] = "pairwise-attrsim";
    json pairs = json::array();
    for (std::size_t i = 0; i < t->pairs.size(); ++i) {
      pairs.push_back({t->pairs[i].first, t->pairs[i].second, t->sims[i]});
    }
    j["pairs"] = std::move(pairs);
  }
  return j;
}

}  // namespace ssgnn
