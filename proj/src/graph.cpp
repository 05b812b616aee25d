#include "ssgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace ssgnn {

using nlohmann::json;

namespace {

[[noreturn]] void graph_error(const std::string& msg) {
  throw std::runtime_error("graph: " + msg);
}

}  // namespace

Graph Graph::from_edges(int num_nodes, const std::vector<std::pair<int, int>>& edges,
                        Matrix features, std::vector<int> labels, int num_classes) {
  if (num_nodes < 0) graph_error("num_nodes must be non-negative");
  if (features.rows() != num_nodes) {
    graph_error("features row count " + std::to_string(features.rows()) +
                " does not match num_nodes " + std::to_string(num_nodes));
  }
  if (static_cast<int>(labels.size()) != num_nodes) {
    graph_error("labels length does not match num_nodes");
  }
  for (int i = 0; i < num_nodes; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y != kUnlabeled && (y < 0 || y >= num_classes)) {
      graph_error("label of node " + std::to_string(i) + " out of range [0, " +
                  std::to_string(num_classes) + ")");
    }
  }

  // Symmetrize, drop self-loops and duplicates.
  std::vector<std::set<int>> adj(static_cast<std::size_t>(num_nodes));
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes) {
      graph_error("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                  ") references a node outside [0, " + std::to_string(num_nodes) + ")");
    }
    if (u == v) continue;
    adj[static_cast<std::size_t>(u)].insert(v);
    adj[static_cast<std::size_t>(v)].insert(u);
  }

  Graph g;
  g.num_nodes = num_nodes;
  g.num_classes = num_classes;
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.row_ptr.resize(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (int v = 0; v < num_nodes; ++v) {
    g.row_ptr[static_cast<std::size_t>(v) + 1] =
        g.row_ptr[static_cast<std::size_t>(v)] + static_cast<int>(adj[static_cast<std::size_t>(v)].size());
  }
  g.col_idx.reserve(static_cast<std::size_t>(g.row_ptr.back()));
  for (int v = 0; v < num_nodes; ++v) {
    g.col_idx.insert(g.col_idx.end(), adj[static_cast<std::size_t>(v)].begin(),
                     adj[static_cast<std::size_t>(v)].end());
  }
  require_finite(g.features, "graph features");
  return g;
}

bool Graph::has_edge(int u, int v) const {
  const auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::pair<int, int>> Graph::edge_list() const {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(num_edges()));
  for (int u = 0; u < num_nodes; ++u) {
    for (int v : neighbors(u)) {
      if (u < v) edges.emplace_back(u, v);
    }
  }
  return edges;
}

Graph Graph::without_edges(const std::vector<std::pair<int, int>>& removed) const {
  std::set<std::pair<int, int>> drop;
  for (auto [u, v] : removed) {
    drop.insert({std::min(u, v), std::max(u, v)});
  }
  std::vector<std::pair<int, int>> kept;
  for (const auto& e : edge_list()) {
    if (!drop.count(e)) kept.push_back(e);
  }
  return from_edges(num_nodes, kept, features, labels, num_classes);
}

void validate_split(const Graph& g, const SplitMasks& masks) {
  auto check_set = [&](const std::vector<int>& nodes, const char* name) {
    for (int v : nodes) {
      if (v < 0 || v >= g.num_nodes) {
        graph_error(std::string(name) + " mask references node " + std::to_string(v) +
                    " outside [0, " + std::to_string(g.num_nodes) + ")");
      }
    }
  };
  check_set(masks.train, "train");
  check_set(masks.val, "val");
  check_set(masks.test, "test");

  std::vector<int> seen(static_cast<std::size_t>(g.num_nodes), 0);
  auto mark = [&](const std::vector<int>& nodes, const char* name) {
    for (int v : nodes) {
      if (seen[static_cast<std::size_t>(v)]++) {
        graph_error("masks are not disjoint: node " + std::to_string(v) + " repeats in/through " + name);
      }
    }
  };
  mark(masks.train, "train");
  mark(masks.val, "val");
  mark(masks.test, "test");

  for (int v : masks.train) {
    if (g.labels[static_cast<std::size_t>(v)] == kUnlabeled) {
      graph_error("train node " + std::to_string(v) + " is unlabeled");
    }
  }
}

std::vector<int> unlabeled_nodes(const Graph& g, const SplitMasks& masks) {
  std::vector<char> in_train(static_cast<std::size_t>(g.num_nodes), 0);
  for (int v : masks.train) in_train[static_cast<std::size_t>(v)] = 1;
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(g.num_nodes) - masks.train.size());
  for (int v = 0; v < g.num_nodes; ++v) {
    if (!in_train[static_cast<std::size_t>(v)]) out.push_back(v);
  }
  return out;
}

namespace {

json require_field(const json& j, const char* field) {
  if (!j.contains(field)) {
    graph_error(std::string("field '") + field + "' missing");
  }
  return j.at(field);
}

}  // namespace

std::pair<Graph, SplitMasks> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) graph_error("cannot open dataset file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    graph_error("invalid JSON in '" + path + "': " + e.what());
  }

  int num_nodes = 0, num_classes = 0;
  std::vector<std::pair<int, int>> edges;
  Matrix features;
  std::vector<int> labels;
  SplitMasks masks;
  try {
    num_nodes = require_field(j, "num_nodes").get<int>();
  } catch (const json::exception& e) {
    graph_error(std::string("field 'num_nodes': ") + e.what());
  }
  try {
    for (const auto& e : require_field(j, "edges")) {
      if (!e.is_array() || e.size() != 2) graph_error("field 'edges': entries must be [u, v] pairs");
      edges.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
    }
  } catch (const json::exception& e) {
    graph_error(std::string("field 'edges': ") + e.what());
  }
  try {
    const auto& feats = require_field(j, "features");
    if (static_cast<int>(feats.size()) != num_nodes) {
      graph_error("field 'features': expected " + std::to_string(num_nodes) + " rows, got " +
                  std::to_string(feats.size()));
    }
    const Eigen::Index f = feats.empty() ? 0 : static_cast<Eigen::Index>(feats.at(0).size());
    features.resize(num_nodes, f);
    for (int i = 0; i < num_nodes; ++i) {
      const auto& row = feats.at(static_cast<std::size_t>(i));
      if (static_cast<Eigen::Index>(row.size()) != f) {
        graph_error("field 'features': row " + std::to_string(i) + " has length " +
                    std::to_string(row.size()) + ", expected " + std::to_string(f));
      }
      for (Eigen::Index k = 0; k < f; ++k) {
        features(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
      }
    }
  } catch (const json::exception& e) {
    graph_error(std::string("field 'features': ") + e.what());
  }
  try {
    labels = require_field(j, "labels").get<std::vector<int>>();
    if (static_cast<int>(labels.size()) != num_nodes) {
      graph_error("field 'labels': expected " + std::to_string(num_nodes) + " entries");
    }
  } catch (const json::exception& e) {
    graph_error(std::string("field 'labels': ") + e.what());
  }
  try {
    num_classes = require_field(j, "num_classes").get<int>();
  } catch (const json::exception& e) {
    graph_error(std::string("field 'num_classes': ") + e.what());
  }
  auto read_mask = [&](const char* name) {
    try {
      return require_field(j, name).get<std::vector<int>>();
    } catch (const json::exception& e) {
      graph_error(std::string("field '") + name + "': " + e.what());
    }
  };
  masks.train = read_mask("train");
  masks.val = read_mask("val");
  masks.test = read_mask("test");

  Graph g = Graph::from_edges(num_nodes, edges, std::move(features), std::move(labels), num_classes);
  validate_split(g, masks);
  return {std::move(g), std::move(masks)};
}

void save_dataset(const std::string& path, const Graph& g, const SplitMasks& masks) {
  json j;
  j["num_nodes"] = g.num_nodes;
  j["num_classes"] = g.num_classes;
  json edges = json::array();
  for (const auto& [u, v] : g.edge_list()) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  json feats = json::array();
  for (int i = 0; i < g.num_nodes; ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < g.features.cols(); ++k) row.push_back(g.features(i, k));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  j["labels"] = g.labels;
  j["train"] = masks.train;
  j["val"] = masks.val;
  j["test"] = masks.test;
  std::ofstream out(path);
  if (!out) graph_error("cannot write dataset file '" + path + "'");
  out << j.dump() << '\n';
}

std::pair<Graph, SplitMasks> generate_sbm(const SbmParams& params) {
  if (params.block_sizes.empty()) graph_error("sbm: block list must not be empty");
  for (int s : params.block_sizes) {
    if (s < 1) graph_error("sbm: block sizes must be >= 1");
  }
  if (params.p_in < 0.0 || params.p_in > 1.0 || params.p_out < 0.0 || params.p_out > 1.0) {
    graph_error("sbm: probabilities must be in [0, 1]");
  }
  const int num_blocks = static_cast<int>(params.block_sizes.size());
  if (params.feature_dim < num_blocks) {
    graph_error("sbm: feature_dim must be >= number of blocks");
  }
  const int n = std::accumulate(params.block_sizes.begin(), params.block_sizes.end(), 0);

  std::vector<int> block_of(static_cast<std::size_t>(n));
  {
    int v = 0;
    for (int b = 0; b < num_blocks; ++b) {
      for (int i = 0; i < params.block_sizes[static_cast<std::size_t>(b)]; ++i) {
        block_of[static_cast<std::size_t>(v++)] = b;
      }
    }
  }

  RngStream edge_rng(params.seed, "sbm/edges");
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const double p = block_of[static_cast<std::size_t>(u)] == block_of[static_cast<std::size_t>(v)]
                           ? params.p_in
                           : params.p_out;
      if (edge_rng.bernoulli(p)) edges.emplace_back(u, v);
    }
  }

  RngStream noise_rng(params.seed, "sbm/noise");
  Matrix features = Matrix::Zero(n, params.feature_dim);
  for (int v = 0; v < n; ++v) {
    features(v, block_of[static_cast<std::size_t>(v)]) = 1.0;
    for (int k = 0; k < params.feature_dim; ++k) {
      features(v, k) += params.noise_sigma * noise_rng.gaussian();
    }
  }

  std::vector<int> labels(block_of.begin(), block_of.end());
  Graph g = Graph::from_edges(n, edges, std::move(features), std::move(labels), num_blocks);

  RngStream mask_rng(params.seed, "sbm/masks");
  SplitMasks masks;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (int b = 0; b < num_blocks; ++b) {
    std::vector<int> members;
    for (int v = 0; v < n; ++v) {
      if (block_of[static_cast<std::size_t>(v)] == b) members.push_back(v);
    }
    const int want = params.train_per_class + params.val_per_class;
    if (static_cast<int>(members.size()) < want) {
      graph_error("sbm: block " + std::to_string(b) + " too small for requested masks");
    }
    auto picks = mask_rng.sample_without_replacement(static_cast<int>(members.size()), want);
    for (int i = 0; i < params.train_per_class; ++i) {
      const int v = members[static_cast<std::size_t>(picks[static_cast<std::size_t>(i)])];
      masks.train.push_back(v);
      used[static_cast<std::size_t>(v)] = 1;
    }
    for (int i = params.train_per_class; i < want; ++i) {
      const int v = members[static_cast<std::size_t>(picks[static_cast<std::size_t>(i)])];
      masks.val.push_back(v);
      used[static_cast<std::size_t>(v)] = 1;
    }
  }
  for (int v = 0; v < n; ++v) {
    if (!used[static_cast<std::size_t>(v)]) masks.test.push_back(v);
  }
  std::sort(masks.train.begin(), masks.train.end());
  std::sort(masks.val.begin(), masks.val.end());
  validate_split(g, masks);
  return {std::move(g), std::move(masks)};
}

SpMatrix normalize_adjacency(const Graph& g) {
  const int n = g.num_nodes;
  std::vector<double> dhat(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) dhat[static_cast<std::size_t>(v)] = static_cast<double>(g.degree(v) + 1);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.col_idx.size() + static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u) {
    triplets.emplace_back(u, u, 1.0 / dhat[static_cast<std::size_t>(u)]);
    for (int v : g.neighbors(u)) {
      triplets.emplace_back(
          u, v, 1.0 / std::sqrt(dhat[static_cast<std::size_t>(u)] * dhat[static_cast<std::size_t>(v)]));
    }
  }
  SpMatrix a_hat(n, n);
  a_hat.setFromTriplets(triplets.begin(), triplets.end());
  return a_hat;
}

std::vector<std::vector<int>> bfs_distances(const Graph& g, const std::vector<int>& sources,
                                            std::optional<int> cutoff) {
  std::vector<std::vector<int>> out;
  out.reserve(sources.size());
  for (int s : sources) {
    if (s < 0 || s >= g.num_nodes) graph_error("bfs: source node out of range");
    std::vector<int> dist(static_cast<std::size_t>(g.num_nodes), kNoPath);
    std::deque<int> queue;
    dist[static_cast<std::size_t>(s)] = 0;
    queue.push_back(s);
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      const int du = dist[static_cast<std::size_t>(u)];
      if (cutoff && du >= *cutoff) continue;
      for (int v : g.neighbors(u)) {
        if (dist[static_cast<std::size_t>(v)] == kNoPath) {
          dist[static_cast<std::size_t>(v)] = du + 1;
          queue.push_back(v);
        }
      }
    }
    out.push_back(std::move(dist));
  }
  return out;
}

std::vector<int> khop_neighbors(const Graph& g, int v, int k) {
  if (k < 1) graph_error("khop_neighbors: k must be >= 1");
  auto dist = bfs_distances(g, {v}, k)[0];
  std::vector<int> out;
  for (int u = 0; u < g.num_nodes; ++u) {
    if (u != v && dist[static_cast<std::size_t>(u)] != kNoPath) out.push_back(u);
  }
  return out;
}

namespace {

// Max-degree node of `candidates`, ties to lowest index.
int max_degree_node(const Graph& g, const std::vector<int>& candidates) {
  int best = -1, best_deg = -1;
  for (int v : candidates) {
    const int d = g.degree(v);
    if (d > best_deg) {
      best_deg = d;
      best = v;
    }
  }
  return best;
}

}  // namespace

Partition partition_from_assignment(const Graph& g, const std::vector<int>& cluster_of) {
  if (static_cast<int>(cluster_of.size()) != g.num_nodes) {
    graph_error("partition: assignment length does not match num_nodes");
  }
  int k = 0;
  for (int c : cluster_of) {
    if (c < 0) graph_error("partition: negative cluster id");
    k = std::max(k, c + 1);
  }
  std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
  for (int v = 0; v < g.num_nodes; ++v) members[static_cast<std::size_t>(cluster_of[static_cast<std::size_t>(v)])].push_back(v);
  Partition part;
  part.num_clusters = k;
  part.cluster_of = cluster_of;
  part.centers.resize(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    if (members[static_cast<std::size_t>(c)].empty()) {
      graph_error("partition: cluster " + std::to_string(c) + " is empty");
    }
    part.centers[static_cast<std::size_t>(c)] = max_degree_node(g, members[static_cast<std::size_t>(c)]);
  }
  return part;
}

Partition partition_graph(const Graph& g, int k, std::uint64_t seed) {
  if (k < 1 || k > g.num_nodes) {
    graph_error("partition: k must satisfy 1 <= k <= num_nodes");
  }
  const int n = g.num_nodes;

  // Seed-dependent tie ranks; all algorithmic ties below break by tie_rank.
  std::vector<int> tie_rank(static_cast<std::size_t>(n));
  {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    RngStream rng(seed, "partition/ties");
    rng.shuffle(perm);
    for (int i = 0; i < n; ++i) tie_rank[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = i;
  }

  std::vector<int> cluster_of(static_cast<std::size_t>(n), -1);
  std::vector<int> seeds;
  auto pick_seed = [&](bool first) {
    // Farthest-first: maximize min hop distance to existing seeds (unreachable
    // counts as infinite), then degree, then tie rank.
    std::vector<int> min_dist(static_cast<std::size_t>(n), std::numeric_limits<int>::max());
    if (!first) {
      auto rows = bfs_distances(g, seeds);
      for (const auto& row : rows) {
        for (int v = 0; v < n; ++v) {
          if (row[static_cast<std::size_t>(v)] != kNoPath) {
            min_dist[static_cast<std::size_t>(v)] = std::min(min_dist[static_cast<std::size_t>(v)], row[static_cast<std::size_t>(v)]);
          }
        }
      }
    }
    int best = -1;
    auto better = [&](int a, int b) {  // true if a beats b
      if (b < 0) return true;
      if (first) {
        if (g.degree(a) != g.degree(b)) return g.degree(a) > g.degree(b);
        return tie_rank[static_cast<std::size_t>(a)] < tie_rank[static_cast<std::size_t>(b)];
      }
      if (min_dist[static_cast<std::size_t>(a)] != min_dist[static_cast<std::size_t>(b)]) {
        return min_dist[static_cast<std::size_t>(a)] > min_dist[static_cast<std::size_t>(b)];
      }
      if (g.degree(a) != g.degree(b)) return g.degree(a) > g.degree(b);
      return tie_rank[static_cast<std::size_t>(a)] < tie_rank[static_cast<std::size_t>(b)];
    };
    for (int v = 0; v < n; ++v) {
      if (cluster_of[static_cast<std::size_t>(v)] == -1 && better(v, best)) best = v;
    }
    return best;
  };

  // Multi-source BFS region growing, expanding the smallest cluster first.
  std::vector<std::deque<int>> frontier(static_cast<std::size_t>(k));
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int c = 0; c < k; ++c) {
    const int s = pick_seed(c == 0);
    seeds.push_back(s);
    cluster_of[static_cast<std::size_t>(s)] = c;
    frontier[static_cast<std::size_t>(c)].push_back(s);
    sizes[static_cast<std::size_t>(c)] = 1;
  }
  int assigned = k;
  while (assigned < n) {
    int c_pick = -1;
    for (int c = 0; c < k; ++c) {
      if (frontier[static_cast<std::size_t>(c)].empty()) continue;
      if (c_pick == -1 || sizes[static_cast<std::size_t>(c)] < sizes[static_cast<std::size_t>(c_pick)]) c_pick = c;
    }
    if (c_pick == -1) {
      // Remaining nodes unreachable from any seed: grow a new region inside
      // the smallest cluster id from the best unassigned node.
      std::vector<int> unassigned;
      for (int v = 0; v < n; ++v) {
        if (cluster_of[static_cast<std::size_t>(v)] == -1) unassigned.push_back(v);
      }
      int c_min = 0;
      for (int c = 1; c < k; ++c) {
        if (sizes[static_cast<std::size_t>(c)] < sizes[static_cast<std::size_t>(c_min)]) c_min = c;
      }
      const int s = max_degree_node(g, unassigned);
      cluster_of[static_cast<std::size_t>(s)] = c_min;
      frontier[static_cast<std::size_t>(c_min)].push_back(s);
      ++sizes[static_cast<std::size_t>(c_min)];
      ++assigned;
      continue;
    }
    const int u = frontier[static_cast<std::size_t>(c_pick)].front();
    frontier[static_cast<std::size_t>(c_pick)].pop_front();
    // Claim unassigned neighbors in tie-rank order.
    std::vector<int> nbrs(g.neighbors(u).begin(), g.neighbors(u).end());
    std::sort(nbrs.begin(), nbrs.end(), [&](int a, int b) {
      return tie_rank[static_cast<std::size_t>(a)] < tie_rank[static_cast<std::size_t>(b)];
    });
    for (int v : nbrs) {
      if (cluster_of[static_cast<std::size_t>(v)] == -1) {
        cluster_of[static_cast<std::size_t>(v)] = c_pick;
        frontier[static_cast<std::size_t>(c_pick)].push_back(v);
        ++sizes[static_cast<std::size_t>(c_pick)];
        ++assigned;
      }
    }
  }

  // One balancing pass: move boundary nodes from oversized to undersized clusters.
  const int target = (n + k - 1) / k;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return tie_rank[static_cast<std::size_t>(a)] < tie_rank[static_cast<std::size_t>(b)];
  });
  for (int v : order) {
    const int c = cluster_of[static_cast<std::size_t>(v)];
    if (sizes[static_cast<std::size_t>(c)] <= target) continue;
    int dest = -1;
    for (int u : g.neighbors(v)) {
      const int cu = cluster_of[static_cast<std::size_t>(u)];
      if (cu == c || sizes[static_cast<std::size_t>(cu)] >= target) continue;
      if (dest == -1 || sizes[static_cast<std::size_t>(cu)] < sizes[static_cast<std::size_t>(dest)]) dest = cu;
    }
    if (dest != -1) {
      cluster_of[static_cast<std::size_t>(v)] = dest;
      --sizes[static_cast<std::size_t>(c)];
      ++sizes[static_cast<std::size_t>(dest)];
    }
  }

  return partition_from_assignment(g, cluster_of);
}

}  // namespace ssgnn
