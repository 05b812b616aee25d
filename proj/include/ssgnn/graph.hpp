#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssgnn/dense.hpp"
#include "ssgnn/random.hpp"

namespace ssgnn {

constexpr int kUnlabeled = -1;
// Returned by bfs_distances for nodes that are unreachable, or (when a hop
// cutoff is given) further than the cutoff.
constexpr int kNoPath = -1;

// Undirected graph: symmetric CSR adjacency without self-loops, dense node
// features, per-node class labels (kUnlabeled allowed). Immutable after
// construction; masked-edge variants are new Graph values.
struct Graph {
  int num_nodes = 0;
  int num_classes = 0;
  std::vector<int> row_ptr;  // size num_nodes + 1
  std::vector<int> col_idx;  // strictly increasing within each row
  Matrix features;           // num_nodes x F
  std::vector<int> labels;   // class in [0, num_classes) or kUnlabeled

  // Symmetrizes, deduplicates and drops self-loops, then validates.
  static Graph from_edges(int num_nodes, const std::vector<std::pair<int, int>>& edges,
                          Matrix features, std::vector<int> labels, int num_classes);

  int degree(int v) const { return row_ptr[static_cast<std::size_t>(v) + 1] - row_ptr[static_cast<std::size_t>(v)]; }

  std::span<const int> neighbors(int v) const {
    return {col_idx.data() + row_ptr[static_cast<std::size_t>(v)],
            col_idx.data() + row_ptr[static_cast<std::size_t>(v) + 1]};
  }

  bool has_edge(int u, int v) const;

  // Count of undirected edges (each stored twice in CSR).
  int num_edges() const { return static_cast<int>(col_idx.size()) / 2; }

  // Unordered edge list with u < v.
  std::vector<std::pair<int, int>> edge_list() const;

  // New graph with the given undirected edges removed (both directions).
  Graph without_edges(const std::vector<std::pair<int, int>>& removed) const;
};

struct SplitMasks {
  std::vector<int> train;  // labeled nodes driving the task loss (V_L)
  std::vector<int> val;
  std::vector<int> test;
};

// Checks the Graph/SplitMasks invariants; throws std::runtime_error on violation.
void validate_split(const Graph& g, const SplitMasks& masks);

// Nodes not in the train mask, ascending (the SSL domain D_U).
std::vector<int> unlabeled_nodes(const Graph& g, const SplitMasks& masks);

// Graph-JSON I/O. Format: object with num_nodes, edges ([u,v] pairs,
// undirected; duplicates and self-loops tolerated), features (N rows of F
// floats), labels (N ints, -1 = unlabeled), num_classes, train/val/test
// (node index arrays).
std::pair<Graph, SplitMasks> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Graph& g, const SplitMasks& masks);

struct SbmParams {
  std::vector<int> block_sizes;
  double p_in = 0.5;
  double p_out = 0.05;
  int feature_dim = 8;          // must be >= number of blocks
  double noise_sigma = 0.1;
  int train_per_class = 5;
  int val_per_class = 5;
  std::uint64_t seed = 0;
};

// Stochastic block model with block-id labels; features are a one-hot block
// indicator plus Gaussian noise. Deterministic in the seed.
std::pair<Graph, SplitMasks> generate_sbm(const SbmParams& params);

// A_hat = D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
// Exactly symmetric; isolated nodes get A_hat(v,v) = 1.
SpMatrix normalize_adjacency(const Graph& g);

// Unweighted shortest-path hop counts from each source (one row per source).
// With a cutoff c, entries farther than c hops are kNoPath and the search
// stops at depth c.
std::vector<std::vector<int>> bfs_distances(const Graph& g, const std::vector<int>& sources,
                                            std::optional<int> cutoff = std::nullopt);

// All nodes u != v within k hops of v, ascending.
std::vector<int> khop_neighbors(const Graph& g, int v, int k);

struct Partition {
  int num_clusters = 0;
  std::vector<int> cluster_of;  // per node, in [0, num_clusters)
  std::vector<int> centers;     // per cluster: max-degree member, ties to lowest index
};

// Greedy BFS region growing from farthest-first seeds (max-degree first),
// followed by one balancing pass that moves boundary nodes from oversized to
// undersized clusters. Deterministic for a fixed seed; all clusters non-empty.
Partition partition_graph(const Graph& g, int k, std::uint64_t seed);

// Builds a Partition from externally computed cluster ids (one per node),
// computing centers per the Partition invariant.
Partition partition_from_assignment(const Graph& g, const std::vector<int>& cluster_of);

}  // namespace ssgnn
