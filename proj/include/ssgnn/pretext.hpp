#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ssgnn/gcn.hpp"
#include "ssgnn/graph.hpp"
#include "ssgnn/tape.hpp"

#include <json.hpp>

namespace ssgnn {

enum class PretextKind {
  NodeProperty,
  EdgeMask,
  PairwiseDistance,
  Distance2Clusters,
  AttributeMask,
  PairwiseAttrSim,
};

struct PretextConfig {
  int m_e = 0;            // masked edges (EdgeMask); 0 lets callers derive from a fraction
  int m_a = 0;            // masked nodes (AttributeMask)
  int d_pca = 256;        // capped at F
  int k_clusters = 10;
  int pair_sample = 4000; // pairs sampled per epoch (PairwiseDistance)
  int k_pairs = 3;        // top/bottom K per node (PairwiseAttrSim)
  std::vector<int> external_partition;  // overrides the built-in partitioner when non-empty
};

// --- Per-task target payloads -----------------------------------------------

struct DegreeTarget {
  Matrix degrees;  // N x 1
};

struct EdgePairsTarget {
  std::vector<std::pair<int, int>> positives;  // masked edges M_e
  std::vector<std::pair<int, int>> negatives;  // sampled non-edges, same size
  Graph masked;                                // g with M_e removed
};

struct DistPairsTarget {
  // Pair pools per distance category 0..3 (hop 1, 2, 3, >=4/unreachable),
  // packed as u * N + v with u < v.
  std::vector<std::vector<std::uint64_t>> pools;
  int num_nodes = 0;
  int pair_sample = 0;
};

struct ClusterDistTarget {
  Matrix dists;  // N x k, hop distance to each cluster center, unreachable capped at N
  Partition partition;
};

struct AttrMaskTarget {
  std::vector<int> masked_nodes;
  Matrix ssl_input;      // PCA features with masked rows zeroed
  Matrix pca_features;   // unmasked PCA features (targets; also the task input)
};

struct AttrSimTarget {
  std::vector<std::pair<int, int>> pairs;  // T = T_s union T_d, deduplicated
  std::vector<double> sims;
};

using PretextTarget = std::variant<DegreeTarget, EdgePairsTarget, DistPairsTarget,
                                   ClusterDistTarget, AttrMaskTarget, AttrSimTarget>;

// --- Target generation -------------------------------------------------------

DegreeTarget node_property_targets(const Graph& g);
EdgePairsTarget edgemask_setup(const Graph& g, int m_e, std::uint64_t seed);
DistPairsTarget pairwise_distance_targets(const Graph& g);
ClusterDistTarget distance2clusters_targets(const Graph& g, int k, std::uint64_t seed,
                                            const std::vector<int>* external_partition = nullptr);
AttrMaskTarget attributemask_setup(const Matrix& x, int m_a, int d_pca, std::uint64_t seed);
AttrSimTarget pairwise_attrsim_pairs(const Matrix& x, int k_pairs,
                                     const std::vector<int>& anchors);

PretextTarget build_pretext_target(PretextKind kind, const Graph& g, const SplitMasks& masks,
                                   const PretextConfig& cfg, std::uint64_t seed);

// Class-balanced sample of `target.pair_sample` distinct pairs (n/4 per
// category, backfilled from category 3), with their category labels.
struct SampledPairs {
  std::vector<int> left, right;
  std::vector<int> categories;
};
SampledPairs sample_distance_pairs(const DistPairsTarget& target, std::uint64_t seed,
                                   std::uint64_t epoch);

// SSL adapter output dimension for a target (1, 1-logit, 4, k, d_pca, 1).
int ssl_output_dim(const PretextTarget& target);

// Tasks whose SSL branch runs the extractor on a modified input rather than
// sharing the task branch's Z (EdgeMask: masked graph; AttributeMask: masked
// features).
bool needs_separate_ssl_forward(PretextKind kind);

// Assembles the SSL loss for `target` given the SSL branch's extractor output.
ad::Var pretext_ssl_loss(ad::Tape& tape, const PretextTarget& target, ad::Var z,
                         const ParamVars& pv, const ArchConfig& arch,
                         const std::vector<int>& unlabeled, bool train,
                         std::uint64_t master_seed, std::uint64_t epoch);

nlohmann::json pretext_target_to_json(const PretextTarget& target);

PretextKind pretext_kind_of(const PretextTarget& target);

}  // namespace ssgnn
