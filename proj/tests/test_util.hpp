#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ssgnn/graph.hpp"
#include "ssgnn/random.hpp"

namespace ssgnn::testing {

inline Graph make_graph(int n, const std::vector<std::pair<int, int>>& edges,
                        int num_classes = 2, int feature_dim = 2) {
  Matrix x = Matrix::Zero(n, feature_dim);
  for (int i = 0; i < n; ++i) x(i, i % feature_dim) = 1.0 + 0.1 * i;
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % num_classes;
  return Graph::from_edges(n, edges, std::move(x), std::move(labels), num_classes);
}

inline Graph path_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return make_graph(n, e);
}

inline Graph star_graph(int leaves) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return make_graph(leaves + 1, e);
}

inline Graph clique_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  }
  return make_graph(n, e);
}

inline Graph random_graph(int n, double p, std::uint64_t seed) {
  RngStream rng(seed, "test/random-graph");
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) e.emplace_back(i, j);
    }
  }
  return make_graph(n, e);
}

// Independent all-pairs shortest-path oracle.
inline std::vector<std::vector<int>> floyd_warshall(const Graph& g) {
  const int n = g.num_nodes;
  const int inf = 1 << 29;
  std::vector<std::vector<int>> d(static_cast<std::size_t>(n),
                                  std::vector<int>(static_cast<std::size_t>(n), inf));
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;
  for (int u = 0; u < n; ++u) {
    for (int v : g.neighbors(u)) d[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)] = 1;
  }
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int via = d[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +
                        d[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
        if (via < d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) {
          d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = via;
        }
      }
    }
  }
  for (auto& row : d) {
    for (int& x : row) {
      if (x >= inf) x = kNoPath;
    }
  }
  return d;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("ssgnn_test_" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline std::string write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
  return path;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace ssgnn::testing
