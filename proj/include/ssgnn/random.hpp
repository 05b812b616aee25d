#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace ssgnn {

// Every source of randomness in the library draws from an RngStream derived
// from (master seed, purpose tag, counter). Streams with distinct tags are
// independent, so e.g. enabling a pretext task never shifts the draws used
// for parameter initialization.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t counter = 0) {
  std::uint64_t h = splitmix64(master ^ splitmix64(fnv1a64(tag)));
  return splitmix64(h ^ splitmix64(counter * 0x9E3779B97F4A7C15ULL + 1));
}

class RngStream {
 public:
  RngStream(std::uint64_t master, std::string_view tag, std::uint64_t counter = 0)
      : engine_(derive_seed(master, tag, counter)) {}

  explicit RngStream(std::uint64_t raw_seed) : engine_(raw_seed) {}

  std::mt19937_64& engine() { return engine_; }

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double gaussian(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  // Inclusive range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }

  bool bernoulli(double p) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_) < p;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), engine_);
  }

  // `count` distinct indices from [0, population), in shuffled order.
  std::vector<int> sample_without_replacement(int population, int count) {
    if (count > population) {
      throw std::invalid_argument("sample_without_replacement: count exceeds population");
    }
    std::vector<int> idx(static_cast<std::size_t>(population));
    for (int i = 0; i < population; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < count; ++i) {
      const auto j = uniform_int(i, population - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(count));
    return idx;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ssgnn
