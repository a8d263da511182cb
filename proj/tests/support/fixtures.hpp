#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "graph/graph.hpp"
#include "numerics/rng.hpp"
#include "support/scratch.hpp"

namespace histograph::testing {

inline std::vector<graph::NucleusRecord> random_nuclei(std::size_t n, numerics::SplitMix64& rng,
                                                       double field = 300.0) {
  std::vector<graph::NucleusRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({static_cast<std::int64_t>(i), rng.uniform(0.0, field), rng.uniform(0.0, field)});
  }
  return out;
}

inline graph::NucleusGraph random_graph(std::size_t n, std::uint64_t seed, double field = 300.0) {
  numerics::SplitMix64 rng(seed);
  return graph::build_graph(random_nuclei(n, rng, field), {});
}

inline numerics::Tensor random_tensor(numerics::Shape shape, numerics::SplitMix64& rng, double lo = -1.0,
                                      double hi = 1.0) {
  numerics::Tensor t(std::move(shape), 0.0);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Symmetric, zero-diagonal, with roughly `density` of the pairs linked.
inline numerics::Tensor random_adjacency(std::size_t n, std::size_t channels, numerics::SplitMix64& rng,
                                         double density = 0.5) {
  numerics::Tensor a({n, n, channels}, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.uniform() >= density) continue;
      for (std::size_t l = 0; l < channels; ++l) {
        const double w = rng.uniform(0.1, 1.0);
        a.at(i, j, l) = w;
        a.at(j, i, l) = w;
      }
    }
  return a;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, numerics::SplitMix64& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

}  // namespace histograph::testing
