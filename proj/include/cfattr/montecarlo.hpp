#pragma once

#include <cstdint>
#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/model.hpp"

namespace cfattr {

struct McConfig {
  std::uint64_t perms = 1000;  // sampled permutations (base count when antithetic)
  std::uint64_t seed = 0;
  bool antithetic = false;  // run each sampled permutation with its reversal
  int batch = 64;           // permutations evaluated per model batch
  int threads = 1;

  void validate() const;
};

struct McEstimate {
  std::vector<int> features;  // changed set, global ids
  std::vector<double> estimate;
  std::vector<double> std_error;
  std::uint64_t perms = 0;  // permutation walks actually used
  std::uint64_t seed = 0;
  double dy = 0.0;

  double total() const;
};

// Permutation-sampled Shapley over the macro game V on the changed set.
// Marginals telescope per walk, so estimates sum to dy up to accumulation.
McEstimate mc_macro_shapley(const Predictor& model, const CounterfactualPair& pair,
                            const McConfig& cfg);

// Permutation-sampled Shapley over the full micro game: all k*m grid-step
// players, game value = model at the fractional grid state minus g(x0).
// Replica marginals are folded into their owning feature.
McEstimate mc_micro_shapley(const Predictor& model, const CounterfactualPair& pair, int m,
                            const McConfig& cfg);

}  // namespace cfattr
