#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfattr/model.hpp"

namespace cfattr {

// Bitmask over the ordered changed-feature support of a pair (bit j is
// support[j]).
using Mask = std::uint32_t;

inline int popcount(Mask m) { return __builtin_popcount(m); }

constexpr int kExhaustiveCap = 12;  // 2^12 coalition evaluations

// Baseline/counterfactual endpoints and the derived changed-feature set.
// Features whose move is at most change_epsilon are frozen at x0 everywhere:
// they are exact null players of the induced game, so dropping them shrinks
// the 2^k enumeration without changing any allocation.
struct CounterfactualPair {
  FeatureSpace space;
  Instance x0;
  Instance x1;
  std::vector<double> delta;  // x1 - x0, all d coordinates
  std::vector<int> changed;   // ascending feature indices with |delta| > eps
  double change_epsilon = 1e-12;

  int k() const { return int(changed.size()); }
};

CounterfactualPair make_pair(FeatureSpace space, Instance x0, Instance x1,
                             double change_epsilon = 1e-12);
CounterfactualPair load_pair(const Predictor& model, const std::string& path,
                             double change_epsilon = 1e-12);
void save_pair(const CounterfactualPair& pair, const std::string& path);

// All 2^k coalition values V(S) = g(x^S) - g(x0) over the changed support.
struct ValueTable {
  std::vector<int> support;
  std::vector<double> v;  // indexed by Mask; v[0] == 0
  double g0 = 0.0;
  double dy = 0.0;  // V(full support)

  double full_mask_value() const { return v.back(); }
};

// Harsanyi pots: phi[u] for every coalition mask u over the same support.
struct DividendTable {
  std::vector<int> support;
  std::vector<double> phi;  // phi[0] == 0
};

// x^S: coordinate i moves to x1_i iff i in S (S given over the changed
// support); everything else stays at x0. S must not touch unchanged features.
Instance mixed_input(const CounterfactualPair& pair, Mask s);

ValueTable coalition_values(const Predictor& model, const CounterfactualPair& pair,
                            int cap = kExhaustiveCap, int threads = 1);

// In-place fast Moebius transform, O(k 2^k).
DividendTable dividends(const ValueTable& vt);

// Sum of pots over submasks of s; equals V(s) by Moebius inversion.
double reconstruct(const DividendTable& dt, Mask s);

}  // namespace cfattr
