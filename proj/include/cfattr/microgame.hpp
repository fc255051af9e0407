#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfattr/cube.hpp"

namespace cfattr {

enum class LesRule { Shapley, Solidarity, EqualSurplus };

LesRule les_rule_from_name(const std::string& name);
const char* les_rule_name(LesRule rule);

// Scalar sequence b(0..n) with b(0)=0, b(n)=1. Shapley is b==1; other
// members reweight how marginal surpluses move through coalition sizes.
struct LESWeights {
  int n = 0;
  std::vector<double> b;

  void validate() const;
};

LESWeights les_preset(LesRule rule, int n);
LESWeights les_preset(const std::string& name, int n);

// TU game on grid-step players (i, s), i in u, 1 <= s <= m_i. A coalition's
// worth depends only on its per-feature counts p(A): v(A) = r_{p(A)}.
struct MicroGame {
  const ResidualGrid* rg = nullptr;
  int n = 0;                    // sum of m_i
  std::vector<int> player_axis; // micro index -> pot-local axis, feature-major
};

MicroGame make_microgame(const ResidualGrid& rg);

double micro_value(const MicroGame& mg, std::uint32_t coalition);

struct PotShares {
  std::vector<int> pot;
  std::string rule;
  std::vector<double> shares;  // aligned with pot; sums to the pot value
  std::vector<double> micro;   // per-micro-player payoffs (enumeration only)
};

// Hard cap for the O(n 2^n) enumeration oracle.
constexpr int kEnumerateCap = 22;

// Exact LES payoffs by summing over all micro-coalitions. Oracle and
// benchmark reference only; throws CapacityError past kEnumerateCap.
PotShares enumerate_les(const MicroGame& mg, const LESWeights& b, const std::string& rule_label);

// Closed form over grid states: one pass over p with p_i < m_i, permutation
// weight and multiplicity combined in log space, one exp per state.
double grid_state_les(const MicroGame& mg, const LESWeights& b, int feature);

PotShares grid_state_les_all(const MicroGame& mg, const LESWeights& b,
                             const std::string& rule_label);

// Equal Surplus collapses on a residual grid: micro singletons sit on the
// zero boundary, so each feature gets m_i/n of the far-corner pot.
PotShares equal_surplus_shares(const MicroGame& mg);

// phi_u split evenly over pot members (the one-step baseline rule).
std::vector<double> equal_split(double phi, const std::vector<int>& pot);

}  // namespace cfattr
