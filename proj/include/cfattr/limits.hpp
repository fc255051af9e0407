#pragma once

#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/cube.hpp"
#include "cfattr/model.hpp"

namespace cfattr {

// Diagonal path integrals of the residual surface, the infinite-resolution
// reference for micro-Shapley shares. Finite differences on a black box, so
// a testing tool rather than a product path.
struct DiagonalIGResult {
  std::vector<int> pot;
  std::vector<double> integrals;  // per pot member
  int nodes = 0;
  double fd_step = 0.0;
  bool smooth_model = true;  // false skips convergence assertions downstream

  double total() const;
};

DiagonalIGResult diagonal_ig(const Predictor& model, const CounterfactualPair& pair,
                             const std::vector<int>& pot, int nodes = 257, double fd_step = 1e-4,
                             int threads = 1);

struct ConvergenceCurve {
  std::vector<int> pot;
  DiagonalIGResult limit;
  std::vector<int> ms;
  std::vector<std::vector<double>> shares;  // [schedule entry][pot member]
  std::vector<std::vector<double>> gaps;    // |share - limit integral|
};

// Shapley-weight grid shares at each uniform m of the schedule, with gaps
// against the diagonal integrals.
ConvergenceCurve convergence_curve(const Predictor& model, const CounterfactualPair& pair,
                                   const std::vector<int>& pot, const std::vector<int>& m_schedule,
                                   int nodes = 257, double fd_step = 1e-4, int threads = 1);

// Conservative resolution picker: refine m until every feature share moves
// less than epsilon across `consecutive` successive refinements.
struct SaturationPolicy {
  double epsilon = 0.001;  // 0.1 percentage points, in fraction-of-dy units
  int consecutive = 3;
  std::vector<int> schedule = {1, 2, 3, 4, 5, 6, 8, 10, 12, 15};
  bool raw_units = false;  // interpret epsilon on raw shares instead

  void validate() const;
};

struct SaturationResult {
  int chosen_m = 0;
  bool saturated = false;
  std::vector<int> features;  // changed set, global ids
  std::vector<int> ms;
  std::vector<std::vector<double>> shares;  // [schedule entry][feature]
};

// Shares here are full Shapley-rule locals (singleton pots plus all grid
// pots), so the trace reflects everything a report would show.
SaturationResult saturate_m(const Predictor& model, const CounterfactualPair& pair,
                            const SaturationPolicy& policy, int threads = 1);

}  // namespace cfattr
