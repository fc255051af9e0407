#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/dataset.hpp"
#include "cfattr/model.hpp"

namespace cfattr {

// Success predicate: the minimum score across all supplied models must
// reach tau (a conservative aggregate when several scorers must agree).
struct CfTarget {
  double tau = 0.8;
};

double min_score(const std::vector<const Predictor*>& models, const Instance& x);
bool target_met(const std::vector<const Predictor*>& models, const CfTarget& target,
                const Instance& x);

struct CfResult {
  bool success = false;
  CounterfactualPair pair;  // valid only on success
  Instance best;            // best candidate seen, success or not
  double score = 0.0;       // aggregated score of `best`
  std::uint64_t draws_used = 0;
  std::vector<double> best_trace;  // genetic search: best score per generation
};

// Randomized subset-and-resample search: each draw picks a random feature
// subset and redraws those coordinates uniformly in range.
CfResult random_search_cf(const std::vector<const Predictor*>& models, const Instance& x0,
                          const CfTarget& target, std::uint64_t budget, std::uint64_t seed,
                          const FeatureRanges& ranges);

// Shell sampling around x0, inner shells first; radii strictly increasing.
CfResult growing_spheres_cf(const std::vector<const Predictor*>& models, const Instance& x0,
                            const CfTarget& target, const std::vector<double>& radii,
                            int samples_per_shell, std::uint64_t seed,
                            const FeatureRanges& ranges);

// Tournament selection, uniform crossover, per-gene mutation, elitism.
CfResult genetic_cf(const std::vector<const Predictor*>& models, const Instance& x0,
                    const CfTarget& target, int population, int generations, std::uint64_t seed,
                    const FeatureRanges& ranges);

enum class Distance { Euclidean, Manhattan };

// For each baseline-class row (dataset order, up to `count`, 0 = all), its
// nearest target-class row becomes the counterfactual endpoint.
std::vector<CounterfactualPair> nn_pairing(const Dataset& data, const std::string& baseline_class,
                                           const std::string& target_class, std::size_t count,
                                           double epsilon, Distance metric = Distance::Euclidean);

// Score trajectory when only the top-K ranked changed features are patched
// to their counterfactual values, K = 0..k.
struct PatchCurve {
  std::vector<int> ranking;    // permutation of the changed set
  std::vector<double> scores;  // length k+1, scores[K]
  int k_at_half = -1;          // smallest K with score >= 0.5, -1 if never
  int k_at_09 = -1;            // smallest K with score >= 0.9

  int budget_for(double score_level) const;
};

PatchCurve patch_budget_test(const Predictor& model, const CounterfactualPair& pair,
                             const std::vector<int>& ranking);

// Random-ranking reference: per-budget mean and 10/90 percentiles.
struct PatchBand {
  std::vector<double> mean, p10, p90;
};

PatchBand random_patch_band(const Predictor& model, const CounterfactualPair& pair, int seeds = 10,
                            std::uint64_t seed = 0);

}  // namespace cfattr
