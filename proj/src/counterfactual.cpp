#include "cfattr/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfattr/error.hpp"
#include "cfattr/rng.hpp"

namespace cfattr {
namespace {

const FeatureSpace& lead_space(const std::vector<const Predictor*>& models, const Instance& x0,
                               const FeatureRanges& ranges) {
  if (models.empty()) throw InputError("no models supplied");
  for (const Predictor* m : models) {
    if (!m) throw InputError("null model");
    if (m->dim() != models[0]->dim()) throw InputError("models disagree on dimension");
  }
  if (int(x0.size()) != models[0]->dim()) throw InputError("instance dimension mismatch");
  ranges.validate();
  if (ranges.dim() != models[0]->dim()) throw InputError("range dimension mismatch");
  return models[0]->space();
}

double sample_coord(Rng& rng, const FeatureSpace& space, const FeatureRanges& ranges, int i) {
  if (space.kinds[i] == FeatureKind::CategoricalBinary)
    return rng.below(2) ? ranges.hi[i] : ranges.lo[i];
  return rng.uniform(ranges.lo[i], ranges.hi[i]);
}

CfResult success_result(const FeatureSpace& space, const Instance& x0, const Instance& x1,
                        double score, std::uint64_t draws) {
  CfResult res;
  res.success = true;
  res.pair = make_pair(space, x0, x1);
  res.best = x1;
  res.score = score;
  res.draws_used = draws;
  return res;
}

}  // namespace

double min_score(const std::vector<const Predictor*>& models, const Instance& x) {
  if (models.empty()) throw InputError("no models supplied");
  double worst = models[0]->predict(x);
  for (std::size_t j = 1; j < models.size(); ++j)
    worst = std::min(worst, models[j]->predict(x));
  return worst;
}

bool target_met(const std::vector<const Predictor*>& models, const CfTarget& target,
                const Instance& x) {
  return min_score(models, x) >= target.tau;
}

CfResult random_search_cf(const std::vector<const Predictor*>& models, const Instance& x0,
                          const CfTarget& target, std::uint64_t budget, std::uint64_t seed,
                          const FeatureRanges& ranges) {
  const FeatureSpace& space = lead_space(models, x0, ranges);
  if (budget < 1) throw InputError("budget must be >= 1");
  const int d = int(x0.size());

  const double base_score = min_score(models, x0);
  if (base_score >= target.tau) return success_result(space, x0, x0, base_score, 0);

  CfResult res;
  res.best = x0;
  res.score = base_score;

  Rng rng(seed);
  std::vector<int> order(d);
  for (std::uint64_t draw = 1; draw <= budget; ++draw) {
    Instance x = x0;
    const int changed = 1 + int(rng.below(std::uint64_t(d)));
    std::iota(order.begin(), order.end(), 0);
    for (int j = 0; j < changed; ++j) {  // partial Fisher-Yates picks the subset
      const int pick = j + int(rng.below(std::uint64_t(d - j)));
      std::swap(order[j], order[pick]);
      x[order[j]] = sample_coord(rng, space, ranges, order[j]);
    }
    const double score = min_score(models, x);
    if (score >= target.tau) return success_result(space, x0, x, score, draw);
    if (score > res.score) {
      res.best = x;
      res.score = score;
    }
    res.draws_used = draw;
  }
  return res;
}

CfResult growing_spheres_cf(const std::vector<const Predictor*>& models, const Instance& x0,
                            const CfTarget& target, const std::vector<double>& radii,
                            int samples_per_shell, std::uint64_t seed,
                            const FeatureRanges& ranges) {
  const FeatureSpace& space = lead_space(models, x0, ranges);
  if (radii.empty()) throw InputError("empty radius schedule");
  for (std::size_t j = 0; j < radii.size(); ++j) {
    if (!(radii[j] > 0.0)) throw InputError("radii must be positive");
    if (j > 0 && radii[j] <= radii[j - 1])
      throw InputError("radius schedule must be strictly increasing");
  }
  if (samples_per_shell < 1) throw InputError("need at least one sample per shell");
  const int d = int(x0.size());

  const double base_score = min_score(models, x0);
  if (base_score >= target.tau) return success_result(space, x0, x0, base_score, 0);

  CfResult res;
  res.best = x0;
  res.score = base_score;

  Rng rng(seed);
  std::vector<double> dir(d);
  double r_prev = 0.0;
  for (double r : radii) {
    for (int s = 0; s < samples_per_shell; ++s) {
      double norm2 = 0.0;
      for (int i = 0; i < d; ++i) {
        dir[i] = rng.next_gaussian();
        norm2 += dir[i] * dir[i];
      }
      const double norm = std::sqrt(norm2);
      if (norm == 0.0) continue;
      const double rad = r_prev + (r - r_prev) * (1.0 - rng.next_double());  // in (r_prev, r]
      Instance x = x0;
      for (int i = 0; i < d; ++i) {
        double v = x0[i] + rad / norm * dir[i];
        v = std::min(std::max(v, ranges.lo[i]), ranges.hi[i]);
        if (space.kinds[i] == FeatureKind::CategoricalBinary) {
          const double mid = 0.5 * (ranges.lo[i] + ranges.hi[i]);
          v = (v >= mid) ? ranges.hi[i] : ranges.lo[i];
        }
        x[i] = v;
      }
      ++res.draws_used;
      const double score = min_score(models, x);
      if (score >= target.tau) return success_result(space, x0, x, score, res.draws_used);
      if (score > res.score) {
        res.best = x;
        res.score = score;
      }
    }
    r_prev = r;
  }
  return res;
}

CfResult genetic_cf(const std::vector<const Predictor*>& models, const Instance& x0,
                    const CfTarget& target, int population, int generations, std::uint64_t seed,
                    const FeatureRanges& ranges) {
  const FeatureSpace& space = lead_space(models, x0, ranges);
  if (population < 2) throw InputError("population must be >= 2");
  if (generations < 1) throw InputError("need at least one generation");
  const int d = int(x0.size());
  constexpr double kMutate = 0.1;

  Rng rng(seed);
  std::vector<Instance> pop(population);
  pop[0] = x0;
  for (int j = 1; j < population; ++j) {
    Instance x = x0;
    for (int i = 0; i < d; ++i)
      if (rng.next_double() < 0.5) x[i] = sample_coord(rng, space, ranges, i);
    pop[j] = std::move(x);
  }

  CfResult res;
  std::vector<double> fit(population);
  auto evaluate = [&]() -> int {
    int best = 0;
    for (int j = 0; j < population; ++j) {
      fit[j] = min_score(models, pop[j]);
      ++res.draws_used;
      if (fit[j] > fit[best]) best = j;
    }
    return best;
  };
  auto tournament = [&]() -> int {
    int best = int(rng.below(std::uint64_t(population)));
    for (int t = 1; t < 3; ++t) {
      const int c = int(rng.below(std::uint64_t(population)));
      if (fit[c] > fit[best]) best = c;
    }
    return best;
  };

  // success keeps the trace and draw count accumulated so far
  auto succeed = [&](const Instance& x1, double score) {
    CfResult out = success_result(space, x0, x1, score, res.draws_used);
    out.best_trace = res.best_trace;
    return out;
  };

  int best = evaluate();
  res.best = pop[best];
  res.score = fit[best];
  res.best_trace.push_back(fit[best]);
  if (fit[best] >= target.tau) return succeed(pop[best], fit[best]);

  for (int gen = 1; gen < generations; ++gen) {
    std::vector<Instance> next(population);
    next[0] = pop[best];  // elitism
    for (int j = 1; j < population; ++j) {
      const Instance& a = pop[tournament()];
      const Instance& b = pop[tournament()];
      Instance child(d);
      for (int i = 0; i < d; ++i) child[i] = (rng.next_double() < 0.5) ? a[i] : b[i];
      for (int i = 0; i < d; ++i)
        if (rng.next_double() < kMutate) child[i] = sample_coord(rng, space, ranges, i);
      next[j] = std::move(child);
    }
    pop = std::move(next);
    best = evaluate();
    if (fit[best] > res.score) {
      res.best = pop[best];
      res.score = fit[best];
    }
    res.best_trace.push_back(res.score);
    if (fit[best] >= target.tau) return succeed(pop[best], fit[best]);
  }
  return res;  // best of run, target unmet
}

std::vector<CounterfactualPair> nn_pairing(const Dataset& data, const std::string& baseline_class,
                                           const std::string& target_class, std::size_t count,
                                           double epsilon, Distance metric) {
  if (data.rows.size() != data.labels.size()) throw InputError("dataset rows/labels mismatch");
  std::vector<std::size_t> base_rows, target_rows;
  for (std::size_t r = 0; r < data.rows.size(); ++r) {
    if (data.labels[r] == baseline_class) base_rows.push_back(r);
    if (data.labels[r] == target_class) target_rows.push_back(r);
  }
  if (base_rows.empty()) throw InputError("no rows labeled '" + baseline_class + "'");
  if (target_rows.empty()) throw InputError("no rows labeled '" + target_class + "'");
  if (count > 0 && base_rows.size() > count) base_rows.resize(count);

  std::vector<CounterfactualPair> pairs;
  pairs.reserve(base_rows.size());
  for (std::size_t b : base_rows) {
    std::size_t nn = target_rows[0];
    double best = -1.0;
    for (std::size_t t : target_rows) {
      double dist = 0.0;
      for (std::size_t i = 0; i < data.space.dim(); ++i) {
        const double gap = data.rows[b][i] - data.rows[t][i];
        dist += (metric == Distance::Euclidean) ? gap * gap : std::abs(gap);
      }
      if (best < 0.0 || dist < best) {  // ties keep the earliest row
        best = dist;
        nn = t;
      }
    }
    pairs.push_back(make_pair(data.space, data.rows[b], data.rows[nn], epsilon));
  }
  return pairs;
}

int PatchCurve::budget_for(double score_level) const {
  for (std::size_t K = 0; K < scores.size(); ++K)
    if (scores[K] >= score_level) return int(K);
  return -1;
}

PatchCurve patch_budget_test(const Predictor& model, const CounterfactualPair& pair,
                             const std::vector<int>& ranking) {
  std::vector<int> sorted = ranking;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != pair.changed) throw InputError("ranking is not a permutation of the changed set");

  const int k = int(ranking.size());
  std::vector<Instance> pts;
  pts.reserve(k + 1);
  Instance x = pair.x0;
  pts.push_back(x);
  for (int K = 1; K <= k; ++K) {
    x[ranking[K - 1]] = pair.x1[ranking[K - 1]];
    pts.push_back(x);
  }

  PatchCurve curve;
  curve.ranking = ranking;
  curve.scores = predict_batch(model, pts, 1);
  curve.k_at_half = curve.budget_for(0.5);
  curve.k_at_09 = curve.budget_for(0.9);
  return curve;
}

PatchBand random_patch_band(const Predictor& model, const CounterfactualPair& pair, int seeds,
                            std::uint64_t seed) {
  if (seeds < 1) throw InputError("need at least one random ranking");
  const int k = int(pair.changed.size());
  std::vector<std::vector<double>> curves;
  curves.reserve(seeds);
  for (int s = 0; s < seeds; ++s) {
    Rng rng(Rng::stream_seed(seed, std::uint64_t(s)));
    std::vector<int> ranking = pair.changed;
    rng.shuffle(ranking);
    curves.push_back(patch_budget_test(model, pair, ranking).scores);
  }

  auto quantile = [](std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - double(lo));
  };

  PatchBand band;
  for (int K = 0; K <= k; ++K) {
    std::vector<double> col;
    col.reserve(seeds);
    for (const auto& c : curves) col.push_back(c[K]);
    double mean = 0.0;
    for (double v : col) mean += v;
    band.mean.push_back(mean / double(seeds));
    band.p10.push_back(quantile(col, 0.10));
    band.p90.push_back(quantile(col, 0.90));
  }
  return band;
}

}  // namespace cfattr
