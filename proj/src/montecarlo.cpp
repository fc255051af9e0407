#include "cfattr/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfattr/cube.hpp"
#include "cfattr/error.hpp"
#include "cfattr/parallel.hpp"
#include "cfattr/rng.hpp"

namespace cfattr {
namespace {

struct BlockStats {
  std::vector<double> sum;    // per feature, over per-walk totals
  std::vector<double> s_sum;  // per feature, over sample units (pair means)
  std::vector<double> s_sumsq;
  std::uint64_t samples = 0;
};

// Shared permutation engine: per-feature step counts m_a over the changed
// set; macro Shapley is the m == 1 instance. One sample unit is a single
// permutation, or a (permutation, reversal) pair under antithetic sampling.
McEstimate run_engine(const Predictor& model, const CounterfactualPair& pair,
                      const std::vector<int>& m, const McConfig& cfg) {
  cfg.validate();
  const std::vector<int>& feats = pair.changed;
  const int k = int(feats.size());
  if (k == 0) throw InputError("changed set is empty");

  int n = 0;
  std::vector<int> player_axis;
  for (int a = 0; a < k; ++a) {
    if (m[a] < 1) throw InputError("grid resolution must be >= 1");
    n += m[a];
    for (int s = 0; s < m[a]; ++s) player_axis.push_back(a);
  }

  const double g0 = model.predict(pair.x0);
  const double g1 = model.predict(pair.x1);

  const std::uint64_t units = cfg.perms;  // independent sample units
  const int walks_per_unit = cfg.antithetic ? 2 : 1;
  const std::uint64_t unit_block = std::uint64_t(cfg.batch);
  const std::size_t blocks = std::size_t((units + unit_block - 1) / unit_block);

  std::vector<BlockStats> parts(blocks);
  parallel_for(blocks, cfg.threads, [&](std::size_t bi) {
    BlockStats st;
    st.sum.assign(k, 0.0);
    st.s_sum.assign(k, 0.0);
    st.s_sumsq.assign(k, 0.0);

    const std::uint64_t lo = bi * unit_block;
    const std::uint64_t hi = std::min(units, lo + unit_block);

    // One flat evaluation batch for the whole block: every walk visits n
    // states past the origin, each possibly mixture-expanded.
    std::vector<Instance> points;
    std::vector<double> weights;
    std::vector<std::size_t> owner;  // expansion row -> state slot
    std::size_t slot_count = 0;

    std::vector<int> perm(n);
    std::vector<int> p(k);
    std::vector<double> t(k);
    std::vector<std::vector<int>> unit_perms;
    for (std::uint64_t u = lo; u < hi; ++u) {
      Rng rng(Rng::stream_seed(cfg.seed, u));
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      unit_perms.push_back(perm);
      for (int rev = 0; rev < walks_per_unit; ++rev) {
        std::fill(p.begin(), p.end(), 0);
        for (int s = 0; s < n; ++s) {
          const int player = rev ? perm[n - 1 - s] : perm[s];
          ++p[player_axis[player]];
          for (int a = 0; a < k; ++a) t[a] = double(p[a]) / double(m[a]);
          MixtureExpansion ex = mixture_expansion(pair, feats, t);
          for (std::size_t j = 0; j < ex.points.size(); ++j) {
            points.push_back(std::move(ex.points[j]));
            weights.push_back(ex.weights[j]);
            owner.push_back(slot_count);
          }
          ++slot_count;
        }
      }
    }

    std::vector<double> y = predict_batch(model, points, 1);
    std::vector<double> value(slot_count, 0.0);
    for (std::size_t j = 0; j < y.size(); ++j) value[owner[j]] += weights[j] * y[j];
    for (double& v : value) v -= g0;

    std::size_t slot = 0;
    std::vector<double> walk_total(k);
    std::vector<double> unit_mean(k);
    for (std::uint64_t u = lo; u < hi; ++u) {
      const std::vector<int>& base = unit_perms[u - lo];
      std::fill(unit_mean.begin(), unit_mean.end(), 0.0);
      for (int rev = 0; rev < walks_per_unit; ++rev) {
        std::fill(walk_total.begin(), walk_total.end(), 0.0);
        double prev = 0.0;  // v at the empty state
        for (int s = 0; s < n; ++s) {
          const int player = rev ? base[n - 1 - s] : base[s];
          const double cur = value[slot++];
          walk_total[player_axis[player]] += cur - prev;
          prev = cur;
        }
        for (int a = 0; a < k; ++a) {
          st.sum[a] += walk_total[a];
          unit_mean[a] += walk_total[a] / double(walks_per_unit);
        }
      }
      for (int a = 0; a < k; ++a) {
        st.s_sum[a] += unit_mean[a];
        st.s_sumsq[a] += unit_mean[a] * unit_mean[a];
      }
      ++st.samples;
    }
    parts[bi] = std::move(st);
  });

  // Merge in block order: identical result for any thread count.
  std::vector<double> sum(k, 0.0), s_sum(k, 0.0), s_sumsq(k, 0.0);
  std::uint64_t samples = 0;
  for (const BlockStats& st : parts) {
    for (int a = 0; a < k; ++a) {
      sum[a] += st.sum[a];
      s_sum[a] += st.s_sum[a];
      s_sumsq[a] += st.s_sumsq[a];
    }
    samples += st.samples;
  }

  McEstimate est;
  est.features = feats;
  est.perms = units * std::uint64_t(walks_per_unit);
  est.seed = cfg.seed;
  est.dy = g1 - g0;
  est.estimate.resize(k);
  est.std_error.assign(k, 0.0);
  const double walks = double(est.perms);
  for (int a = 0; a < k; ++a) {
    est.estimate[a] = sum[a] / walks;
    if (samples >= 2) {
      const double mean = s_sum[a] / double(samples);
      double var = (s_sumsq[a] - double(samples) * mean * mean) / double(samples - 1);
      var = std::max(var, 0.0);  // cancellation guard
      est.std_error[a] = std::sqrt(var / double(samples));
    }
  }
  return est;
}

}  // namespace

void McConfig::validate() const {
  if (perms < 1) throw InputError("need at least one permutation");
  if (batch < 1) throw InputError("batch size must be >= 1");
  if (threads < 1) throw InputError("thread count must be >= 1");
}

double McEstimate::total() const {
  double acc = 0.0;
  for (double v : estimate) acc += v;
  return acc;
}

McEstimate mc_macro_shapley(const Predictor& model, const CounterfactualPair& pair,
                            const McConfig& cfg) {
  return run_engine(model, pair, std::vector<int>(pair.changed.size(), 1), cfg);
}

McEstimate mc_micro_shapley(const Predictor& model, const CounterfactualPair& pair, int m,
                            const McConfig& cfg) {
  if (m < 1) throw InputError("grid resolution must be >= 1");
  return run_engine(model, pair, std::vector<int>(pair.changed.size(), m), cfg);
}

}  // namespace cfattr
