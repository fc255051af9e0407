#include "cfattr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "cfattr/error.hpp"
#include "cfattr/microgame.hpp"
#include "cfattr/report.hpp"

namespace cfattr {
namespace {

volatile double g_sink;  // defeats dead-code elimination in timed loops

using Clock = std::chrono::steady_clock;

template <class F>
double time_block(F&& body, long iters) {
  const auto start = Clock::now();
  for (long i = 0; i < iters; ++i) body();
  const std::chrono::duration<double> dt = Clock::now() - start;
  return dt.count() / double(iters);
}

// Per-call seconds: warm-up once, calibrate the iteration count to ~2 ms per
// sample, then take the median of `reps` samples.
template <class F>
double time_median(F&& body, int reps) {
  constexpr double kTargetSample = 2e-3;
  double once = time_block(body, 1);  // warm-up, discarded from samples
  long iters = 1;
  if (once < kTargetSample)
    iters = std::min(1000000L, long(kTargetSample / std::max(once, 1e-9)) + 1);
  std::vector<double> samples(reps);
  for (int r = 0; r < reps; ++r) samples[r] = time_block(body, iters);
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

std::vector<int> default_pot(int k) {
  std::vector<int> pot(k);
  for (int a = 0; a < k; ++a) pot[a] = a;
  return pot;
}

LogFit fit_log(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  LogFit fit;
  if (n < 2) return fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = double(n) * sxx - sx * sx;
  if (denom == 0.0) return fit;
  fit.slope = (double(n) * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / double(n);
  double sse = 0, sst = 0;
  const double ybar = sy / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += e * e;
    sst += (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r2 = (sst > 0.0) ? 1.0 - sse / sst : 1.0;
  return fit;
}

}  // namespace

ResidualGrid random_residual_grid(const GridSpec& spec, Rng& rng) {
  spec.validate();
  GridIndexer ix(spec);
  ResidualGrid rg;
  rg.spec = spec;
  rg.r.resize(ix.size());
  std::vector<int> p;
  for (std::size_t idx = 0; idx < rg.r.size(); ++idx) {
    ix.decode(idx, p);
    const bool boundary = std::any_of(p.begin(), p.end(), [](int v) { return v == 0; });
    rg.r[idx] = boundary ? 0.0 : rng.uniform(-1.0, 1.0);
  }
  return rg;
}

const BenchPoint* BenchResult::find_grid(int k, int m) const {
  for (const BenchPoint& p : grid)
    if (p.k == k && p.m == m) return &p;
  return nullptr;
}

const BenchPoint* BenchResult::find_enum(int n) const {
  for (const BenchPoint& p : enums)
    if (p.n == n) return &p;
  return nullptr;
}

BenchResult bench_scaling(const std::vector<std::pair<int, int>>& grid_cases,
                          const std::vector<std::pair<int, int>>& enum_cases, int reps,
                          std::uint64_t seed) {
  if (grid_cases.empty() && enum_cases.empty()) throw InputError("nothing to benchmark");
  if (reps < 1) throw InputError("need at least one repetition");
  Rng rng(seed);

  BenchResult res;
  std::vector<double> fx, fy;
  for (auto [k, m] : grid_cases) {
    const GridSpec spec = uniform_grid(default_pot(k), m);
    const ResidualGrid rg = random_residual_grid(spec, rng);
    const MicroGame mg = make_microgame(rg);
    const LESWeights b = les_preset(LesRule::Shapley, mg.n);

    BenchPoint pt;
    pt.k = k;
    pt.m = m;
    pt.n = mg.n;
    pt.t_grid = time_median(
        [&] {
          double acc = 0.0;
          for (int i : spec.pot) acc += grid_state_les(mg, b, i);
          g_sink = acc;
        },
        reps);
    pt.t_es = time_median(
        [&] {
          const PotShares ps = equal_surplus_shares(mg);
          g_sink = ps.shares[0];
        },
        reps);
    res.grid.push_back(pt);
    fx.push_back(std::log(double(k)) + double(k) * std::log(double(m) + 1.0));
    fy.push_back(std::log(pt.t_grid));
  }
  res.grid_fit = fit_log(fx, fy);

  for (auto [k, m] : enum_cases) {
    const GridSpec spec = uniform_grid(default_pot(k), m);
    const ResidualGrid rg = random_residual_grid(spec, rng);
    const MicroGame mg = make_microgame(rg);
    const LESWeights b = les_preset(LesRule::Shapley, mg.n);

    BenchPoint pt;
    pt.k = k;
    pt.m = m;
    pt.n = mg.n;
    pt.t_enum = time_median(
        [&] {
          const PotShares ps = enumerate_les(mg, b, "shapley");
          g_sink = ps.shares[0];
        },
        reps);
    res.enums.push_back(pt);
  }
  return res;
}

BenchResult bench_scaling_default(int reps, std::uint64_t seed) {
  std::vector<std::pair<int, int>> grid_cases;
  for (int k = 2; k <= 3; ++k)
    for (int m = 2; m <= 10; ++m) grid_cases.emplace_back(k, m);
  // n = 16 and n = 20 micro-players via k=4 pots
  const std::vector<std::pair<int, int>> enum_cases = {{4, 4}, {4, 5}};
  return bench_scaling(grid_cases, enum_cases, reps, seed);
}

std::string bench_csv(const BenchResult& res) {
  std::ostringstream out;
  out << "mode,k,m,n,seconds\n";
  for (const BenchPoint& p : res.grid) {
    out << "grid," << p.k << "," << p.m << "," << p.n << "," << fmt12(p.t_grid) << "\n";
    out << "es," << p.k << "," << p.m << "," << p.n << "," << fmt12(p.t_es) << "\n";
  }
  for (const BenchPoint& p : res.enums)
    out << "enum," << p.k << "," << p.m << "," << p.n << "," << fmt12(p.t_enum) << "\n";
  return out.str();
}

nlohmann::json bench_to_json(const BenchResult& res) {
  nlohmann::json j;
  nlohmann::json grid = nlohmann::json::array();
  for (const BenchPoint& p : res.grid)
    grid.push_back({{"k", p.k},
                    {"m", p.m},
                    {"n", p.n},
                    {"grid_seconds", round12(p.t_grid)},
                    {"es_seconds", round12(p.t_es)}});
  j["grid"] = std::move(grid);
  nlohmann::json en = nlohmann::json::array();
  for (const BenchPoint& p : res.enums)
    en.push_back({{"k", p.k}, {"m", p.m}, {"n", p.n}, {"enum_seconds", round12(p.t_enum)}});
  j["enumeration"] = std::move(en);
  j["grid_fit"] = {{"intercept", round12(res.grid_fit.intercept)},
                   {"slope", round12(res.grid_fit.slope)},
                   {"r2", round12(res.grid_fit.r2)}};
  return j;
}

}  // namespace cfattr
