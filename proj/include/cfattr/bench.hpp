#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cfattr/cube.hpp"
#include "cfattr/rng.hpp"

namespace cfattr {

// Synthetic pure-interaction table: uniform noise inside, exact zeros on the
// boundary slices, as residual_grid would produce.
ResidualGrid random_residual_grid(const GridSpec& spec, Rng& rng);

struct BenchPoint {
  int k = 0, m = 0, n = 0;
  double t_grid = -1.0;  // seconds per grid-state solve (all features)
  double t_enum = -1.0;  // seconds per full enumeration; < 0 when skipped
  double t_es = -1.0;    // seconds per Equal Surplus fast-path solve
};

struct LogFit {
  double intercept = 0.0, slope = 0.0, r2 = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> grid;   // t_grid and t_es populated
  std::vector<BenchPoint> enums;  // t_enum populated
  LogFit grid_fit;                // log t_grid against log(k (m+1)^k)

  const BenchPoint* find_grid(int k, int m) const;
  const BenchPoint* find_enum(int n) const;
};

// Median-of-repetitions wall times on random residual tables; the inner
// iteration count is calibrated so each sample is long enough to trust.
BenchResult bench_scaling(const std::vector<std::pair<int, int>>& grid_cases,
                          const std::vector<std::pair<int, int>>& enum_cases, int reps,
                          std::uint64_t seed);

// Default sweep: k in {2,3} x m in {2..10}; enumeration at n=16 and n=20.
BenchResult bench_scaling_default(int reps = 5, std::uint64_t seed = 0);

std::string bench_csv(const BenchResult& res);
nlohmann::json bench_to_json(const BenchResult& res);

}  // namespace cfattr
