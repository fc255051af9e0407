#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/model.hpp"

namespace cfattr {

// Discretization of one pot's local cube. Pot members are global feature
// indices in ascending order; m[i] is that axis's step count (>= 1).
struct GridSpec {
  std::vector<int> pot;
  std::vector<int> m;

  int k() const { return int(pot.size()); }
  int total_steps() const;           // n = sum m_i (micro-player count)
  std::size_t state_count() const;   // prod (m_i + 1)
  void validate() const;
};

GridSpec uniform_grid(std::vector<int> pot, int m);

// Row-major addressing over the grid, last pot axis fastest.
struct GridIndexer {
  explicit GridIndexer(const GridSpec& spec);
  std::size_t index(const std::vector<int>& p) const;
  void decode(std::size_t idx, std::vector<int>& p) const;
  std::size_t stride(int axis) const { return strides_[axis]; }
  std::size_t size() const { return size_; }

 private:
  std::vector<int> dims_;  // m_i + 1
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

// Sampled cube table g_p = g(slider(t(p))) with the endpoint-mixture
// extension on categorical axes.
struct CubeTable {
  GridSpec spec;
  std::vector<double> g;
};

// Pure interaction surface on the same grid: zero on every slice with some
// p_i = 0, equal to the pot phi_u at the far corner.
struct ResidualGrid {
  GridSpec spec;
  std::vector<double> r;

  double far_corner() const { return r.back(); }
};

// x0 + sum_{i in u} t_i * delta_i * e_i. Slider values of exactly 1 land on
// x1 bit-exactly so grid corners reproduce the mixed-input corners.
Instance slider_point(const CounterfactualPair& pair, const std::vector<int>& pot,
                      const std::vector<double>& t);

// Raw model inputs and convex weights realizing the endpoint-mixture
// extension at slider t. A single unit-weight point unless some categorical
// coordinate sits strictly inside (0,1).
struct MixtureExpansion {
  std::vector<Instance> points;
  std::vector<double> weights;
};

MixtureExpansion mixture_expansion(const CounterfactualPair& pair, const std::vector<int>& pot,
                                   const std::vector<double>& t);

// Interior states of categorical-binary axes are evaluated as the
// tensor-product mixture of endpoint evaluations with weights (1-t_i, t_i)
// per categorical axis; every corner state stays a raw model evaluation.
CubeTable eval_cube(const Predictor& model, const CounterfactualPair& pair, const GridSpec& spec,
                    int threads = 1);

// Inclusion-exclusion over masked faces, computed as k axis-differencing
// passes (subtract the axis-zero slice); boundary slices become exactly zero.
ResidualGrid residual_grid(const CubeTable& ct);

// One-step grouped increment b(|p|+1) r_{p+e_i} - b(|p|) r_p. `weights_b` is
// the LES sequence indexed 0..n. axis is the pot-local index of the feature.
double delta_p(const ResidualGrid& rg, const std::vector<int>& p, int axis,
               const std::vector<double>& weights_b);

// Residual interaction at an arbitrary slider point, by direct 2^k masked
// inclusion-exclusion. Reference tool for the diagonal-limit module.
double residual_at(const Predictor& model, const CounterfactualPair& pair,
                   const std::vector<int>& pot, const std::vector<double>& t, int threads = 1);

// Debug/inspection dump: one row per state with p, t(p), g_p, r_p.
void dump_grid_csv(const CubeTable& ct, const ResidualGrid& rg, const FeatureSpace& space,
                   const std::string& path);

}  // namespace cfattr
