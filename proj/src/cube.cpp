#include "cfattr/cube.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cfattr/error.hpp"

namespace cfattr {
namespace {

// Hard ceiling on grid sizes; past this the exact path is the wrong tool.
constexpr std::size_t kMaxGridStates = std::size_t(1) << 24;

void check_pot(const CounterfactualPair& pair, const std::vector<int>& pot) {
  if (pot.empty()) throw InputError("empty pot");
  int prev = -1;
  for (int i : pot) {
    if (i <= prev) throw InputError("pot indices must be strictly ascending");
    if (i < 0 || std::size_t(i) >= pair.space.dim()) throw InputError("pot index out of range");
    prev = i;
  }
}

}  // namespace

MixtureExpansion mixture_expansion(const CounterfactualPair& pair, const std::vector<int>& pot,
                                   const std::vector<double>& t) {
  check_pot(pair, pot);
  if (t.size() != pot.size()) throw InputError("slider vector size mismatch");
  const FeatureSpace& space = pair.space;
  Instance base = pair.x0;
  std::vector<int> mix_axes;  // categorical axes strictly inside (0,1)
  for (std::size_t a = 0; a < pot.size(); ++a) {
    int i = pot[a];
    double ti = t[a];
    if (ti < 0.0 || ti > 1.0) throw InputError("slider coordinate outside [0,1]");
    if (space.kinds[i] == FeatureKind::CategoricalBinary && ti > 0.0 && ti < 1.0) {
      mix_axes.push_back(a);
      continue;
    }
    if (ti == 1.0) {
      base[i] = pair.x1[i];  // exact endpoint, not x0 + delta
    } else if (ti > 0.0) {
      base[i] = pair.x0[i] + ti * pair.delta[i];
    }
  }
  MixtureExpansion ex;
  const std::size_t combos = std::size_t(1) << mix_axes.size();
  ex.points.reserve(combos);
  ex.weights.reserve(combos);
  for (std::size_t c = 0; c < combos; ++c) {
    Instance pt = base;
    double w = 1.0;
    for (std::size_t j = 0; j < mix_axes.size(); ++j) {
      int a = mix_axes[j];
      int i = pot[a];
      if (c >> j & 1) {
        pt[i] = pair.x1[i];
        w *= t[a];
      } else {
        w *= 1.0 - t[a];
      }
    }
    ex.points.push_back(std::move(pt));
    ex.weights.push_back(w);
  }
  return ex;
}

int GridSpec::total_steps() const {
  int n = 0;
  for (int mi : m) n += mi;
  return n;
}

std::size_t GridSpec::state_count() const {
  std::size_t total = 1;
  for (int mi : m) {
    std::size_t d = std::size_t(mi) + 1;
    if (total > kMaxGridStates / d) throw CapacityError("grid state count exceeds capacity");
    total *= d;
  }
  return total;
}

void GridSpec::validate() const {
  if (pot.size() < 2) throw InputError("grid pot needs at least two features");
  if (pot.size() != m.size()) throw InputError("pot/m size mismatch");
  int prev = -1;
  for (int i : pot) {
    if (i <= prev) throw InputError("pot indices must be strictly ascending");
    prev = i;
  }
  for (int mi : m)
    if (mi < 1) throw InputError("grid resolution must be >= 1");
  state_count();  // throws past capacity
}

GridSpec uniform_grid(std::vector<int> pot, int m) {
  GridSpec spec;
  spec.m.assign(pot.size(), m);
  spec.pot = std::move(pot);
  spec.validate();
  return spec;
}

GridIndexer::GridIndexer(const GridSpec& spec) {
  spec.validate();
  const int k = spec.k();
  dims_.resize(k);
  strides_.resize(k);
  for (int a = 0; a < k; ++a) dims_[a] = spec.m[a] + 1;
  strides_[k - 1] = 1;
  for (int a = k - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * dims_[a + 1];
  size_ = strides_[0] * dims_[0];
}

std::size_t GridIndexer::index(const std::vector<int>& p) const {
  std::size_t idx = 0;
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    if (p[a] < 0 || p[a] >= dims_[a]) throw InputError("grid coordinate out of range");
    idx += std::size_t(p[a]) * strides_[a];
  }
  return idx;
}

void GridIndexer::decode(std::size_t idx, std::vector<int>& p) const {
  p.resize(dims_.size());
  for (std::size_t a = 0; a < dims_.size(); ++a) {
    p[a] = int(idx / strides_[a]);
    idx %= strides_[a];
  }
}

Instance slider_point(const CounterfactualPair& pair, const std::vector<int>& pot,
                      const std::vector<double>& t) {
  check_pot(pair, pot);
  if (t.size() != pot.size()) throw InputError("slider vector size mismatch");
  Instance x = pair.x0;
  for (std::size_t a = 0; a < pot.size(); ++a) {
    double ti = t[a];
    if (ti < 0.0 || ti > 1.0) throw InputError("slider coordinate outside [0,1]");
    int i = pot[a];
    if (ti == 1.0)
      x[i] = pair.x1[i];
    else if (ti > 0.0)
      x[i] = pair.x0[i] + ti * pair.delta[i];
  }
  return x;
}

CubeTable eval_cube(const Predictor& model, const CounterfactualPair& pair, const GridSpec& spec,
                    int threads) {
  spec.validate();
  check_pot(pair, spec.pot);
  if (model.dim() != pair.space.dim()) throw InputError("model/pair dimension mismatch");

  GridIndexer ix(spec);
  const std::size_t states = ix.size();
  const int k = spec.k();

  std::vector<Instance> batch;
  std::vector<double> weights;
  std::vector<std::size_t> offsets(states + 1, 0);

  std::vector<int> p;
  std::vector<double> t(k);
  for (std::size_t idx = 0; idx < states; ++idx) {
    ix.decode(idx, p);
    for (int a = 0; a < k; ++a) t[a] = double(p[a]) / double(spec.m[a]);
    MixtureExpansion ex = mixture_expansion(pair, spec.pot, t);
    for (std::size_t j = 0; j < ex.points.size(); ++j) {
      batch.push_back(std::move(ex.points[j]));
      weights.push_back(ex.weights[j]);
    }
    offsets[idx + 1] = batch.size();
    if (batch.size() > kMaxGridStates) throw CapacityError("cube evaluation batch exceeds capacity");
  }

  std::vector<double> y = predict_batch(model, batch, threads);

  CubeTable ct;
  ct.spec = spec;
  ct.g.resize(states);
  for (std::size_t idx = 0; idx < states; ++idx) {
    if (offsets[idx + 1] - offsets[idx] == 1) {
      ct.g[idx] = y[offsets[idx]];  // corner and pure-continuous states stay exact
      continue;
    }
    double acc = 0.0;
    for (std::size_t j = offsets[idx]; j < offsets[idx + 1]; ++j) acc += weights[j] * y[j];
    ct.g[idx] = acc;
  }
  return ct;
}

ResidualGrid residual_grid(const CubeTable& ct) {
  ct.spec.validate();
  GridIndexer ix(ct.spec);
  if (ct.g.size() != ix.size()) throw InputError("cube table size mismatch");

  ResidualGrid rg;
  rg.spec = ct.spec;
  rg.r = ct.g;

  // r = (prod_a D_a) g with (D_a f)(p) = f(p) - f(p | p_a = 0). Each pass
  // subtracts the axis-zero slice, then zeroes it, so boundaries are exact 0.
  const int k = ct.spec.k();
  for (int a = 0; a < k; ++a) {
    const std::size_t s = ix.stride(a);
    const std::size_t d = std::size_t(ct.spec.m[a]) + 1;
    const std::size_t block = s * d;
    for (std::size_t base = 0; base < rg.r.size(); base += block) {
      for (std::size_t pa = 1; pa < d; ++pa) {
        double* row = rg.r.data() + base + pa * s;
        const double* zero = rg.r.data() + base;
        for (std::size_t inner = 0; inner < s; ++inner) row[inner] -= zero[inner];
      }
      std::fill(rg.r.begin() + base, rg.r.begin() + base + s, 0.0);
    }
  }
  return rg;
}

double delta_p(const ResidualGrid& rg, const std::vector<int>& p, int axis,
               const std::vector<double>& weights_b) {
  const GridSpec& spec = rg.spec;
  if (axis < 0 || axis >= spec.k()) throw InputError("axis out of range");
  if (int(p.size()) != spec.k()) throw InputError("state size mismatch");
  if (p[axis] >= spec.m[axis]) throw InputError("state already at axis ceiling");
  GridIndexer ix(spec);
  const std::size_t idx = ix.index(p);
  int level = 0;
  for (int pa : p) level += pa;
  if (std::size_t(level) + 1 >= weights_b.size()) throw InputError("weight sequence too short");
  return weights_b[level + 1] * rg.r[idx + ix.stride(axis)] - weights_b[level] * rg.r[idx];
}

double residual_at(const Predictor& model, const CounterfactualPair& pair,
                   const std::vector<int>& pot, const std::vector<double>& t, int threads) {
  check_pot(pair, pot);
  if (t.size() != pot.size()) throw InputError("slider vector size mismatch");
  const int k = int(pot.size());
  if (k > kExhaustiveCap) throw CapacityError("pot too large for direct residual");

  std::vector<Instance> batch;
  std::vector<double> weights;  // signed mixture weights, flattened over masks
  std::vector<double> masked(k);
  for (Mask s = 0; s < (Mask(1) << k); ++s) {
    for (int a = 0; a < k; ++a) masked[a] = (s >> a & 1) ? t[a] : 0.0;
    const double sign = ((k - popcount(s)) & 1) ? -1.0 : 1.0;
    MixtureExpansion ex = mixture_expansion(pair, pot, masked);
    for (std::size_t j = 0; j < ex.points.size(); ++j) {
      batch.push_back(std::move(ex.points[j]));
      weights.push_back(sign * ex.weights[j]);
    }
  }
  std::vector<double> y = predict_batch(model, batch, threads);
  double acc = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) acc += weights[j] * y[j];
  return acc;
}

void dump_grid_csv(const CubeTable& ct, const ResidualGrid& rg, const FeatureSpace& space,
                   const std::string& path) {
  if (ct.g.size() != rg.r.size()) throw InputError("cube/residual size mismatch");
  std::ofstream out(path);
  if (!out) throw InputError("cannot open " + path);

  const GridSpec& spec = ct.spec;
  for (int a = 0; a < spec.k(); ++a) out << "p_" << space.names[spec.pot[a]] << ",";
  for (int a = 0; a < spec.k(); ++a) out << "t_" << space.names[spec.pot[a]] << ",";
  out << "g,r\n";

  char buf[40];
  GridIndexer ix(spec);
  std::vector<int> p;
  for (std::size_t idx = 0; idx < ct.g.size(); ++idx) {
    ix.decode(idx, p);
    for (int a = 0; a < spec.k(); ++a) out << p[a] << ",";
    for (int a = 0; a < spec.k(); ++a) {
      std::snprintf(buf, sizeof buf, "%.12g", double(p[a]) / double(spec.m[a]));
      out << buf << ",";
    }
    std::snprintf(buf, sizeof buf, "%.12g", ct.g[idx]);
    out << buf << ",";
    std::snprintf(buf, sizeof buf, "%.12g", rg.r[idx]);
    out << buf << "\n";
  }
}

}  // namespace cfattr
