#include "cfattr/limits.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cfattr/error.hpp"
#include "cfattr/microgame.hpp"

namespace cfattr {
namespace {

// Accumulates residual evaluations r_u(t) at many sliders and resolves them
// with one batched model pass.
class ResidualBatcher {
 public:
  ResidualBatcher(const CounterfactualPair& pair, const std::vector<int>& pot)
      : pair_(pair), pot_(pot), k_(int(pot.size())) {}

  std::size_t request(const std::vector<double>& t) {
    auto hit = slots_.find(t);
    if (hit != slots_.end()) return hit->second;
    const std::size_t slot = slot_count_++;
    slots_.emplace(t, slot);
    std::vector<double> masked(k_);
    for (Mask s = 0; s < (Mask(1) << k_); ++s) {
      for (int a = 0; a < k_; ++a) masked[a] = (s >> a & 1) ? t[a] : 0.0;
      const double sign = ((k_ - popcount(s)) & 1) ? -1.0 : 1.0;
      MixtureExpansion ex = mixture_expansion(pair_, pot_, masked);
      for (std::size_t j = 0; j < ex.points.size(); ++j) {
        points_.push_back(std::move(ex.points[j]));
        weights_.push_back(sign * ex.weights[j]);
        owner_.push_back(slot);
      }
    }
    return slot;
  }

  std::vector<double> run(const Predictor& model, int threads) {
    std::vector<double> y = predict_batch(model, points_, threads);
    std::vector<double> r(slot_count_, 0.0);
    for (std::size_t j = 0; j < y.size(); ++j) r[owner_[j]] += weights_[j] * y[j];
    return r;
  }

 private:
  const CounterfactualPair& pair_;
  const std::vector<int>& pot_;
  int k_;
  std::map<std::vector<double>, std::size_t> slots_;
  std::size_t slot_count_ = 0;
  std::vector<Instance> points_;
  std::vector<double> weights_;
  std::vector<std::size_t> owner_;
};

// Shapley-rule locals over the changed set at uniform resolution m:
// singleton dividends plus grid shares of every higher-order pot.
std::vector<double> shapley_locals(const Predictor& model, const CounterfactualPair& pair,
                                   const DividendTable& dt, int m, int threads) {
  const int k = int(dt.support.size());
  std::vector<double> locals(k, 0.0);
  for (int pos = 0; pos < k; ++pos) locals[pos] = dt.phi[Mask(1) << pos];
  for (Mask u = 0; u < (Mask(1) << k); ++u) {
    if (popcount(u) < 2) continue;
    std::vector<int> pot, members;
    for (int pos = 0; pos < k; ++pos)
      if (u >> pos & 1) {
        pot.push_back(dt.support[pos]);
        members.push_back(pos);
      }
    GridSpec spec = uniform_grid(pot, m);
    ResidualGrid rg = residual_grid(eval_cube(model, pair, spec, threads));
    MicroGame mg = make_microgame(rg);
    LESWeights b = les_preset(LesRule::Shapley, mg.n);
    for (std::size_t a = 0; a < pot.size(); ++a)
      locals[members[a]] += grid_state_les(mg, b, pot[a]);
  }
  return locals;
}

}  // namespace

double DiagonalIGResult::total() const {
  double acc = 0.0;
  for (double v : integrals) acc += v;
  return acc;
}

DiagonalIGResult diagonal_ig(const Predictor& model, const CounterfactualPair& pair,
                             const std::vector<int>& pot, int nodes, double fd_step, int threads) {
  const int k = int(pot.size());
  if (k < 2) throw InputError("diagonal integrals need a pot of at least two features");
  if (nodes < 2) throw InputError("need at least two quadrature nodes");
  if (!(fd_step > 0.0) || fd_step >= 0.5) throw InputError("finite-difference step out of range");

  ResidualBatcher rb(pair, pot);
  const double h = fd_step;
  // slot ids per (node, axis): plus / minus-or-base points of the stencil
  std::vector<std::size_t> plus(std::size_t(nodes) * k), minus(std::size_t(nodes) * k);
  std::vector<bool> central(std::size_t(nodes) * k);
  std::vector<double> t(k);
  for (int j = 0; j < nodes; ++j) {
    const double tau = double(j) / double(nodes - 1);
    for (int a = 0; a < k; ++a) {
      const bool can_up = tau + h <= 1.0;
      const bool can_down = tau - h >= 0.0;
      const std::size_t cell = std::size_t(j) * k + a;
      std::fill(t.begin(), t.end(), tau);
      if (can_up && can_down) {
        t[a] = tau + h;
        plus[cell] = rb.request(t);
        t[a] = tau - h;
        minus[cell] = rb.request(t);
        central[cell] = true;
      } else if (can_up) {
        t[a] = tau + h;
        plus[cell] = rb.request(t);
        t[a] = tau;
        minus[cell] = rb.request(t);
        central[cell] = false;
      } else {
        t[a] = tau;
        plus[cell] = rb.request(t);
        t[a] = tau - h;
        minus[cell] = rb.request(t);
        central[cell] = false;
      }
    }
  }
  const std::vector<double> r = rb.run(model, threads);

  DiagonalIGResult out;
  out.pot = pot;
  out.nodes = nodes;
  out.fd_step = fd_step;
  out.smooth_model = model.smooth();
  out.integrals.assign(k, 0.0);
  const double dt_node = 1.0 / double(nodes - 1);
  for (int a = 0; a < k; ++a) {
    double acc = 0.0;
    for (int j = 0; j < nodes; ++j) {
      const std::size_t cell = std::size_t(j) * k + a;
      const double step = central[cell] ? 2.0 * h : h;
      const double d = (r[plus[cell]] - r[minus[cell]]) / step;
      acc += (j == 0 || j == nodes - 1) ? 0.5 * d : d;
    }
    out.integrals[a] = acc * dt_node;
  }
  return out;
}

ConvergenceCurve convergence_curve(const Predictor& model, const CounterfactualPair& pair,
                                   const std::vector<int>& pot, const std::vector<int>& m_schedule,
                                   int nodes, double fd_step, int threads) {
  if (m_schedule.empty()) throw InputError("empty resolution schedule");
  for (std::size_t j = 0; j < m_schedule.size(); ++j) {
    if (m_schedule[j] < 1) throw InputError("grid resolution must be >= 1");
    if (j > 0 && m_schedule[j] <= m_schedule[j - 1])
      throw InputError("resolution schedule must be strictly increasing");
  }

  ConvergenceCurve curve;
  curve.pot = pot;
  curve.limit = diagonal_ig(model, pair, pot, nodes, fd_step, threads);
  for (int m : m_schedule) {
    GridSpec spec = uniform_grid(pot, m);
    ResidualGrid rg = residual_grid(eval_cube(model, pair, spec, threads));
    MicroGame mg = make_microgame(rg);
    PotShares ps = grid_state_les_all(mg, les_preset(LesRule::Shapley, mg.n),
                                      les_rule_name(LesRule::Shapley));
    std::vector<double> gaps(ps.shares.size());
    for (std::size_t a = 0; a < ps.shares.size(); ++a)
      gaps[a] = std::abs(ps.shares[a] - curve.limit.integrals[a]);
    curve.ms.push_back(m);
    curve.shares.push_back(ps.shares);
    curve.gaps.push_back(std::move(gaps));
  }
  return curve;
}

void SaturationPolicy::validate() const {
  if (!(epsilon > 0.0)) throw InputError("saturation tolerance must be positive");
  if (consecutive < 1) throw InputError("need at least one stable refinement");
  if (schedule.empty()) throw InputError("empty resolution schedule");
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    if (schedule[j] < 1) throw InputError("grid resolution must be >= 1");
    if (j > 0 && schedule[j] <= schedule[j - 1])
      throw InputError("resolution schedule must be strictly increasing");
  }
}

SaturationResult saturate_m(const Predictor& model, const CounterfactualPair& pair,
                            const SaturationPolicy& policy, int threads) {
  policy.validate();
  ValueTable vt = coalition_values(model, pair, kExhaustiveCap, threads);
  DividendTable dt = dividends(vt);

  SaturationResult out;
  out.features = vt.support;
  if (vt.support.empty()) {
    out.chosen_m = policy.schedule.front();
    out.saturated = true;
    return out;
  }

  // dy of zero would make fraction-of-dy units vacuous; fall back to raw.
  const double scale = (policy.raw_units || vt.dy == 0.0) ? 1.0 : std::abs(vt.dy);
  const double tol = policy.epsilon * scale;

  int run = 0;
  for (std::size_t j = 0; j < policy.schedule.size(); ++j) {
    out.ms.push_back(policy.schedule[j]);
    out.shares.push_back(shapley_locals(model, pair, dt, policy.schedule[j], threads));
    if (j == 0) continue;
    double change = 0.0;
    for (std::size_t f = 0; f < out.features.size(); ++f)
      change = std::max(change, std::abs(out.shares[j][f] - out.shares[j - 1][f]));
    run = (change < tol) ? run + 1 : 0;
    if (run >= policy.consecutive) {
      // shares have been flat since the start of the stable window
      out.chosen_m = out.ms[j - policy.consecutive];
      out.saturated = true;
      return out;
    }
  }
  out.chosen_m = out.ms.back();
  out.saturated = false;
  return out;
}

}  // namespace cfattr
