#include "cfattr/microgame.hpp"

#include <algorithm>
#include <cmath>

#include "cfattr/error.hpp"

namespace cfattr {
namespace {

std::vector<double> log_factorials(int n) {
  std::vector<double> lf(std::size_t(n) + 1);
  for (int s = 0; s <= n; ++s) lf[s] = std::lgamma(double(s) + 1.0);
  return lf;
}

int feature_axis(const GridSpec& spec, int feature) {
  for (int a = 0; a < spec.k(); ++a)
    if (spec.pot[a] == feature) return a;
  throw InputError("feature not in pot");
}

}  // namespace

LesRule les_rule_from_name(const std::string& name) {
  if (name == "shapley") return LesRule::Shapley;
  if (name == "solidarity") return LesRule::Solidarity;
  if (name == "equal_surplus") return LesRule::EqualSurplus;
  throw InputError("unknown LES rule: " + name);
}

const char* les_rule_name(LesRule rule) {
  switch (rule) {
    case LesRule::Shapley: return "shapley";
    case LesRule::Solidarity: return "solidarity";
    case LesRule::EqualSurplus: return "equal_surplus";
  }
  throw InputError("unknown LES rule");
}

void LESWeights::validate() const {
  if (n < 1) throw InputError("LES weights need n >= 1");
  if (int(b.size()) != n + 1) throw InputError("LES weight sequence has wrong length");
  if (b[0] != 0.0) throw InputError("LES weights require b(0)=0");
  if (b[n] != 1.0) throw InputError("LES weights require b(n)=1");
  for (double v : b)
    if (!std::isfinite(v)) throw InputError("LES weights must be finite");
}

LESWeights les_preset(LesRule rule, int n) {
  if (n < 1) throw InputError("LES preset needs n >= 1");
  LESWeights w;
  w.n = n;
  w.b.assign(std::size_t(n) + 1, 0.0);
  for (int s = 1; s < n; ++s) {
    switch (rule) {
      case LesRule::Shapley: w.b[s] = 1.0; break;
      case LesRule::Solidarity: w.b[s] = 1.0 / (double(s) + 1.0); break;
      case LesRule::EqualSurplus: w.b[s] = (s == 1) ? double(n) - 1.0 : 0.0; break;
    }
  }
  w.b[n] = 1.0;
  return w;
}

LESWeights les_preset(const std::string& name, int n) {
  return les_preset(les_rule_from_name(name), n);
}

MicroGame make_microgame(const ResidualGrid& rg) {
  rg.spec.validate();
  MicroGame mg;
  mg.rg = &rg;
  mg.n = rg.spec.total_steps();
  mg.player_axis.reserve(mg.n);
  for (int a = 0; a < rg.spec.k(); ++a)
    for (int s = 0; s < rg.spec.m[a]; ++s) mg.player_axis.push_back(a);
  return mg;
}

double micro_value(const MicroGame& mg, std::uint32_t coalition) {
  if (mg.n > 31) throw CapacityError("micro-coalition bitset limited to 31 players");
  if (coalition >> mg.n != 0) throw InputError("coalition has unknown players");
  const GridSpec& spec = mg.rg->spec;
  std::vector<int> p(spec.k(), 0);
  for (int a = 0; a < mg.n; ++a)
    if (coalition >> a & 1) ++p[mg.player_axis[a]];
  return mg.rg->r[GridIndexer(spec).index(p)];
}

PotShares enumerate_les(const MicroGame& mg, const LESWeights& b, const std::string& rule_label) {
  b.validate();
  const int n = mg.n;
  if (b.n != n) throw InputError("LES weights sized for a different game");
  if (n > kEnumerateCap) throw CapacityError("micro-game too large to enumerate");

  const GridSpec& spec = mg.rg->spec;
  const GridIndexer ix(spec);
  const std::uint32_t full = (1u << n) - 1u;

  // v(A) for every coalition, via per-feature replica counts.
  std::vector<std::uint32_t> axis_mask(spec.k(), 0);
  for (int a = 0; a < n; ++a) axis_mask[mg.player_axis[a]] |= 1u << a;
  std::vector<double> v(std::size_t(full) + 1);
  std::vector<int> p(spec.k());
  for (std::uint32_t A = 0; A <= full; ++A) {
    for (int j = 0; j < spec.k(); ++j) p[j] = popcount(A & axis_mask[j]);
    v[A] = mg.rg->r[ix.index(p)];
  }

  // w(s) = s!(n-s-1)!/n!, exact enough in doubles for n <= 22.
  std::vector<double> fact(std::size_t(n) + 1, 1.0);
  for (int s = 1; s <= n; ++s) fact[s] = fact[s - 1] * double(s);
  std::vector<double> w(std::size_t(n), 0.0);
  for (int s = 0; s < n; ++s) w[s] = fact[s] * fact[n - 1 - s] / fact[n];

  PotShares out;
  out.pot = spec.pot;
  out.rule = rule_label;
  out.micro.assign(n, 0.0);
  for (int a = 0; a < n; ++a) {
    const std::uint32_t bit = 1u << a;
    double acc = 0.0;
    for (std::uint32_t A = 0; A <= full; ++A) {
      if (A & bit) continue;
      const int s = popcount(A);
      acc += w[s] * (b.b[s + 1] * v[A | bit] - b.b[s] * v[A]);
    }
    out.micro[a] = acc;
  }
  out.shares.assign(spec.k(), 0.0);
  for (int a = 0; a < n; ++a) out.shares[mg.player_axis[a]] += out.micro[a];
  return out;
}

double grid_state_les(const MicroGame& mg, const LESWeights& b, int feature) {
  b.validate();
  const GridSpec& spec = mg.rg->spec;
  const int n = mg.n;
  if (b.n != n) throw InputError("LES weights sized for a different game");
  const int axis = feature_axis(spec, feature);

  const GridIndexer ix(spec);
  const std::vector<double> lf = log_factorials(n);
  std::vector<double> logw(std::size_t(n), 0.0);
  for (int s = 0; s < n; ++s) logw[s] = lf[s] + lf[n - 1 - s] - lf[n];
  // log C(m_j, p_j) per axis and count.
  std::vector<std::vector<double>> logc(spec.k());
  for (int j = 0; j < spec.k(); ++j) {
    logc[j].resize(std::size_t(spec.m[j]) + 1);
    for (int c = 0; c <= spec.m[j]; ++c)
      logc[j][c] = lf[spec.m[j]] - lf[c] - lf[spec.m[j] - c];
  }

  const std::size_t stride = ix.stride(axis);
  double total = 0.0;
  std::vector<int> p;
  for (std::size_t idx = 0; idx < ix.size(); ++idx) {
    ix.decode(idx, p);
    if (p[axis] >= spec.m[axis]) continue;
    int level = 0;
    double logmult = 0.0;
    for (int j = 0; j < spec.k(); ++j) {
      level += p[j];
      logmult += logc[j][p[j]];
    }
    const double dp = b.b[level + 1] * mg.rg->r[idx + stride] - b.b[level] * mg.rg->r[idx];
    if (dp == 0.0) continue;
    total += std::exp(logw[level] + logmult) * double(spec.m[axis] - p[axis]) * dp;
  }
  return total;
}

PotShares grid_state_les_all(const MicroGame& mg, const LESWeights& b,
                             const std::string& rule_label) {
  PotShares out;
  out.pot = mg.rg->spec.pot;
  out.rule = rule_label;
  out.shares.reserve(out.pot.size());
  for (int i : out.pot) out.shares.push_back(grid_state_les(mg, b, i));
  return out;
}

PotShares equal_surplus_shares(const MicroGame& mg) {
  const GridSpec& spec = mg.rg->spec;
  const double phi = mg.rg->far_corner();
  PotShares out;
  out.pot = spec.pot;
  out.rule = les_rule_name(LesRule::EqualSurplus);
  out.shares.reserve(spec.k());
  for (int a = 0; a < spec.k(); ++a)
    out.shares.push_back(double(spec.m[a]) / double(mg.n) * phi);
  return out;
}

std::vector<double> equal_split(double phi, const std::vector<int>& pot) {
  if (pot.empty()) throw InputError("empty pot");
  return std::vector<double>(pot.size(), phi / double(pot.size()));
}

}  // namespace cfattr
