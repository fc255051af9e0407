#include "cfattr/explain.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cfattr/cube.hpp"
#include "cfattr/error.hpp"
#include "cfattr/microgame.hpp"

namespace cfattr {
namespace {

bool is_within_pot_rule(ReportRule r) { return r != ReportRule::EsMacro; }

std::vector<double> es_macro_locals(const ValueTable& vt) {
  const int k = int(vt.support.size());
  std::vector<double> locals(k, 0.0);
  if (k == 0) return locals;
  double singles = 0.0;
  for (int pos = 0; pos < k; ++pos) singles += vt.v[Mask(1) << pos];
  const double surplus = (vt.dy - singles) / double(k);
  for (int pos = 0; pos < k; ++pos) locals[pos] = vt.v[Mask(1) << pos] + surplus;
  return locals;
}

}  // namespace

ReportRule report_rule_from_name(const std::string& name) {
  if (name == "equal_split" || name == "equal" || name == "eq") return ReportRule::EqualSplit;
  if (name == "micro_shapley" || name == "shapley" || name == "micro")
    return ReportRule::MicroShapley;
  if (name == "solidarity") return ReportRule::Solidarity;
  if (name == "equal_surplus" || name == "es") return ReportRule::EqualSurplus;
  if (name == "es_macro" || name == "es-macro" || name == "esmacro") return ReportRule::EsMacro;
  throw InputError("unknown attribution rule: " + name);
}

const char* report_rule_name(ReportRule rule) {
  switch (rule) {
    case ReportRule::EqualSplit: return "equal_split";
    case ReportRule::MicroShapley: return "micro_shapley";
    case ReportRule::Solidarity: return "solidarity";
    case ReportRule::EqualSurplus: return "equal_surplus";
    case ReportRule::EsMacro: return "es_macro";
  }
  throw InputError("unknown attribution rule");
}

void ExplainConfig::validate() const {
  if (rules.empty()) throw InputError("no attribution rules selected");
  for (std::size_t a = 0; a < rules.size(); ++a)
    for (std::size_t b = a + 1; b < rules.size(); ++b)
      if (rules[a] == rules[b]) throw InputError("duplicate attribution rule");
  if (m < 1) throw InputError("grid resolution must be >= 1");
  for (int mi : m_per_feature)
    if (mi < 1) throw InputError("grid resolution must be >= 1");
  if (saturate && !m_per_feature.empty())
    throw InputError("saturation picks a uniform m; per-feature resolutions conflict");
  if (order_cap < 0) throw InputError("order cap must be >= 0");
  if (cap < 1 || cap > kExhaustiveCap) throw InputError("exhaustive cap out of range");
  if (threads < 1) throw InputError("thread count must be >= 1");
  if (saturate) saturation.validate();
}

int ExplainConfig::resolution_for(int feature) const {
  if (m_per_feature.empty()) return m;
  if (feature < 0 || std::size_t(feature) >= m_per_feature.size())
    throw InputError("feature outside per-feature resolution table");
  return m_per_feature[feature];
}

double AttributionReport::local_total(std::size_t rule) const {
  double acc = 0.0;
  for (double v : locals[rule]) acc += v;
  return acc;
}

AttributionReport explain_local(const Predictor& model, const CounterfactualPair& pair,
                                const ExplainConfig& cfg) {
  cfg.validate();
  AttributionReport rep;
  rep.feature_names = pair.space.names;

  if (cfg.use_mc) {
    for (ReportRule r : cfg.rules)
      if (r != ReportRule::MicroShapley)
        throw InputError(std::string(report_rule_name(r)) +
                         " needs exhaustive mode; Monte-Carlo covers micro_shapley only");
    McEstimate est = mc_micro_shapley(model, pair, cfg.m, cfg.mc);
    rep.g0 = model.predict(pair.x0);
    rep.dy = est.dy;
    rep.features = est.features;
    rep.rules = {report_rule_name(ReportRule::MicroShapley)};
    rep.locals = {est.estimate};
    rep.efficiency_residual = {est.total() - est.dy};
    rep.kendall = {{1.0}};
    rep.m_used = cfg.m;
    rep.mc_mode = true;
    return rep;
  }

  const ValueTable vt = coalition_values(model, pair, cfg.cap, cfg.threads);
  const DividendTable dt = dividends(vt);
  const std::vector<int>& sup = vt.support;
  const int kch = int(sup.size());

  rep.g0 = vt.g0;
  rep.dy = vt.dy;
  rep.m_used = cfg.m;
  if (cfg.saturate) {
    SaturationResult sr = saturate_m(model, pair, cfg.saturation, cfg.threads);
    rep.m_used = sr.chosen_m;
    rep.saturated_pick = true;
  }

  std::vector<std::vector<double>> locals(cfg.rules.size(), std::vector<double>(kch, 0.0));
  for (std::size_t r = 0; r < cfg.rules.size(); ++r) {
    if (cfg.rules[r] == ReportRule::EsMacro) {
      locals[r] = es_macro_locals(vt);
      continue;
    }
    for (int pos = 0; pos < kch; ++pos) locals[r][pos] = dt.phi[Mask(1) << pos];
  }

  const int cap_eff = (cfg.order_cap == 0) ? kch : cfg.order_cap;
  const bool needs_grid =
      std::any_of(cfg.rules.begin(), cfg.rules.end(), [](ReportRule r) {
        return r == ReportRule::MicroShapley || r == ReportRule::Solidarity;
      });

  for (Mask u = 0; kch > 0 && u < (Mask(1) << kch); ++u) {
    const int order = popcount(u);
    if (order < 2) continue;
    const double phi = dt.phi[u];

    std::vector<int> pot, members;
    for (int pos = 0; pos < kch; ++pos)
      if (u >> pos & 1) {
        pot.push_back(sup[pos]);
        members.push_back(pos);
      }

    if (order > cap_eff) {
      // Past the order cap the pot is split equally for every rule so that
      // efficiency survives; the report carries the mass handled this way.
      for (std::size_t r = 0; r < cfg.rules.size(); ++r)
        if (is_within_pot_rule(cfg.rules[r]))
          for (int pos : members) locals[r][pos] += phi / double(order);
      rep.fallback_mass += std::abs(phi);
      ++rep.capped_pots;
      continue;
    }

    GridSpec spec;
    spec.pot = pot;
    int n = 0;
    for (int i : pot) {
      spec.m.push_back(cfg.resolution_for(i));
      n += spec.m.back();
    }

    MicroGame mg;
    ResidualGrid rg;
    if (needs_grid) {
      rg = residual_grid(eval_cube(model, pair, spec, cfg.threads));
      mg = make_microgame(rg);
    }

    PotTable tbl;
    tbl.pot = pot;
    tbl.phi = phi;
    for (std::size_t r = 0; r < cfg.rules.size(); ++r) {
      const ReportRule rule = cfg.rules[r];
      if (!is_within_pot_rule(rule)) continue;
      std::vector<double> shares;
      switch (rule) {
        case ReportRule::EqualSplit:
          shares = equal_split(phi, pot);
          break;
        case ReportRule::EqualSurplus:
          // micro singletons are boundary zeros, so ES collapses to m_i/n
          for (int mi : spec.m) shares.push_back(double(mi) / double(n) * phi);
          break;
        case ReportRule::MicroShapley:
          shares = grid_state_les_all(mg, les_preset(LesRule::Shapley, mg.n), "").shares;
          break;
        case ReportRule::Solidarity:
          shares = grid_state_les_all(mg, les_preset(LesRule::Solidarity, mg.n), "").shares;
          break;
        case ReportRule::EsMacro:
          break;
      }
      for (std::size_t a = 0; a < members.size(); ++a) locals[r][members[a]] += shares[a];
      tbl.rules.push_back(report_rule_name(rule));
      tbl.shares.push_back(std::move(shares));
    }
    if (!tbl.rules.empty()) rep.pots.push_back(std::move(tbl));
  }

  for (ReportRule r : cfg.rules) rep.rules.push_back(report_rule_name(r));
  rep.efficiency_residual.resize(cfg.rules.size());
  for (std::size_t r = 0; r < cfg.rules.size(); ++r) {
    double total = 0.0;
    for (double v : locals[r]) total += v;
    rep.efficiency_residual[r] = total - rep.dy;
  }

  rep.kendall.assign(cfg.rules.size(), std::vector<double>(cfg.rules.size(), 1.0));
  for (std::size_t a = 0; a < cfg.rules.size(); ++a)
    for (std::size_t b = a + 1; b < cfg.rules.size(); ++b)
      rep.kendall[a][b] = rep.kendall[b][a] = kendall_tau(locals[a], locals[b]);

  // Row filter: inactive features (zero under every rule) are noise rows.
  rep.locals.assign(cfg.rules.size(), {});
  for (int pos = 0; pos < kch; ++pos) {
    bool keep = cfg.dense;
    for (std::size_t r = 0; r < cfg.rules.size() && !keep; ++r) keep = locals[r][pos] != 0.0;
    if (!keep) continue;
    rep.features.push_back(sup[pos]);
    for (std::size_t r = 0; r < cfg.rules.size(); ++r) rep.locals[r].push_back(locals[r][pos]);
  }
  return rep;
}

std::vector<WithinPotRow> within_pot_table(const AttributionReport& report,
                                           const std::vector<int>& pot) {
  for (const PotTable& tbl : report.pots) {
    if (tbl.pot != pot) continue;
    std::vector<WithinPotRow> rows;
    const double equal = tbl.phi / double(tbl.pot.size());
    for (std::size_t r = 0; r < tbl.rules.size(); ++r)
      for (std::size_t a = 0; a < tbl.pot.size(); ++a)
        rows.push_back({tbl.rules[r], tbl.pot[a], tbl.shares[r][a], tbl.shares[r][a] - equal});
    return rows;
  }
  throw InputError("pot not present in report");
}

GlobalReport explain_global(const Predictor& model, const std::vector<CounterfactualPair>& pairs,
                            const ExplainConfig& cfg) {
  if (pairs.empty()) throw InputError("no pairs to aggregate");
  const std::size_t dim = pairs.front().space.dim();

  GlobalReport g;
  g.feature_names = pairs.front().space.names;
  g.pair_count = pairs.size();

  std::vector<std::vector<double>> acc;  // [rule][global feature]
  std::set<int> active;
  for (const CounterfactualPair& pair : pairs) {
    if (pair.space.dim() != dim) throw InputError("pairs disagree on dimension");
    AttributionReport rep = explain_local(model, pair, cfg);
    if (g.rules.empty()) {
      g.rules = rep.rules;
      acc.assign(g.rules.size(), std::vector<double>(dim, 0.0));
    }
    for (std::size_t r = 0; r < rep.rules.size(); ++r)
      for (std::size_t row = 0; row < rep.features.size(); ++row)
        acc[r][rep.features[row]] += rep.locals[r][row];
    for (int i : pair.changed) active.insert(i);
    g.mean_k += double(pair.changed.size());
    g.mean_dy += rep.dy;
  }
  g.mean_k /= double(pairs.size());
  g.mean_dy /= double(pairs.size());

  if (cfg.dense)
    for (std::size_t i = 0; i < dim; ++i) g.features.push_back(int(i));
  else
    g.features.assign(active.begin(), active.end());

  g.averages.assign(g.rules.size(), {});
  for (std::size_t r = 0; r < g.rules.size(); ++r)
    for (int i : g.features) g.averages[r].push_back(acc[r][i] / double(pairs.size()));
  return g;
}

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t r = a.size();
  if (b.size() != r) throw InputError("rank vectors differ in length");
  if (r < 2) return 1.0;
  double num = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i + 1; j < r; ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da * db > 0.0) num += 1.0;
      else if (da * db < 0.0) num -= 1.0;
      // tied in either vector: contributes zero
    }
  return num / (double(r) * double(r - 1) / 2.0);
}

}  // namespace cfattr
