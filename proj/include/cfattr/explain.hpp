#pragma once

#include <string>
#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/limits.hpp"
#include "cfattr/model.hpp"
#include "cfattr/montecarlo.hpp"

namespace cfattr {

// Attribution rules reportable side by side. The first four reallocate each
// pot internally; es_macro applies Equal Surplus to the macro game directly
// (the feature-total baseline) and has no within-pot rows.
enum class ReportRule { EqualSplit, MicroShapley, Solidarity, EqualSurplus, EsMacro };

ReportRule report_rule_from_name(const std::string& name);  // accepts aliases
const char* report_rule_name(ReportRule rule);

struct ExplainConfig {
  int m = 5;
  std::vector<int> m_per_feature;  // per global feature id; empty = uniform m
  bool saturate = false;
  SaturationPolicy saturation;
  std::vector<ReportRule> rules = {ReportRule::EqualSplit, ReportRule::MicroShapley,
                                   ReportRule::EqualSurplus};
  int order_cap = 0;  // 0 = all orders; capped pots fall back to equal split
  bool use_mc = false;
  McConfig mc;
  int cap = kExhaustiveCap;  // changed-set size limit for exhaustive mode
  int threads = 1;
  bool dense = false;  // keep all-zero feature rows

  void validate() const;
  int resolution_for(int feature) const;
};

struct PotTable {
  std::vector<int> pot;
  double phi = 0.0;
  std::vector<std::string> rules;           // within-pot rules only
  std::vector<std::vector<double>> shares;  // [rule][pot member]
};

struct AttributionReport {
  double g0 = 0.0;
  double dy = 0.0;
  std::vector<std::string> feature_names;  // full space, for emission
  std::vector<int> features;               // report rows, global ids
  std::vector<std::string> rules;
  std::vector<std::vector<double>> locals;      // [rule][row]
  std::vector<double> efficiency_residual;      // sum(locals) - dy, per rule
  std::vector<PotTable> pots;                   // |u| >= 2, within order cap
  std::vector<std::vector<double>> kendall;     // rank agreement between rules
  double fallback_mass = 0.0;  // sum |phi_u| of pots split equally past the cap
  int capped_pots = 0;
  int m_used = 0;
  bool saturated_pick = false;
  bool mc_mode = false;

  double local_total(std::size_t rule) const;
};

struct WithinPotRow {
  std::string rule;
  int feature = -1;
  double share = 0.0;
  double diff_vs_equal = 0.0;
};

struct GlobalReport {
  std::vector<std::string> feature_names;
  std::vector<int> features;  // union of changed sets (all features if dense)
  std::vector<std::string> rules;
  std::vector<std::vector<double>> averages;  // [rule][row]
  std::size_t pair_count = 0;
  double mean_k = 0.0;
  double mean_dy = 0.0;
};

AttributionReport explain_local(const Predictor& model, const CounterfactualPair& pair,
                                const ExplainConfig& cfg);

std::vector<WithinPotRow> within_pot_table(const AttributionReport& report,
                                           const std::vector<int>& pot);

GlobalReport explain_global(const Predictor& model, const std::vector<CounterfactualPair>& pairs,
                            const ExplainConfig& cfg);

// Kendall rank agreement in [-1, 1]; tied pairs contribute zero.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cfattr
