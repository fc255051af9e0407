#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cfattr/coalition.hpp"
#include "cfattr/error.hpp"
#include "cfattr/explain.hpp"
#include "cfattr/model.hpp"
#include "cfattr/rng.hpp"
#include "models.hpp"
#include "oracles.hpp"

using namespace cfattr;

namespace {

CounterfactualPair unit_pair(int d) {
  return make_pair(FeatureSpace::dense_default(d), Instance(d, 0.0), Instance(d, 1.0));
}

ExplainConfig all_rules_config(int m = 3) {
  ExplainConfig cfg;
  cfg.m = m;
  cfg.rules = {ReportRule::EqualSplit, ReportRule::MicroShapley, ReportRule::Solidarity,
               ReportRule::EqualSurplus, ReportRule::EsMacro};
  return cfg;
}

double row_value(const AttributionReport& rep, std::size_t rule, int feature) {
  for (std::size_t row = 0; row < rep.features.size(); ++row)
    if (rep.features[row] == feature) return rep.locals[rule][row];
  return 0.0;
}

}  // namespace

TEST_CASE("rule names and aliases") {
  CHECK(report_rule_from_name("equal_split") == ReportRule::EqualSplit);
  CHECK(report_rule_from_name("equal") == ReportRule::EqualSplit);
  CHECK(report_rule_from_name("eq") == ReportRule::EqualSplit);
  CHECK(report_rule_from_name("micro_shapley") == ReportRule::MicroShapley);
  CHECK(report_rule_from_name("shapley") == ReportRule::MicroShapley);
  CHECK(report_rule_from_name("micro") == ReportRule::MicroShapley);
  CHECK(report_rule_from_name("solidarity") == ReportRule::Solidarity);
  CHECK(report_rule_from_name("equal_surplus") == ReportRule::EqualSurplus);
  CHECK(report_rule_from_name("es") == ReportRule::EqualSurplus);
  CHECK(report_rule_from_name("es_macro") == ReportRule::EsMacro);
  CHECK_THROWS_AS(report_rule_from_name("bogus"), InputError);
  CHECK(std::string(report_rule_name(ReportRule::MicroShapley)) == "micro_shapley");
}

TEST_CASE("linear model attributes w_i delta_i under every rule") {
  LinearModel m({2.0, -1.0, 0.5}, 10.0);
  auto pair = make_pair(FeatureSpace::dense_default(3), {0.0, 1.0, -1.0}, {1.0, 2.0, 1.0});
  auto rep = explain_local(m, pair, all_rules_config());

  REQUIRE(rep.rules.size() == 5);
  for (std::size_t rule = 0; rule < rep.rules.size(); ++rule)
    for (int f : pair.changed) {
      const double expect = m.weights()[f] * pair.delta[f];
      CHECK(row_value(rep, rule, f) == doctest::Approx(expect).epsilon(1e-9));
    }
  const bool pots_vanish = std::all_of(rep.pots.begin(), rep.pots.end(),
                                       [](const PotTable& p) { return std::abs(p.phi) < 1e-12; });
  CHECK(pots_vanish);
}

TEST_CASE("product game splits evenly under shapley style rules") {
  MultilinearModel m(2, {{{0, 1}, 1.0}});
  for (int m_res : {1, 2}) {
    auto rep = explain_local(m, unit_pair(2), all_rules_config(m_res));
    const auto shapley = std::find(rep.rules.begin(), rep.rules.end(), "micro_shapley");
    REQUIRE(shapley != rep.rules.end());
    const std::size_t idx = shapley - rep.rules.begin();
    CHECK(row_value(rep, idx, 0) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(row_value(rep, idx, 1) == doctest::Approx(0.5).epsilon(1e-10));
  }
}

TEST_CASE("every rule is efficient on a random model") {
  Rng rng(101);
  auto m = testm::random_multilinear(4, rng);
  auto pair = unit_pair(4);
  auto rep = explain_local(m, pair, all_rules_config(2));
  const double dy = rep.dy;
  for (std::size_t rule = 0; rule < rep.rules.size(); ++rule) {
    CHECK(std::abs(rep.local_total(rule) - dy) / std::max(std::abs(dy), 1e-12) < 1e-9);
    CHECK(std::abs(rep.efficiency_residual[rule]) / std::max(std::abs(dy), 1e-12) < 1e-9);
  }
}

TEST_CASE("dividend sum matches dy on explain runs") {
  Rng rng(103);
  auto m = testm::random_multilinear(3, rng);
  auto pair = unit_pair(3);
  auto rep = explain_local(m, pair, all_rules_config(2));
  double pots_total = 0.0;
  for (const auto& pot : rep.pots) pots_total += pot.phi;
  // singleton contributions are dy minus the interaction mass
  const auto vt = coalition_values(m, pair);
  const auto dt = dividends(vt);
  double singles = 0.0;
  for (int j = 0; j < pair.k(); ++j) singles += dt.phi[1u << j];
  CHECK(pots_total + singles == doctest::Approx(rep.dy).epsilon(1e-9));
}

TEST_CASE("within pot tables expose shares and differences") {
  testm::PowerModel m({2, 1});
  auto rep = explain_local(m, unit_pair(2), all_rules_config(4));
  REQUIRE(rep.pots.size() == 1);
  const auto& pot = rep.pots[0];
  CHECK(pot.pot == std::vector<int>{0, 1});
  CHECK(pot.phi == doctest::Approx(1.0).epsilon(1e-9));

  auto rows = within_pot_table(rep, pot.pot);
  REQUIRE_FALSE(rows.empty());

  double diff_sum = 0.0;
  for (const auto& row : rows) {
    if (row.rule == "equal_split")
      CHECK(row.share == doctest::Approx(pot.phi / 2).epsilon(1e-9));
    if (row.rule == "micro_shapley") diff_sum += row.diff_vs_equal;
  }
  CHECK(diff_sum == doctest::Approx(0.0).epsilon(1e-9));

  // the curved feature takes more than half of the pot under micro shapley
  for (const auto& row : rows)
    if (row.rule == "micro_shapley" && row.feature == 0)
      CHECK(row.share > pot.phi / 2);
}

TEST_CASE("order cap falls back to equal split and stays efficient") {
  MultilinearModel m(3, {{{0, 1, 2}, 3.0}, {{0, 1}, 1.0}});
  auto pair = unit_pair(3);
  ExplainConfig cfg = all_rules_config(2);
  cfg.order_cap = 2;
  auto rep = explain_local(m, pair, cfg);

  CHECK(rep.capped_pots == 1);
  CHECK(rep.fallback_mass == doctest::Approx(3.0).epsilon(1e-9));
  for (std::size_t rule = 0; rule < rep.rules.size(); ++rule)
    CHECK(rep.local_total(rule) == doctest::Approx(rep.dy).epsilon(1e-9));

  // the capped pot is not reported as a grid pot
  for (const auto& pot : rep.pots) CHECK(pot.pot.size() <= 2);
}

TEST_CASE("saturate picks the resolution automatically") {
  LinearModel m({1.0, 2.0}, 0.0);
  ExplainConfig cfg;
  cfg.saturate = true;
  auto rep = explain_local(m, unit_pair(2), cfg);
  CHECK(rep.saturated_pick);
  CHECK(rep.m_used == 1);
}

TEST_CASE("mc mode runs micro shapley only") {
  Rng rng(107);
  auto m = testm::random_multilinear(3, rng);
  auto pair = unit_pair(3);

  ExplainConfig cfg;
  cfg.use_mc = true;
  cfg.m = 2;
  cfg.mc.perms = 2000;
  cfg.mc.seed = 12;
  cfg.rules = {ReportRule::MicroShapley};
  auto rep = explain_local(m, pair, cfg);
  CHECK(rep.mc_mode);
  CHECK(rep.pots.empty());  // no dividend enumeration in sampling mode
  CHECK(rep.local_total(0) == doctest::Approx(rep.dy).epsilon(1e-9));

  ExplainConfig bad = cfg;
  bad.rules = {ReportRule::MicroShapley, ReportRule::EqualSplit};
  CHECK_THROWS_AS(explain_local(m, pair, bad), InputError);
}

TEST_CASE("mc mode estimates agree with exhaustive shapley at m=1") {
  Rng rng(109);
  auto m = testm::random_multilinear(3, rng);
  auto pair = unit_pair(3);

  ExplainConfig mc;
  mc.use_mc = true;
  mc.m = 1;
  mc.mc.perms = 20000;
  mc.mc.seed = 4;
  mc.rules = {ReportRule::MicroShapley};
  auto rep = explain_local(m, pair, mc);

  auto exact = oracle::exact_macro_shapley(coalition_values(m, pair));
  for (int f = 0; f < 3; ++f) CHECK(std::abs(row_value(rep, 0, f) - exact[f]) < 0.02);
}

TEST_CASE("exhaustive cap raises a capacity error without mc") {
  LinearModel m(std::vector<double>(20, 1.0), 0.0);
  auto pair = unit_pair(20);
  ExplainConfig cfg;
  CHECK_THROWS_AS(explain_local(m, pair, cfg), CapacityError);
}

TEST_CASE("row filter hides untouched features unless dense") {
  LinearModel m({1.0, 0.0, 2.0}, 0.0);  // middle feature changes but has weight 0
  auto pair = unit_pair(3);
  ExplainConfig cfg;
  auto rep = explain_local(m, pair, cfg);
  CHECK(rep.features == std::vector<int>{0, 2});

  cfg.dense = true;
  auto dense_rep = explain_local(m, pair, cfg);
  CHECK(dense_rep.features == std::vector<int>{0, 1, 2});
}

TEST_CASE("config validation rejects conflicting requests") {
  ExplainConfig dup;
  dup.rules = {ReportRule::EqualSplit, ReportRule::EqualSplit};
  CHECK_THROWS_AS(dup.validate(), InputError);

  ExplainConfig conflict;
  conflict.saturate = true;
  conflict.m_per_feature = {2, 2};
  CHECK_THROWS_AS(conflict.validate(), InputError);

  ExplainConfig none;
  none.rules = {};
  CHECK_THROWS_AS(none.validate(), InputError);
}

TEST_CASE("per feature resolutions are honored") {
  testm::PowerModel m({2, 1});
  ExplainConfig cfg;
  cfg.m_per_feature = {4, 2};
  cfg.rules = {ReportRule::MicroShapley};
  auto rep = explain_local(m, unit_pair(2), cfg);
  CHECK(rep.local_total(0) == doctest::Approx(rep.dy).epsilon(1e-9));
}

TEST_CASE("kendall tau basics") {
  CHECK(kendall_tau({1.0, 2.0, 3.0}, {10.0, 20.0, 30.0}) == doctest::Approx(1.0));
  CHECK(kendall_tau({1.0, 2.0, 3.0}, {30.0, 20.0, 10.0}) == doctest::Approx(-1.0));
  CHECK(kendall_tau({1.0, 1.0, 2.0}, {1.0, 2.0, 2.0}) == doctest::Approx(1.0 / 3.0));
  CHECK(kendall_tau({1.0, 2.0}, {5.0, 5.0}) == doctest::Approx(0.0));
}

TEST_CASE("kendall matrix diagonal is one") {
  Rng rng(113);
  auto m = testm::random_multilinear(3, rng);
  auto rep = explain_local(m, unit_pair(3), all_rules_config(2));
  REQUIRE(rep.kendall.size() == rep.rules.size());
  for (std::size_t i = 0; i < rep.kendall.size(); ++i) {
    CHECK(rep.kendall[i][i] == doctest::Approx(1.0));
    for (std::size_t j = 0; j < rep.kendall.size(); ++j)
      CHECK(rep.kendall[i][j] == doctest::Approx(rep.kendall[j][i]));
  }
}

TEST_CASE("global report of a single pair equals its locals") {
  Rng rng(127);
  auto m = testm::random_multilinear(3, rng);
  auto pair = unit_pair(3);
  auto cfg = all_rules_config(2);
  auto rep = explain_local(m, pair, cfg);
  auto g = explain_global(m, {pair}, cfg);

  CHECK(g.pair_count == 1);
  CHECK(g.mean_dy == doctest::Approx(rep.dy).epsilon(1e-12));
  for (std::size_t rule = 0; rule < g.rules.size(); ++rule)
    for (std::size_t row = 0; row < g.features.size(); ++row)
      CHECK(g.averages[rule][row] ==
            doctest::Approx(row_value(rep, rule, g.features[row])).epsilon(1e-9));
}

TEST_CASE("global averages halve contributions of disjoint pairs") {
  LinearModel m({1.0, 2.0, 4.0, 8.0}, 0.0);
  auto p1 = make_pair(FeatureSpace::dense_default(4), {0.0, 0.0, 0.0, 0.0},
                      {1.0, 1.0, 0.0, 0.0});
  auto p2 = make_pair(FeatureSpace::dense_default(4), {0.0, 0.0, 0.0, 0.0},
                      {0.0, 0.0, 1.0, 1.0});
  ExplainConfig cfg;
  cfg.rules = {ReportRule::MicroShapley};
  auto g = explain_global(m, {p1, p2}, cfg);

  REQUIRE(g.features == std::vector<int>{0, 1, 2, 3});
  CHECK(g.averages[0][0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(g.averages[0][1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(g.averages[0][2] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(g.averages[0][3] == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(g.mean_k == doctest::Approx(2.0));
}

TEST_CASE("global averages stay efficient") {
  Rng rng(131);
  auto m = testm::random_multilinear(3, rng);
  auto p1 = unit_pair(3);
  auto p2 = make_pair(FeatureSpace::dense_default(3), {0.0, 0.0, 0.0}, {1.0, 0.5, 0.0});
  auto cfg = all_rules_config(2);
  auto g = explain_global(m, {p1, p2}, cfg);
  for (std::size_t rule = 0; rule < g.rules.size(); ++rule) {
    double total = std::accumulate(g.averages[rule].begin(), g.averages[rule].end(), 0.0);
    CHECK(total == doctest::Approx(g.mean_dy).epsilon(1e-9));
  }
}

TEST_CASE("global requires at least one pair") {
  LinearModel m({1.0, 1.0}, 0.0);
  CHECK_THROWS_AS(explain_global(m, {}, ExplainConfig{}), InputError);
}
