#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "cfattr/coalition.hpp"
#include "cfattr/counterfactual.hpp"
#include "cfattr/dataset.hpp"
#include "cfattr/error.hpp"
#include "cfattr/model.hpp"
#include "oracles.hpp"

using namespace cfattr;

namespace {

std::string write_csv(const char* name, const std::string& content) {
  std::string path = std::string("cfattr_test_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("dataset loading and label extraction") {
  auto path = write_csv("data.csv",
                        "a,b,label,c\n"
                        "1.0,2.0,yes,3.0\n"
                        "4.0,5.0,no,6.0\n");
  auto data = load_dataset_csv(path, "label");
  CHECK(data.size() == 2);
  CHECK(data.space.names == std::vector<std::string>{"a", "b", "c"});
  CHECK(data.rows[0] == Instance{1.0, 2.0, 3.0});
  CHECK(data.rows[1] == Instance{4.0, 5.0, 6.0});
  CHECK(data.labels == std::vector<std::string>{"yes", "no"});
  std::remove(path.c_str());
}

TEST_CASE("dataset rejects ragged and malformed rows") {
  auto ragged = write_csv("ragged.csv", "a,b,y\n1.0,2.0,x\n3.0,x\n");
  CHECK_THROWS_AS(load_dataset_csv(ragged, "y"), ParseError);
  std::remove(ragged.c_str());

  auto nonnum = write_csv("nonnum.csv", "a,b,y\n1.0,oops,x\n");
  CHECK_THROWS_AS(load_dataset_csv(nonnum, "y"), ParseError);
  std::remove(nonnum.c_str());

  auto nolabel = write_csv("nolabel.csv", "a,b\n1.0,2.0\n");
  CHECK_THROWS_AS(load_dataset_csv(nolabel, "y"), InputError);
  std::remove(nolabel.c_str());
}

TEST_CASE("feature ranges from data") {
  auto path = write_csv("ranges.csv", "a,b,y\n1.0,5.0,0\n-2.0,7.0,1\n0.5,6.0,0\n");
  auto data = load_dataset_csv(path, "y");
  auto ranges = ranges_from_dataset(data);
  CHECK(ranges.lo == std::vector<double>{-2.0, 5.0});
  CHECK(ranges.hi == std::vector<double>{1.0, 7.0});
  CHECK_NOTHROW(ranges.validate());
  std::remove(path.c_str());

  auto unit = unit_ranges(3);
  CHECK(unit.lo == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(unit.hi == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("nearest neighbor pairing matches a brute force scan") {
  auto path = write_csv("nn.csv",
                        "a,b,y\n"
                        "0.0,0.0,neg\n"
                        "1.0,1.0,pos\n"
                        "0.2,0.1,neg\n"
                        "0.3,0.2,pos\n"
                        "5.0,5.0,pos\n");
  auto data = load_dataset_csv(path, "y");
  auto pairs = nn_pairing(data, "neg", "pos", 0, 1e-12);
  auto expect = oracle::brute_nn(data, "neg", "pos");
  REQUIRE(pairs.size() == expect.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].x0 == data.rows[expect[i].first]);
    CHECK(pairs[i].x1 == data.rows[expect[i].second]);
  }
  std::remove(path.c_str());
}

TEST_CASE("identical rows pair with an empty changed set") {
  auto path = write_csv("same.csv", "a,b,y\n1.0,2.0,neg\n1.0,2.0,pos\n");
  auto data = load_dataset_csv(path, "y");
  auto pairs = nn_pairing(data, "neg", "pos", 0, 1e-12);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].k() == 0);
  std::remove(path.c_str());
}

TEST_CASE("wide epsilon freezes small moves in pairing") {
  auto path = write_csv("eps.csv", "a,b,y\n0.0,0.0,neg\n0.1,0.05,pos\n");
  auto data = load_dataset_csv(path, "y");
  auto pairs = nn_pairing(data, "neg", "pos", 0, 1.0);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].k() == 0);
  std::remove(path.c_str());
}

TEST_CASE("count limits the number of baselines paired") {
  auto path = write_csv("count.csv",
                        "a,b,y\n0.0,0.0,neg\n0.1,0.1,neg\n0.2,0.2,neg\n1.0,1.0,pos\n");
  auto data = load_dataset_csv(path, "y");
  CHECK(nn_pairing(data, "neg", "pos", 2, 1e-12).size() == 2);
  CHECK(nn_pairing(data, "neg", "pos", 0, 1e-12).size() == 3);
  std::remove(path.c_str());
}

TEST_CASE("random search returns x0 when the target is already met") {
  LinearModel m({1.0, 1.0}, 0.5);
  const Instance x0 = {0.4, 0.4};  // score 1.3 >= 0.8
  auto res = random_search_cf({&m}, x0, CfTarget{0.8}, 100, 0, unit_ranges(2));
  CHECK(res.success);
  CHECK(res.pair.x1 == x0);
  CHECK(res.pair.k() == 0);
  CHECK(res.draws_used == 0);
}

TEST_CASE("random search finds a reachable threshold") {
  LinearModel m({1.0, 1.0}, 0.0);
  const Instance x0 = {0.0, 0.0};
  auto res = random_search_cf({&m}, x0, CfTarget{0.8}, 2000, 17, unit_ranges(2));
  REQUIRE(res.success);
  CHECK(min_score({&m}, res.pair.x1) >= 0.8);
  CHECK(target_met({&m}, CfTarget{0.8}, res.pair.x1));
  CHECK(res.draws_used >= 1);
}

TEST_CASE("random search fails honestly on an unreachable target") {
  LinearModel m({1.0, 0.0}, 0.0);  // max score on the unit box is 1
  auto res = random_search_cf({&m}, {0.0, 0.0}, CfTarget{5.0}, 1, 0, unit_ranges(2));
  CHECK_FALSE(res.success);
  CHECK(res.draws_used == 1);
}

TEST_CASE("min aggregation across several scorers") {
  LinearModel a({1.0, 0.0}, 0.0);
  LinearModel b({0.0, 1.0}, 0.0);
  CHECK(min_score({&a, &b}, {0.9, 0.2}) == doctest::Approx(0.2));
  auto res = random_search_cf({&a, &b}, {0.0, 0.0}, CfTarget{0.7}, 5000, 3, unit_ranges(2));
  REQUIRE(res.success);
  CHECK(a.predict(res.pair.x1) >= 0.7);
  CHECK(b.predict(res.pair.x1) >= 0.7);
}

TEST_CASE("growing spheres succeeds at the first shell that overlaps") {
  // one useful feature; target needs x1 >= 0.5 from baseline 0.45
  ThresholdModel::Tree tr;
  tr.nodes.resize(3);
  tr.nodes[0] = {false, 0.0, 0, 0.5, 1, 2};
  tr.nodes[1] = {true, 0.0, -1, 0.0, -1, -1};
  tr.nodes[2] = {true, 1.0, -1, 0.0, -1, -1};
  ThresholdModel m(2, {tr});

  FeatureRanges box;
  box.lo = {0.0, 0.0};
  box.hi = {1.0, 1.0};
  auto res = growing_spheres_cf({&m}, {0.45, 0.5}, CfTarget{0.9}, {0.2, 0.6}, 64, 5, box);
  REQUIRE(res.success);
  CHECK(target_met({&m}, CfTarget{0.9}, res.pair.x1));
  // the first shell already covers the boundary at distance 0.05
  CHECK(res.draws_used <= 64);
}

TEST_CASE("growing spheres validates the radius schedule") {
  LinearModel m({1.0, 1.0}, 0.0);
  CHECK_THROWS_AS(growing_spheres_cf({&m}, {0.0, 0.0}, CfTarget{0.5}, {0.5, 0.5}, 8, 0,
                                     unit_ranges(2)),
                  InputError);
  CHECK_THROWS_AS(growing_spheres_cf({&m}, {0.0, 0.0}, CfTarget{0.5}, {-1.0, 0.5}, 8, 0,
                                     unit_ranges(2)),
                  InputError);
}

TEST_CASE("genetic search is immediate when the population starts satisfied") {
  LinearModel m({1.0, 1.0}, 1.0);  // score >= 1 everywhere on the unit box
  auto res = genetic_cf({&m}, {0.2, 0.2}, CfTarget{0.9}, 16, 10, 0, unit_ranges(2));
  CHECK(res.success);
}

TEST_CASE("genetic best trace is monotone and converges on a toy model") {
  LinearModel m({1.0, 1.0}, 0.0);
  auto res = genetic_cf({&m}, {0.0, 0.0}, CfTarget{1.6}, 24, 50, 42, unit_ranges(2));
  for (std::size_t g = 1; g < res.best_trace.size(); ++g)
    CHECK(res.best_trace[g] >= res.best_trace[g - 1] - 1e-12);
  REQUIRE(res.success);
  CHECK(res.score >= res.best_trace.front());
  CHECK(min_score({&m}, res.pair.x1) >= 1.6);
}

TEST_CASE("patch curve endpoints reproduce the two anchors") {
  MultilinearModel m(3, {{{0}, 1.0}, {{1}, 2.0}, {{0, 2}, -0.5}});
  auto pair = make_pair(FeatureSpace::dense_default(3), {0.1, 0.2, 0.3}, {0.9, 0.8, 0.7});
  std::vector<int> ranking = pair.changed;
  auto curve = patch_budget_test(m, pair, ranking);
  REQUIRE(curve.scores.size() == 4);
  CHECK(curve.scores.front() == doctest::Approx(m.predict(pair.x0)).epsilon(1e-12));
  CHECK(curve.scores.back() == doctest::Approx(m.predict(pair.x1)).epsilon(1e-12));
}

TEST_CASE("descending additive ranking dominates every other ranking") {
  LinearModel m({0.4, 0.3, 0.2, 0.1}, 0.0);
  auto pair = make_pair(FeatureSpace::dense_default(4), {0.0, 0.0, 0.0, 0.0},
                        {1.0, 1.0, 1.0, 1.0});
  // contributions w_i: descending ranking is feature order 0,1,2,3
  std::vector<int> best_rank = {0, 1, 2, 3};
  auto best = patch_budget_test(m, pair, best_rank);

  std::vector<int> perm = {0, 1, 2, 3};
  std::sort(perm.begin(), perm.end());
  do {
    auto other = patch_budget_test(m, pair, perm);
    for (std::size_t j = 0; j < best.scores.size(); ++j)
      CHECK(best.scores[j] >= other.scores[j] - 1e-12);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST_CASE("patch curve budget markers") {
  LinearModel m({0.5, 0.4, 0.3}, 0.0);
  auto pair = make_pair(FeatureSpace::dense_default(3), {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
  auto curve = patch_budget_test(m, pair, {0, 1, 2});
  // scores: 0, 0.5, 0.9, 1.2
  CHECK(curve.k_at_half == 1);
  CHECK(curve.k_at_09 == 2);
  CHECK(curve.budget_for(0.5) == 1);
  CHECK(curve.budget_for(1.0) == 3);
  CHECK(curve.budget_for(2.0) == -1);
}

TEST_CASE("patch ranking must cover the changed set") {
  LinearModel m({1.0, 1.0}, 0.0);
  auto pair = make_pair(FeatureSpace::dense_default(2), {0.0, 0.0}, {1.0, 1.0});
  CHECK_THROWS_AS(patch_budget_test(m, pair, {0}), InputError);
  CHECK_THROWS_AS(patch_budget_test(m, pair, {0, 0}), InputError);
}

TEST_CASE("random band sits between the best and worst rankings") {
  LinearModel m({0.9, 0.05, 0.05}, 0.0);
  auto pair = make_pair(FeatureSpace::dense_default(3), {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0});
  auto band = random_patch_band(m, pair, 10, 0);
  auto best = patch_budget_test(m, pair, {0, 1, 2});
  auto worst = patch_budget_test(m, pair, {1, 2, 0});
  REQUIRE(band.mean.size() == best.scores.size());
  for (std::size_t j = 0; j < band.mean.size(); ++j) {
    CHECK(band.mean[j] >= worst.scores[j] - 1e-12);
    CHECK(band.mean[j] <= best.scores[j] + 1e-12);
    CHECK(band.p10[j] <= band.p90[j] + 1e-12);
  }
}
