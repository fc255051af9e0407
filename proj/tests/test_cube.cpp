#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "cfattr/coalition.hpp"
#include "cfattr/cube.hpp"
#include "cfattr/error.hpp"
#include "cfattr/model.hpp"
#include "cfattr/rng.hpp"
#include "oracles.hpp"

using namespace cfattr;

namespace {

CounterfactualPair unit_pair(int d) {
  return make_pair(FeatureSpace::dense_default(d), Instance(d, 0.0), Instance(d, 1.0));
}

}  // namespace

TEST_CASE("grid spec arithmetic") {
  GridSpec spec{{0, 2}, {2, 3}};
  CHECK(spec.k() == 2);
  CHECK(spec.total_steps() == 5);
  CHECK(spec.state_count() == 12);
  CHECK_NOTHROW(spec.validate());

  CHECK_THROWS_AS((GridSpec{{0}, {2}}).validate(), InputError);       // pots need k >= 2
  CHECK_THROWS_AS((GridSpec{{0, 1}, {2, 0}}).validate(), InputError); // m_i >= 1
  CHECK_THROWS_AS((GridSpec{{2, 0}, {2, 2}}).validate(), InputError); // ascending pot
}

TEST_CASE("grid indexer round trips") {
  GridSpec spec{{0, 1, 3}, {2, 1, 3}};
  GridIndexer ix(spec);
  CHECK(ix.size() == spec.state_count());
  std::vector<int> p(3);
  for (std::size_t i = 0; i < ix.size(); ++i) {
    ix.decode(i, p);
    CHECK(ix.index(p) == i);
  }
  // last axis fastest
  CHECK(ix.stride(2) == 1);
  CHECK(ix.index({0, 0, 1}) == 1);
}

TEST_CASE("slider endpoints and coordinates") {
  auto pair = make_pair(FeatureSpace::dense_default(3), {0.0, 0.0, 5.0}, {1.0, 1.0, 5.0});
  std::vector<int> pot = {0, 1};
  CHECK(slider_point(pair, pot, {0.0, 0.0}) == pair.x0);
  auto corner = slider_point(pair, pot, {1.0, 1.0});
  CHECK(corner == Instance{1.0, 1.0, 5.0});
  auto mid = slider_point(pair, pot, {0.5, 0.25});
  CHECK(mid == Instance{0.5, 0.25, 5.0});
}

TEST_CASE("slider at 1 is bit-exact against the counterfactual") {
  auto pair = make_pair(FeatureSpace::dense_default(2), {0.1, 0.2}, {0.7, 0.9});
  auto corner = slider_point(pair, {0, 1}, {1.0, 1.0});
  CHECK(corner[0] == pair.x1[0]);
  CHECK(corner[1] == pair.x1[1]);
}

TEST_CASE("cube of a product model") {
  MultilinearModel m(2, {{{0, 1}, 1.0}});
  auto ct = eval_cube(m, unit_pair(2), uniform_grid({0, 1}, 2));
  GridIndexer ix(ct.spec);
  // t = p/m so g(p) = (p1/2)(p2/2)
  CHECK(ct.g[ix.index({1, 1})] == doctest::Approx(0.25));
  CHECK(ct.g[ix.index({2, 2})] == doctest::Approx(1.0));
  CHECK(ct.g[ix.index({0, 2})] == doctest::Approx(0.0));
}

TEST_CASE("categorical axes use endpoint mixtures") {
  FeatureSpace space = FeatureSpace::dense_default(2);
  space.kinds[0] = FeatureKind::CategoricalBinary;
  auto pair = make_pair(space, {0.0, 0.0}, {1.0, 1.0});
  MultilinearModel m(2, {{{0, 1}, 1.0}, {{0}, 2.0}});

  SUBCASE("t=0 and t=1 equal raw endpoint evaluations") {
    auto ex0 = mixture_expansion(pair, {0, 1}, {0.0, 0.5});
    REQUIRE(ex0.points.size() == 1);
    CHECK(ex0.points[0][0] == 0.0);
    auto ex1 = mixture_expansion(pair, {0, 1}, {1.0, 0.5});
    REQUIRE(ex1.points.size() == 1);
    CHECK(ex1.points[0][0] == 1.0);
  }

  SUBCASE("interior state mixes endpoints with weights (1-t, t)") {
    auto ex = mixture_expansion(pair, {0, 1}, {0.25, 0.5});
    REQUIRE(ex.points.size() == 2);
    double mixed = 0.0;
    for (std::size_t j = 0; j < ex.points.size(); ++j)
      mixed += ex.weights[j] * m.predict(ex.points[j]);
    // model linear in the categorical coordinate: mixture equals direct eval
    CHECK(mixed == doctest::Approx(m.predict({0.25, 0.5})));
    CHECK(ex.weights[0] + ex.weights[1] == doctest::Approx(1.0));
  }

  SUBCASE("eval_cube keeps corners raw") {
    auto ct = eval_cube(m, pair, uniform_grid({0, 1}, 2));
    GridIndexer ix(ct.spec);
    CHECK(ct.g[ix.index({2, 2})] == doctest::Approx(m.predict(pair.x1)));
    CHECK(ct.g[ix.index({0, 0})] == doctest::Approx(m.predict(pair.x0)));
  }
}

TEST_CASE("residual of a pure product is the product of slider values") {
  MultilinearModel m(2, {{{0, 1}, 1.0}});
  auto ct = eval_cube(m, unit_pair(2), uniform_grid({0, 1}, 2));
  auto rg = residual_grid(ct);
  GridIndexer ix(rg.spec);
  for (int p1 = 0; p1 <= 2; ++p1)
    for (int p2 = 0; p2 <= 2; ++p2)
      CHECK(rg.r[ix.index({p1, p2})] == doctest::Approx((p1 / 2.0) * (p2 / 2.0)).epsilon(1e-12));
  CHECK(rg.far_corner() == doctest::Approx(1.0));
}

TEST_CASE("residual boundary slices are exactly zero") {
  MlpModel m({2, 3, 1}, {{0.4, -0.7, 0.2, 0.9, -0.3, 0.5}, {1.0, 0.5, -0.25}},
             {{0.1, -0.2, 0.3}, {0.0}}, MlpModel::Activation::Tanh);
  auto ct = eval_cube(m, unit_pair(2), uniform_grid({0, 1}, 4));
  auto rg = residual_grid(ct);
  GridIndexer ix(rg.spec);
  for (int p = 0; p <= 4; ++p) {
    CHECK(rg.r[ix.index({0, p})] == 0.0);  // exact, not approximate
    CHECK(rg.r[ix.index({p, 0})] == 0.0);
  }
}

TEST_CASE("residual grid matches direct inclusion-exclusion") {
  MlpModel m({3, 4, 1},
             {{0.3, -0.2, 0.5, 0.1, 0.4, -0.6, -0.7, 0.2, 0.9, 0.05, -0.3, 0.8},
              {1.0, -0.5, 0.25, 0.75}},
             {{0.1, 0.2, -0.1, 0.0}, {0.05}}, MlpModel::Activation::Tanh);
  auto ct = eval_cube(m, unit_pair(3), uniform_grid({0, 1, 2}, 3));
  auto rg = residual_grid(ct);
  GridIndexer ix(rg.spec);
  std::vector<int> p(3);
  for (std::size_t i = 0; i < ix.size(); ++i) {
    ix.decode(i, p);
    CHECK(rg.r[i] == doctest::Approx(oracle::direct_residual(ct, p)).epsilon(1e-10));
  }
}

TEST_CASE("far corner equals the dividend across the model zoo") {
  auto check_model = [](const Predictor& m, const CounterfactualPair& pair) {
    auto dt = dividends(coalition_values(m, pair));
    const Mask full = Mask((1u << pair.k()) - 1);
    auto ct = eval_cube(m, pair, uniform_grid(pair.changed, 3));
    auto rg = residual_grid(ct);
    const double scale = std::max(std::abs(dt.phi[full]), 1e-12);
    CHECK(std::abs(rg.far_corner() - dt.phi[full]) / scale < 1e-9);
  };

  check_model(MultilinearModel(2, {{{0, 1}, 1.0}, {{0}, 0.5}}), unit_pair(2));
  check_model(LinearModel({1.0, -2.0}, 3.0), unit_pair(2));

  Rng rng(5);
  std::vector<MultilinearModel::Term> terms;
  for (Mask u = 1; u < 8; ++u) {
    std::vector<int> coal;
    for (int i = 0; i < 3; ++i)
      if (u & (1u << i)) coal.push_back(i);
    terms.push_back({coal, rng.uniform(-1.0, 1.0)});
  }
  check_model(MultilinearModel(3, terms), unit_pair(3));

  MlpModel mlp({2, 2, 1}, {{0.8, -0.4, 0.3, 0.6}, {1.0, -1.0}}, {{0.1, -0.2}, {0.3}},
               MlpModel::Activation::Tanh);
  check_model(mlp, make_pair(FeatureSpace::dense_default(2), {-0.5, 0.25}, {0.75, -0.9}));
}

TEST_CASE("delta_p grouped increments") {
  MultilinearModel m(2, {{{0, 1}, 1.0}});
  auto rg = residual_grid(eval_cube(m, unit_pair(2), uniform_grid({0, 1}, 2)));
  const std::vector<double> shapley_b(rg.spec.total_steps() + 1, 1.0);

  // r = t1 t2 on m=(2,2): step from (1,1) to (2,1) moves 0.25 -> 0.5
  CHECK(delta_p(rg, {1, 1}, 0, shapley_b) == doctest::Approx(0.25));

  // both states on the other axis's zero boundary
  CHECK(delta_p(rg, {1, 0}, 0, shapley_b) == doctest::Approx(0.0));

  // Equal Surplus weights kill p=0 increments on residual grids
  std::vector<double> es_b(5, 0.0);
  es_b[1] = 3.0;
  es_b[4] = 1.0;
  CHECK(delta_p(rg, {0, 0}, 0, es_b) == doctest::Approx(0.0));

  CHECK_THROWS_AS(delta_p(rg, {2, 0}, 0, shapley_b), InputError);  // p_i == m_i has no step
}

TEST_CASE("residual_at agrees with the residual grid on grid points") {
  MlpModel m({2, 2, 1}, {{0.8, -0.4, 0.3, 0.6}, {1.0, -1.0}}, {{0.1, -0.2}, {0.3}},
             MlpModel::Activation::Tanh);
  auto pair = unit_pair(2);
  auto rg = residual_grid(eval_cube(m, pair, uniform_grid({0, 1}, 4)));
  GridIndexer ix(rg.spec);
  std::vector<int> p(2);
  for (std::size_t i = 0; i < ix.size(); ++i) {
    ix.decode(i, p);
    const std::vector<double> t = {p[0] / 4.0, p[1] / 4.0};
    CHECK(residual_at(m, pair, {0, 1}, t) == doctest::Approx(rg.r[i]).epsilon(1e-10));
  }
}

TEST_CASE("oversized grids raise a capacity error") {
  LinearModel m(std::vector<double>(8, 1.0), 0.0);
  auto pair = unit_pair(8);
  auto build_and_eval = [&] {
    GridSpec spec = uniform_grid(pair.changed, 63);  // 64^8 states
    eval_cube(m, pair, spec);
  };
  CHECK_THROWS_AS(build_and_eval(), CapacityError);
}
