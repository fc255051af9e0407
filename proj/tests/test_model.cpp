#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <memory>

#include <json.hpp>

#include "cfattr/error.hpp"
#include "cfattr/model.hpp"

using namespace cfattr;

namespace {

std::string temp_file(const char* name) {
  return std::string("cfattr_test_") + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("linear predict is the dot product plus bias") {
  LinearModel m({1.0, 2.0}, 0.0);
  CHECK(m.predict({1.0, 1.0}) == 3.0);
  CHECK(m.predict({0.0, 0.0}) == 0.0);
  LinearModel biased({1.0, 2.0}, -0.5);
  CHECK(biased.predict({1.0, 1.0}) == doctest::Approx(2.5));
}

TEST_CASE("multilinear product term") {
  MultilinearModel m(2, {{{0, 1}, 1.0}});
  CHECK(m.predict({1.0, 1.0}) == 1.0);
  CHECK(m.predict({1.0, 0.0}) == 0.0);
  CHECK(m.predict({0.5, 0.5}) == doctest::Approx(0.25));
}

TEST_CASE("mlp identity single layer is affine") {
  // tanh network with no hidden layer: widths {1,1} is output = W x + b
  MlpModel m({1, 1}, {{2.0}}, {{0.5}}, MlpModel::Activation::Tanh);
  CHECK(m.predict({1.0}) == doctest::Approx(2.5));
}

TEST_CASE("threshold stump routes by the cut") {
  ThresholdModel::Tree tr;
  tr.nodes.resize(3);
  tr.nodes[0] = {false, 0.0, 0, 0.5, 1, 2};
  tr.nodes[1] = {true, -1.0, -1, 0.0, -1, -1};
  tr.nodes[2] = {true, 1.0, -1, 0.0, -1, -1};
  ThresholdModel m(2, {tr});
  CHECK(m.predict({0.0, 9.0}) == -1.0);
  CHECK(m.predict({0.5, 9.0}) == 1.0);  // >= cut goes right
  CHECK(m.predict({1.0, 9.0}) == 1.0);
  CHECK_FALSE(m.smooth());
}

TEST_CASE("batch prediction preserves order and equals predict") {
  LinearModel m({1.0, 0.0}, 0.0);
  auto out = predict_batch(m, {{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}});
  REQUIRE(out.size() == 3);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 1.0);
  CHECK(out[2] == 2.0);

  CHECK_THROWS_AS(predict_batch(m, {}), InputError);

  auto one = predict_batch(m, {{3.0, 4.0}});
  CHECK(one.size() == 1);
  CHECK(one[0] == m.predict({3.0, 4.0}));
}

TEST_CASE("batch with threads matches serial batch") {
  MultilinearModel m(3, {{{0}, 1.0}, {{0, 1}, 2.0}, {{0, 1, 2}, -1.0}});
  std::vector<Instance> xs;
  for (int i = 0; i < 37; ++i)
    xs.push_back({0.1 * i, 0.05 * i - 1.0, 2.0 - 0.07 * i});
  auto serial = predict_batch(m, xs, 1);
  auto parallel = predict_batch(m, xs, 4);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == parallel[i]);
}

TEST_CASE("model json round trip") {
  auto check_roundtrip = [](const Predictor& m, const Instance& probe) {
    auto clone = model_from_json(m.to_json());
    CHECK(clone->dim() == m.dim());
    CHECK(clone->predict(probe) == doctest::Approx(m.predict(probe)).epsilon(1e-15));
  };
  check_roundtrip(LinearModel({0.5, -2.0, 1.0}, 3.0), {1.0, 2.0, 3.0});
  check_roundtrip(MultilinearModel(2, {{{0, 1}, 1.5}, {{}, 0.25}}), {0.7, -0.3});
  MlpModel mlp({2, 3, 1}, {{0.1, 0.2, -0.3, 0.4, 0.5, -0.6}, {1.0, -1.0, 0.5}},
               {{0.1, -0.1, 0.2}, {0.0}}, MlpModel::Activation::Tanh);
  check_roundtrip(mlp, {0.3, -0.8});
}

TEST_CASE("load_model from a linear spec file") {
  const std::string path = temp_file("linear.json");
  write_file(path, R"({"type":"linear","weights":[1.0,2.0],"bias":0.0})");
  auto m = load_model(path);
  CHECK(m->dim() == 2);
  CHECK(m->predict({1.0, 1.0}) == doctest::Approx(3.0));
  CHECK(m->space().names[0] == "X1");
  std::remove(path.c_str());
}

TEST_CASE("load_model rejects malformed specs") {
  const std::string bad_shape = temp_file("bad_shape.json");
  // weights-shape mismatch inside an mlp layer
  write_file(bad_shape,
             R"({"type":"mlp","widths":[2,1],"weights":[[1.0]],"biases":[[0.0]],"act":"tanh"})");
  CHECK_THROWS_AS(load_model(bad_shape), ParseError);
  std::remove(bad_shape.c_str());

  const std::string bad_coal = temp_file("bad_coal.json");
  // coalition {1,3} on a 2-feature model
  write_file(bad_coal,
             R"({"type":"multilinear","d":2,"terms":[{"coalition":[1,3],"coef":1.0}]})");
  CHECK_THROWS_AS(load_model(bad_coal), ParseError);
  std::remove(bad_coal.c_str());

  CHECK_THROWS_AS(load_model("definitely_missing_file.json"), ParseError);
}

TEST_CASE("external model round trips through a process") {
  // doubles the first column, ignores the second
  const std::string script = temp_file("double.py");
  write_file(script,
             "import sys\n"
             "rows = [line.split(',') for line in open(sys.argv[1]) if line.strip()]\n"
             "open(sys.argv[2], 'w').write(''.join(str(2 * float(r[0])) + '\\n' for r in rows))\n");
  ExternalModel m(2, "python3 " + script + " {request} {response}", 8);
  CHECK(m.predict({3.0, 1.0}) == doctest::Approx(6.0));
  auto batch = predict_batch(m, {{1.0, 0.0}, {2.0, 0.0}, {-4.0, 0.0}});
  CHECK(batch[0] == doctest::Approx(2.0));
  CHECK(batch[1] == doctest::Approx(4.0));
  CHECK(batch[2] == doctest::Approx(-8.0));
  CHECK_FALSE(m.parallel_safe());
  CHECK_FALSE(m.smooth());
  std::remove(script.c_str());
}

TEST_CASE("external model surfaces a count mismatch") {
  const std::string script = temp_file("short.py");
  write_file(script,
             "import sys\n"
             "open(sys.argv[2], 'w').write('1.0\\n')\n");
  ExternalModel m(2, "python3 " + script + " {request} {response}", 8);
  CHECK_THROWS_AS(predict_batch(m, {{1.0, 0.0}, {2.0, 0.0}}), ProtocolError);
  std::remove(script.c_str());
}
