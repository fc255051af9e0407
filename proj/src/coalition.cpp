#include "cfattr/coalition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "cfattr/error.hpp"

namespace cfattr {

using nlohmann::json;

CounterfactualPair make_pair(FeatureSpace space, Instance x0, Instance x1,
                             double change_epsilon) {
  if (space.names.empty()) space = FeatureSpace::dense_default(int(x0.size()));
  if (x0.size() != x1.size() || int(x0.size()) != space.dim())
    throw InputError("pair endpoints must share the feature space dimension");
  for (double v : x0)
    if (!std::isfinite(v)) throw InputError("baseline has a non-finite coordinate");
  for (double v : x1)
    if (!std::isfinite(v)) throw InputError("counterfactual has a non-finite coordinate");
  CounterfactualPair p;
  p.space = std::move(space);
  p.x0 = std::move(x0);
  p.x1 = std::move(x1);
  p.change_epsilon = change_epsilon;
  p.delta.resize(p.x0.size());
  for (std::size_t i = 0; i < p.x0.size(); ++i) {
    p.delta[i] = p.x1[i] - p.x0[i];
    if (std::abs(p.delta[i]) > change_epsilon) p.changed.push_back(int(i));
  }
  return p;
}

CounterfactualPair load_pair(const Predictor& model, const std::string& path,
                             double change_epsilon) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open pair file: " + path);
  json spec;
  try {
    in >> spec;
    auto x0 = spec.at("x0").get<Instance>();
    auto x1 = spec.at("x1").get<Instance>();
    return make_pair(model.space(), std::move(x0), std::move(x1), change_epsilon);
  } catch (const json::exception& e) {
    throw ParseError("pair file " + path + ": " + e.what());
  }
}

void save_pair(const CounterfactualPair& pair, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write pair file: " + path);
  out << json{{"x0", pair.x0}, {"x1", pair.x1}}.dump(2) << '\n';
}

Instance mixed_input(const CounterfactualPair& pair, Mask s) {
  if (pair.k() < 32 && (s >> pair.k()) != 0)
    throw InputError("coalition mask outside the changed support");
  Instance x = pair.x0;
  const int kk = std::min(pair.k(), 32);
  for (int j = 0; j < kk; ++j)
    if (s & (Mask(1) << j)) x[pair.changed[j]] = pair.x1[pair.changed[j]];
  return x;
}

ValueTable coalition_values(const Predictor& model, const CounterfactualPair& pair, int cap,
                            int threads) {
  const int k = pair.k();
  if (k > cap)
    throw CapacityError("changed set has " + std::to_string(k) + " features, above the exhaustive cap " +
                        std::to_string(cap) + "; use the Monte-Carlo estimator");
  ValueTable vt;
  for (int j : pair.changed) vt.support.push_back(j);
  const std::size_t n = std::size_t(1) << k;
  std::vector<Instance> corners;
  corners.reserve(n);
  for (Mask s = 0; s < n; ++s) corners.push_back(mixed_input(pair, s));
  const std::vector<double> scores = predict_batch(model, corners, threads);
  vt.g0 = scores[0];
  vt.v.resize(n);
  vt.v[0] = 0.0;  // V(empty) is zero by definition, not by subtraction
  for (Mask s = 1; s < n; ++s) vt.v[s] = scores[s] - vt.g0;
  vt.dy = vt.v[n - 1];
  return vt;
}

DividendTable dividends(const ValueTable& vt) {
  DividendTable dt;
  dt.support = vt.support;
  dt.phi = vt.v;
  const int k = int(dt.support.size());
  const std::size_t n = std::size_t(1) << k;
  // phi[u] = sum_{T subseteq u} (-1)^{|u|-|T|} V(T), one axis pass per feature
  for (int b = 0; b < k; ++b) {
    const Mask bit = Mask(1) << b;
    for (Mask u = 0; u < n; ++u)
      if (u & bit) dt.phi[u] -= dt.phi[u ^ bit];
  }
  return dt;
}

double reconstruct(const DividendTable& dt, Mask s) {
  if (s >> dt.support.size()) throw InputError("coalition mask outside the support");
  double total = 0.0;
  Mask sub = s;
  while (true) {
    total += dt.phi[sub];
    if (sub == 0) break;
    sub = (sub - 1) & s;
  }
  return total;
}

}  // namespace cfattr
