#include "cfattr/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "cfattr/error.hpp"
#include "cfattr/parallel.hpp"

namespace cfattr {

namespace fs = std::filesystem;
using nlohmann::json;

FeatureSpace FeatureSpace::dense_default(int d) {
  FeatureSpace s;
  s.names.reserve(d);
  s.kinds.assign(d, FeatureKind::Continuous);
  for (int i = 0; i < d; ++i) s.names.push_back("X" + std::to_string(i + 1));
  return s;
}

void FeatureSpace::validate() const {
  if (dim() < 2) throw InputError("feature space needs at least 2 features");
  if (kinds.size() != names.size()) throw InputError("feature kind list length mismatch");
  std::set<std::string> seen(names.begin(), names.end());
  if (int(seen.size()) != dim()) throw InputError("feature names must be unique");
}

namespace {

void check_dim(const Predictor& m, const Instance& x) {
  if (int(x.size()) != m.dim())
    throw InputError("instance has " + std::to_string(x.size()) + " values, model expects " +
                     std::to_string(m.dim()));
}

double require_finite(double y) {
  if (!std::isfinite(y)) throw EvalError("model produced a non-finite score");
  return y;
}

FeatureSpace space_or_default(FeatureSpace s, int d) {
  if (s.names.empty()) return FeatureSpace::dense_default(d);
  if (s.dim() != d) throw InputError("feature space size does not match model dimension");
  return s;
}

json space_to_json(const FeatureSpace& s) {
  json arr = json::array();
  for (int i = 0; i < s.dim(); ++i) {
    arr.push_back({{"name", s.names[i]},
                   {"kind", s.kinds[i] == FeatureKind::Continuous ? "continuous" : "categorical"}});
  }
  return arr;
}

FeatureSpace space_from_json(const json& spec, int d) {
  if (!spec.contains("features")) return FeatureSpace::dense_default(d);
  const json& arr = spec.at("features");
  if (!arr.is_array() || int(arr.size()) != d)
    throw ParseError("'features' must be an array of length " + std::to_string(d));
  FeatureSpace s;
  for (const auto& f : arr) {
    s.names.push_back(f.at("name").get<std::string>());
    const std::string kind = f.value("kind", "continuous");
    if (kind == "continuous")
      s.kinds.push_back(FeatureKind::Continuous);
    else if (kind == "categorical" || kind == "categorical-binary")
      s.kinds.push_back(FeatureKind::CategoricalBinary);
    else
      throw ParseError("unknown feature kind '" + kind + "'");
  }
  return s;
}

}  // namespace

std::vector<double> Predictor::predict_batch(const std::vector<Instance>& xs) const {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = predict(xs[i]);
  return out;
}

std::vector<double> predict_batch(const Predictor& model, const std::vector<Instance>& xs,
                                  int threads) {
  if (xs.empty()) throw InputError("predict_batch: empty batch");
  for (const auto& x : xs) check_dim(model, x);
  if (!model.parallel_safe() || threads <= 1) return model.predict_batch(xs);
  std::vector<double> out(xs.size());
  parallel_for(xs.size(), threads, [&](std::size_t i) { out[i] = model.predict(xs[i]); });
  return out;
}

// ---------------------------------------------------------------------------
// Linear

LinearModel::LinearModel(std::vector<double> weights, double bias, FeatureSpace space)
    : weights_(std::move(weights)), bias_(bias) {
  space_ = space_or_default(std::move(space), int(weights_.size()));
}

double LinearModel::predict(const Instance& x) const {
  check_dim(*this, x);
  double y = bias_;
  for (std::size_t i = 0; i < weights_.size(); ++i) y += weights_[i] * x[i];
  return require_finite(y);
}

json LinearModel::to_json() const {
  return {{"type", "linear"},
          {"weights", weights_},
          {"bias", bias_},
          {"features", space_to_json(space_)}};
}

// ---------------------------------------------------------------------------
// Multilinear

MultilinearModel::MultilinearModel(int d, std::vector<Term> terms, FeatureSpace space)
    : d_(d), terms_(std::move(terms)) {
  space_ = space_or_default(std::move(space), d_);
  for (auto& t : terms_) {
    std::sort(t.coalition.begin(), t.coalition.end());
    for (int i : t.coalition)
      if (i < 0 || i >= d_) throw InputError("multilinear coalition member out of range");
    if (std::adjacent_find(t.coalition.begin(), t.coalition.end()) != t.coalition.end())
      throw InputError("multilinear coalition has repeated members");
  }
}

double MultilinearModel::predict(const Instance& x) const {
  check_dim(*this, x);
  double y = 0.0;
  for (const auto& t : terms_) {
    double prod = t.coef;
    for (int i : t.coalition) prod *= x[i];
    y += prod;
  }
  return require_finite(y);
}

json MultilinearModel::to_json() const {
  json terms = json::array();
  for (const auto& t : terms_) {
    json coal = json::array();
    for (int i : t.coalition) coal.push_back(i + 1);  // 1-based on disk
    terms.push_back({{"coalition", coal}, {"coef", t.coef}});
  }
  return {{"type", "multilinear"}, {"d", d_}, {"terms", terms}, {"features", space_to_json(space_)}};
}

// ---------------------------------------------------------------------------
// Threshold

ThresholdModel::ThresholdModel(int d, std::vector<Tree> trees, FeatureSpace space)
    : d_(d), trees_(std::move(trees)) {
  space_ = space_or_default(std::move(space), d_);
  for (const auto& tr : trees_) {
    if (tr.nodes.empty()) throw InputError("threshold tree has no nodes");
    for (const auto& n : tr.nodes) {
      if (n.leaf) continue;
      if (n.feature < 0 || n.feature >= d_) throw InputError("threshold split feature out of range");
      if (n.left < 0 || n.left >= int(tr.nodes.size()) || n.right < 0 ||
          n.right >= int(tr.nodes.size()))
        throw InputError("threshold tree child index out of range");
    }
  }
}

double ThresholdModel::predict(const Instance& x) const {
  check_dim(*this, x);
  double y = 0.0;
  for (const auto& tr : trees_) {
    int at = 0;
    while (!tr.nodes[at].leaf) {
      const Node& n = tr.nodes[at];
      at = x[n.feature] < n.cut ? n.left : n.right;
    }
    y += tr.nodes[at].value;
  }
  return require_finite(y);
}

namespace {

json tree_node_to_json(const ThresholdModel::Tree& tr, int at) {
  const auto& n = tr.nodes[at];
  if (n.leaf) return n.value;
  return {{"feature", n.feature + 1},
          {"cut", n.cut},
          {"left", tree_node_to_json(tr, n.left)},
          {"right", tree_node_to_json(tr, n.right)}};
}

int tree_node_from_json(const json& spec, ThresholdModel::Tree& tr) {
  ThresholdModel::Node n;
  const int at = int(tr.nodes.size());
  tr.nodes.push_back(n);
  if (spec.is_number()) {
    tr.nodes[at].leaf = true;
    tr.nodes[at].value = spec.get<double>();
    return at;
  }
  if (!spec.is_object() || !spec.contains("feature") || !spec.contains("cut"))
    throw ParseError("threshold node must be a number or {feature,cut,left,right}");
  tr.nodes[at].leaf = false;
  tr.nodes[at].feature = spec.at("feature").get<int>() - 1;
  tr.nodes[at].cut = spec.at("cut").get<double>();
  const int l = tree_node_from_json(spec.at("left"), tr);
  const int r = tree_node_from_json(spec.at("right"), tr);
  tr.nodes[at].left = l;
  tr.nodes[at].right = r;
  return at;
}

}  // namespace

json ThresholdModel::to_json() const {
  json trees = json::array();
  for (const auto& tr : trees_) trees.push_back(tree_node_to_json(tr, 0));
  return {{"type", "threshold"}, {"d", d_}, {"trees", trees}, {"features", space_to_json(space_)}};
}

// ---------------------------------------------------------------------------
// Mlp

MlpModel::MlpModel(std::vector<int> widths, std::vector<std::vector<double>> weights,
                   std::vector<std::vector<double>> biases, Activation act, FeatureSpace space)
    : widths_(std::move(widths)), weights_(std::move(weights)), biases_(std::move(biases)),
      act_(act) {
  if (widths_.size() < 2) throw InputError("mlp needs at least input and output widths");
  if (widths_.back() != 1) throw InputError("mlp output width must be 1");
  const std::size_t layers = widths_.size() - 1;
  if (weights_.size() != layers || biases_.size() != layers)
    throw InputError("mlp weight/bias layer count mismatch");
  for (std::size_t l = 0; l < layers; ++l) {
    if (int(weights_[l].size()) != widths_[l + 1] * widths_[l])
      throw InputError("mlp weight matrix shape mismatch at layer " + std::to_string(l));
    if (int(biases_[l].size()) != widths_[l + 1])
      throw InputError("mlp bias shape mismatch at layer " + std::to_string(l));
  }
  space_ = space_or_default(std::move(space), widths_.front());
}

double MlpModel::predict(const Instance& x) const {
  check_dim(*this, x);
  std::vector<double> h(x.begin(), x.end()), next;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const int rows = widths_[l + 1], cols = widths_[l];
    next.assign(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      double acc = biases_[l][r];
      const double* w = weights_[l].data() + std::size_t(r) * cols;
      for (int c = 0; c < cols; ++c) acc += w[c] * h[c];
      next[r] = acc;
    }
    const bool output_layer = (l + 2 == widths_.size());
    if (!output_layer) {
      for (double& v : next)
        v = act_ == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
    }
    h.swap(next);
  }
  return require_finite(h[0]);
}

json MlpModel::to_json() const {
  json ws = json::array();
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    json mat = json::array();
    const int rows = widths_[l + 1], cols = widths_[l];
    for (int r = 0; r < rows; ++r) {
      json row = json::array();
      for (int c = 0; c < cols; ++c) row.push_back(weights_[l][std::size_t(r) * cols + c]);
      mat.push_back(row);
    }
    ws.push_back(mat);
  }
  return {{"type", "mlp"},
          {"widths", widths_},
          {"weights", ws},
          {"biases", biases_},
          {"activation", act_ == Activation::Tanh ? "tanh" : "relu"},
          {"features", space_to_json(space_)}};
}

// ---------------------------------------------------------------------------
// External

ExternalModel::ExternalModel(int d, std::string command, int batch_limit, FeatureSpace space)
    : d_(d), command_(std::move(command)), batch_limit_(batch_limit) {
  if (batch_limit_ < 1) throw InputError("external batch limit must be >= 1");
  if (command_.empty()) throw InputError("external command must be nonempty");
  space_ = space_or_default(std::move(space), d_);
}

double ExternalModel::predict(const Instance& x) const { return predict_batch({x})[0]; }

namespace {

std::string substitute(std::string cmd, const std::string& key, const std::string& value) {
  std::size_t at;
  while ((at = cmd.find(key)) != std::string::npos) cmd.replace(at, key.size(), value);
  return cmd;
}

}  // namespace

std::vector<double> ExternalModel::run_chunk(const std::vector<Instance>& xs, std::size_t lo,
                                             std::size_t hi) const {
  static std::uint64_t counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("cfattr_ext_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::create_directories(dir);
  const fs::path req = dir / "request.csv";
  const fs::path resp = dir / "response.csv";
  {
    std::ofstream out(req);
    out.precision(17);
    for (std::size_t r = lo; r < hi; ++r) {
      for (std::size_t c = 0; c < xs[r].size(); ++c) {
        if (c) out << ',';
        out << xs[r][c];
      }
      out << '\n';
    }
  }
  std::string cmd = command_;
  if (cmd.find("{request}") == std::string::npos) cmd += " {request} {response}";
  cmd = substitute(cmd, "{request}", req.string());
  cmd = substitute(cmd, "{response}", resp.string());
  const int rc = std::system(cmd.c_str());
  if (rc != 0) {
    fs::remove_all(dir);
    throw ProtocolError("external predictor command failed with status " + std::to_string(rc));
  }
  std::vector<double> scores;
  {
    std::ifstream in(resp);
    if (!in) {
      fs::remove_all(dir);
      throw ProtocolError("external predictor wrote no response file");
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      scores.push_back(std::strtod(line.c_str(), nullptr));
    }
  }
  fs::remove_all(dir);
  if (scores.size() != hi - lo)
    throw ProtocolError("external predictor returned " + std::to_string(scores.size()) +
                        " scores for " + std::to_string(hi - lo) + " rows");
  for (double s : scores) require_finite(s);
  return scores;
}

std::vector<double> ExternalModel::predict_batch(const std::vector<Instance>& xs) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<double> out;
  out.reserve(xs.size());
  for (std::size_t lo = 0; lo < xs.size(); lo += std::size_t(batch_limit_)) {
    const std::size_t hi = std::min(xs.size(), lo + std::size_t(batch_limit_));
    auto chunk = run_chunk(xs, lo, hi);
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  return out;
}

json ExternalModel::to_json() const {
  return {{"type", "external"},
          {"d", d_},
          {"command", command_},
          {"batch_limit", batch_limit_},
          {"features", space_to_json(space_)}};
}

// ---------------------------------------------------------------------------
// Loading

std::unique_ptr<Predictor> model_from_json(const json& spec) {
  if (!spec.is_object() || !spec.contains("type"))
    throw ParseError("model spec must be an object with a 'type' field");
  const std::string type = spec.at("type").get<std::string>();
  try {
    if (type == "linear") {
      auto weights = spec.at("weights").get<std::vector<double>>();
      return std::make_unique<LinearModel>(weights, spec.value("bias", 0.0),
                                           space_from_json(spec, int(weights.size())));
    }
    if (type == "multilinear") {
      const int d = spec.at("d").get<int>();
      std::vector<MultilinearModel::Term> terms;
      for (const auto& t : spec.at("terms")) {
        MultilinearModel::Term term;
        for (int i : t.at("coalition").get<std::vector<int>>()) {
          if (i < 1 || i > d)
            throw ParseError("multilinear coalition index " + std::to_string(i) +
                             " outside 1.." + std::to_string(d));
          term.coalition.push_back(i - 1);
        }
        term.coef = t.at("coef").get<double>();
        terms.push_back(std::move(term));
      }
      return std::make_unique<MultilinearModel>(d, std::move(terms), space_from_json(spec, d));
    }
    if (type == "threshold") {
      const int d = spec.at("d").get<int>();
      std::vector<ThresholdModel::Tree> trees;
      for (const auto& t : spec.at("trees")) {
        ThresholdModel::Tree tr;
        tree_node_from_json(t, tr);
        trees.push_back(std::move(tr));
      }
      return std::make_unique<ThresholdModel>(d, std::move(trees), space_from_json(spec, d));
    }
    if (type == "mlp") {
      auto widths = spec.at("widths").get<std::vector<int>>();
      std::vector<std::vector<double>> weights, biases;
      for (const auto& mat : spec.at("weights")) {
        std::vector<double> flat;
        for (const auto& row : mat)
          for (const auto& v : row) flat.push_back(v.get<double>());
        weights.push_back(std::move(flat));
      }
      for (const auto& b : spec.at("biases")) biases.push_back(b.get<std::vector<double>>());
      const std::string act = spec.value("activation", "tanh");
      if (act != "tanh" && act != "relu") throw ParseError("mlp activation must be tanh or relu");
      return std::make_unique<MlpModel>(
          std::move(widths), std::move(weights), std::move(biases),
          act == "tanh" ? MlpModel::Activation::Tanh : MlpModel::Activation::Relu,
          space_from_json(spec, spec.at("widths").front().get<int>()));
    }
    if (type == "external") {
      const int d = spec.at("d").get<int>();
      return std::make_unique<ExternalModel>(d, spec.at("command").get<std::string>(),
                                             spec.value("batch_limit", 1024),
                                             space_from_json(spec, d));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed '") + type + "' model spec: " + e.what());
  } catch (const InputError& e) {
    throw ParseError(std::string("invalid '") + type + "' model spec: " + e.what());
  }
  throw ParseError("unknown model type '" + type + "'");
}

std::unique_ptr<Predictor> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  json spec;
  try {
    in >> spec;
  } catch (const json::exception& e) {
    throw ParseError("model file " + path + ": " + e.what());
  }
  return model_from_json(spec);
}

void save_model(const Predictor& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file: " + path);
  out << model.to_json().dump(2) << '\n';
}

}  // namespace cfattr
