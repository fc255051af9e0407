#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfattr {

enum class FeatureKind { Continuous, CategoricalBinary };

struct FeatureSpace {
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;

  int dim() const { return int(names.size()); }
  static FeatureSpace dense_default(int d);  // x1..xd, all continuous
  void validate() const;                     // d >= 2, unique names
};

// A feature vector. Categorical-binary coordinates take {0,1} at endpoints.
using Instance = std::vector<double>;

// Immutable scoring function. predict/predict_batch are safe to call from
// multiple threads; the external-process predictor serializes its own calls.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual int dim() const = 0;
  virtual double predict(const Instance& x) const = 0;
  // Element i equals predict(xs[i]); order preserved.
  virtual std::vector<double> predict_batch(const std::vector<Instance>& xs) const;
  // False for predictors whose calls must be serialized (external process).
  virtual bool parallel_safe() const { return true; }
  // False for piecewise-constant or otherwise non-differentiable scorers;
  // diagonal-limit checks are skipped for those.
  virtual bool smooth() const { return true; }
  virtual nlohmann::json to_json() const = 0;

  const FeatureSpace& space() const { return space_; }

 protected:
  FeatureSpace space_;
};

// Batches a prediction across `threads` workers when the predictor allows it.
std::vector<double> predict_batch(const Predictor& model, const std::vector<Instance>& xs,
                                  int threads = 1);

class LinearModel : public Predictor {
 public:
  LinearModel(std::vector<double> weights, double bias, FeatureSpace space = {});
  int dim() const override { return int(weights_.size()); }
  double predict(const Instance& x) const override;
  nlohmann::json to_json() const override;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  std::vector<double> weights_;
  double bias_;
};

// Sum of coefficient * prod_{i in coalition} x_i. On 0/1 inputs the value is
// the sum of coefficients over coalitions contained in the active set, so the
// coalition dividends of a 0->1 transition are the coefficients themselves.
class MultilinearModel : public Predictor {
 public:
  struct Term {
    std::vector<int> coalition;  // 0-based, strictly ascending; empty = constant
    double coef;
  };
  MultilinearModel(int d, std::vector<Term> terms, FeatureSpace space = {});
  int dim() const override { return d_; }
  double predict(const Instance& x) const override;
  nlohmann::json to_json() const override;
  const std::vector<Term>& terms() const { return terms_; }

 private:
  int d_;
  std::vector<Term> terms_;
};

// Additive ensemble of axis-aligned decision stumps/trees: x[feature] < cut
// goes left, otherwise right.
class ThresholdModel : public Predictor {
 public:
  struct Node {
    bool leaf = true;
    double value = 0.0;  // leaf payload
    int feature = -1;    // split payload (0-based)
    double cut = 0.0;
    int left = -1, right = -1;  // indices into the tree's node pool
  };
  struct Tree {
    std::vector<Node> nodes;  // nodes[0] is the root
  };
  ThresholdModel(int d, std::vector<Tree> trees, FeatureSpace space = {});
  int dim() const override { return d_; }
  double predict(const Instance& x) const override;
  bool smooth() const override { return false; }
  nlohmann::json to_json() const override;

 private:
  int d_;
  std::vector<Tree> trees_;
};

// Dense feed-forward network, tanh or relu hidden activations, identity
// output. Weight matrix l is widths[l+1] x widths[l], row-major.
class MlpModel : public Predictor {
 public:
  enum class Activation { Tanh, Relu };
  MlpModel(std::vector<int> widths, std::vector<std::vector<double>> weights,
           std::vector<std::vector<double>> biases, Activation act, FeatureSpace space = {});
  int dim() const override { return widths_.front(); }
  double predict(const Instance& x) const override;
  nlohmann::json to_json() const override;

 private:
  std::vector<int> widths_;
  std::vector<std::vector<double>> weights_;
  std::vector<std::vector<double>> biases_;
  Activation act_;
};

// File-based external predictor: writes a headerless CSV of query rows,
// invokes `command` with {request}/{response} substituted, reads one score per
// line back. Round-trips of k rows must return exactly k scores in order.
class ExternalModel : public Predictor {
 public:
  ExternalModel(int d, std::string command, int batch_limit, FeatureSpace space = {});
  int dim() const override { return d_; }
  double predict(const Instance& x) const override;
  std::vector<double> predict_batch(const std::vector<Instance>& xs) const override;
  bool parallel_safe() const override { return false; }
  bool smooth() const override { return false; }
  nlohmann::json to_json() const override;

 private:
  std::vector<double> run_chunk(const std::vector<Instance>& xs, std::size_t lo,
                                std::size_t hi) const;
  int d_;
  std::string command_;
  int batch_limit_;
  mutable std::mutex mu_;  // invocations serialized per handle
};

std::unique_ptr<Predictor> model_from_json(const nlohmann::json& spec);
std::unique_ptr<Predictor> load_model(const std::string& path);
void save_model(const Predictor& model, const std::string& path);

}  // namespace cfattr
