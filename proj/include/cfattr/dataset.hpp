#pragma once

#include <string>
#include <vector>

#include "cfattr/model.hpp"

namespace cfattr {

// Tabular data: header row names the features, one column holds labels.
struct Dataset {
  FeatureSpace space;
  std::vector<Instance> rows;
  std::vector<std::string> labels;

  std::size_t size() const { return rows.size(); }
};

Dataset load_dataset_csv(const std::string& path, const std::string& label_col);

// Per-feature sampling boxes for counterfactual generators.
struct FeatureRanges {
  std::vector<double> lo, hi;

  int dim() const { return int(lo.size()); }
  void validate() const;
};

FeatureRanges ranges_from_dataset(const Dataset& data);
FeatureRanges unit_ranges(int d);

}  // namespace cfattr
