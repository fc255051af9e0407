#pragma once

#include <string>

#include <json.hpp>

#include "cfattr/counterfactual.hpp"
#include "cfattr/explain.hpp"
#include "cfattr/limits.hpp"
#include "cfattr/montecarlo.hpp"

namespace cfattr {

// All numeric output goes through 12 significant digits so reruns diff
// cleanly and goldens stay stable.
std::string fmt12(double v);
double round12(double v);

std::string locals_csv(const AttributionReport& rep);
std::string pots_csv(const AttributionReport& rep);
nlohmann::json report_to_json(const AttributionReport& rep);
std::string render_table(const AttributionReport& rep);

std::string global_csv(const GlobalReport& g);
nlohmann::json global_to_json(const GlobalReport& g);
std::string render_global_table(const GlobalReport& g);

std::string mc_csv(const McEstimate& est, const std::vector<std::string>& names);
std::string convergence_csv(const ConvergenceCurve& curve, const std::vector<std::string>& names);
std::string saturation_csv(const SaturationResult& sat, const std::vector<std::string>& names);

std::string patch_csv(const PatchCurve& curve, const PatchBand& band);
nlohmann::json patch_to_json(const PatchCurve& curve, const PatchBand& band,
                             const std::vector<std::string>& names);

void write_text_file(const std::string& path, const std::string& content);
void write_json_file(const std::string& path, const nlohmann::json& j);

std::string join_pot(const std::vector<int>& pot, const std::vector<std::string>& names);

}  // namespace cfattr
