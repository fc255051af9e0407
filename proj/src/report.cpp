#include "cfattr/report.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cfattr/error.hpp"

namespace cfattr {
namespace {

std::string feature_name(const std::vector<std::string>& names, int id) {
  if (id >= 0 && std::size_t(id) < names.size() && !names[id].empty()) return names[id];
  return "x" + std::to_string(id + 1);
}

double pct_of(double share, double dy) { return dy != 0.0 ? share / dy * 100.0 : 0.0; }

// Aligned text block from rows of cells; first row is the header.
std::string align_rows(const std::vector<std::vector<std::string>>& rows) {
  std::size_t cols = 0;
  for (const auto& r : rows) cols = std::max(cols, r.size());
  std::vector<std::size_t> width(cols, 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      out << r[c];
      if (c + 1 < r.size()) out << std::string(width[c] - r[c].size() + 2, ' ');
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace

std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double round12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

std::string join_pot(const std::vector<int>& pot, const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t a = 0; a < pot.size(); ++a) {
    if (a) out += "+";
    out += feature_name(names, pot[a]);
  }
  return out;
}

std::string locals_csv(const AttributionReport& rep) {
  std::ostringstream out;
  out << "feature";
  for (const std::string& r : rep.rules) out << "," << r << "," << r << "_pct";
  out << "\n";
  for (std::size_t row = 0; row < rep.features.size(); ++row) {
    out << feature_name(rep.feature_names, rep.features[row]);
    for (std::size_t r = 0; r < rep.rules.size(); ++r)
      out << "," << fmt12(rep.locals[r][row]) << "," << fmt12(pct_of(rep.locals[r][row], rep.dy));
    out << "\n";
  }
  out << "TOTAL";
  for (std::size_t r = 0; r < rep.rules.size(); ++r) {
    const double total = rep.local_total(r);
    out << "," << fmt12(total) << "," << fmt12(pct_of(total, rep.dy));
  }
  out << "\n";
  return out.str();
}

std::string pots_csv(const AttributionReport& rep) {
  std::ostringstream out;
  out << "pot,phi,rule,feature,share,diff_vs_equal\n";
  for (const PotTable& tbl : rep.pots) {
    const std::string pot = join_pot(tbl.pot, rep.feature_names);
    const double equal = tbl.phi / double(tbl.pot.size());
    for (std::size_t r = 0; r < tbl.rules.size(); ++r)
      for (std::size_t a = 0; a < tbl.pot.size(); ++a)
        out << pot << "," << fmt12(tbl.phi) << "," << tbl.rules[r] << ","
            << feature_name(rep.feature_names, tbl.pot[a]) << "," << fmt12(tbl.shares[r][a])
            << "," << fmt12(tbl.shares[r][a] - equal) << "\n";
  }
  return out.str();
}

nlohmann::json report_to_json(const AttributionReport& rep) {
  nlohmann::json j;
  j["g0"] = round12(rep.g0);
  j["dy"] = round12(rep.dy);
  j["m"] = rep.m_used;
  j["saturated_pick"] = rep.saturated_pick;
  j["mc_mode"] = rep.mc_mode;
  j["rules"] = rep.rules;
  j["order_cap_fallback"] = {{"mass", round12(rep.fallback_mass)}, {"pots", rep.capped_pots}};

  nlohmann::json locals = nlohmann::json::object();
  for (std::size_t r = 0; r < rep.rules.size(); ++r) {
    nlohmann::json col = nlohmann::json::object();
    for (std::size_t row = 0; row < rep.features.size(); ++row)
      col[feature_name(rep.feature_names, rep.features[row])] = round12(rep.locals[r][row]);
    locals[rep.rules[r]] = std::move(col);
  }
  j["locals"] = std::move(locals);

  nlohmann::json eff = nlohmann::json::object();
  for (std::size_t r = 0; r < rep.rules.size(); ++r)
    eff[rep.rules[r]] = round12(rep.efficiency_residual[r]);
  j["efficiency_residual"] = std::move(eff);

  nlohmann::json tau = nlohmann::json::object();
  for (std::size_t a = 0; a < rep.rules.size(); ++a) {
    nlohmann::json row = nlohmann::json::object();
    for (std::size_t b = 0; b < rep.rules.size(); ++b)
      row[rep.rules[b]] = round12(rep.kendall[a][b]);
    tau[rep.rules[a]] = std::move(row);
  }
  j["kendall"] = std::move(tau);

  nlohmann::json pots = nlohmann::json::array();
  for (const PotTable& tbl : rep.pots) {
    nlohmann::json p;
    p["pot"] = join_pot(tbl.pot, rep.feature_names);
    p["phi"] = round12(tbl.phi);
    nlohmann::json shares = nlohmann::json::object();
    for (std::size_t r = 0; r < tbl.rules.size(); ++r) {
      nlohmann::json col = nlohmann::json::object();
      for (std::size_t a = 0; a < tbl.pot.size(); ++a)
        col[feature_name(rep.feature_names, tbl.pot[a])] = round12(tbl.shares[r][a]);
      shares[tbl.rules[r]] = std::move(col);
    }
    p["shares"] = std::move(shares);
    pots.push_back(std::move(p));
  }
  j["pots"] = std::move(pots);
  return j;
}

std::string render_table(const AttributionReport& rep) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head = {"feature"};
  for (const std::string& r : rep.rules) head.push_back(r);
  for (const std::string& r : rep.rules) head.push_back(r + "_pct");
  rows.push_back(head);
  for (std::size_t row = 0; row < rep.features.size(); ++row) {
    std::vector<std::string> line = {feature_name(rep.feature_names, rep.features[row])};
    for (std::size_t r = 0; r < rep.rules.size(); ++r) line.push_back(fmt12(rep.locals[r][row]));
    for (std::size_t r = 0; r < rep.rules.size(); ++r)
      line.push_back(fmt12(pct_of(rep.locals[r][row], rep.dy)));
    rows.push_back(std::move(line));
  }
  std::vector<std::string> total = {"TOTAL"};
  for (std::size_t r = 0; r < rep.rules.size(); ++r) total.push_back(fmt12(rep.local_total(r)));
  for (std::size_t r = 0; r < rep.rules.size(); ++r)
    total.push_back(fmt12(pct_of(rep.local_total(r), rep.dy)));
  rows.push_back(std::move(total));

  std::ostringstream out;
  out << "dy = " << fmt12(rep.dy) << "  (g0 = " << fmt12(rep.g0) << ", m = " << rep.m_used
      << (rep.mc_mode ? ", monte-carlo" : "") << ")\n";
  out << align_rows(rows);

  if (!rep.pots.empty()) {
    out << "\nwithin-pot shares\n";
    std::vector<std::vector<std::string>> prow = {{"pot", "phi", "rule", "feature", "share"}};
    for (const PotTable& tbl : rep.pots)
      for (std::size_t r = 0; r < tbl.rules.size(); ++r)
        for (std::size_t a = 0; a < tbl.pot.size(); ++a)
          prow.push_back({join_pot(tbl.pot, rep.feature_names), fmt12(tbl.phi), tbl.rules[r],
                          feature_name(rep.feature_names, tbl.pot[a]),
                          fmt12(tbl.shares[r][a])});
    out << align_rows(prow);
  }
  return out.str();
}

std::string global_csv(const GlobalReport& g) {
  std::ostringstream out;
  out << "feature";
  for (const std::string& r : g.rules) out << "," << r;
  out << "\n";
  for (std::size_t row = 0; row < g.features.size(); ++row) {
    out << feature_name(g.feature_names, g.features[row]);
    for (std::size_t r = 0; r < g.rules.size(); ++r) out << "," << fmt12(g.averages[r][row]);
    out << "\n";
  }
  out << "TOTAL";
  for (std::size_t r = 0; r < g.rules.size(); ++r) {
    double total = 0.0;
    for (double v : g.averages[r]) total += v;
    out << "," << fmt12(total);
  }
  out << "\n";
  return out.str();
}

nlohmann::json global_to_json(const GlobalReport& g) {
  nlohmann::json j;
  j["pairs"] = g.pair_count;
  j["mean_changed"] = round12(g.mean_k);
  j["mean_dy"] = round12(g.mean_dy);
  j["rules"] = g.rules;
  nlohmann::json avg = nlohmann::json::object();
  for (std::size_t r = 0; r < g.rules.size(); ++r) {
    nlohmann::json col = nlohmann::json::object();
    for (std::size_t row = 0; row < g.features.size(); ++row)
      col[feature_name(g.feature_names, g.features[row])] = round12(g.averages[r][row]);
    avg[g.rules[r]] = std::move(col);
  }
  j["averages"] = std::move(avg);
  return j;
}

std::string render_global_table(const GlobalReport& g) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> head = {"feature"};
  for (const std::string& r : g.rules) head.push_back(r);
  rows.push_back(head);
  for (std::size_t row = 0; row < g.features.size(); ++row) {
    std::vector<std::string> line = {feature_name(g.feature_names, g.features[row])};
    for (std::size_t r = 0; r < g.rules.size(); ++r) line.push_back(fmt12(g.averages[r][row]));
    rows.push_back(std::move(line));
  }
  std::ostringstream out;
  out << "pairs = " << g.pair_count << ", mean dy = " << fmt12(g.mean_dy)
      << ", mean changed = " << fmt12(g.mean_k) << "\n";
  out << align_rows(rows);
  return out.str();
}

std::string mc_csv(const McEstimate& est, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "feature,estimate,stderr\n";
  for (std::size_t row = 0; row < est.features.size(); ++row)
    out << feature_name(names, est.features[row]) << "," << fmt12(est.estimate[row]) << ","
        << fmt12(est.std_error[row]) << "\n";
  return out.str();
}

std::string convergence_csv(const ConvergenceCurve& curve,
                            const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "m,feature,share,gap\n";
  for (std::size_t j = 0; j < curve.ms.size(); ++j)
    for (std::size_t a = 0; a < curve.pot.size(); ++a)
      out << curve.ms[j] << "," << feature_name(names, curve.pot[a]) << ","
          << fmt12(curve.shares[j][a]) << "," << fmt12(curve.gaps[j][a]) << "\n";
  return out.str();
}

std::string saturation_csv(const SaturationResult& sat, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "m,feature,share\n";
  for (std::size_t j = 0; j < sat.ms.size(); ++j)
    for (std::size_t f = 0; f < sat.features.size(); ++f)
      out << sat.ms[j] << "," << feature_name(names, sat.features[f]) << ","
          << fmt12(sat.shares[j][f]) << "\n";
  return out.str();
}

std::string patch_csv(const PatchCurve& curve, const PatchBand& band) {
  std::ostringstream out;
  out << "k,score,random_mean,random_p10,random_p90\n";
  for (std::size_t K = 0; K < curve.scores.size(); ++K)
    out << K << "," << fmt12(curve.scores[K]) << "," << fmt12(band.mean[K]) << ","
        << fmt12(band.p10[K]) << "," << fmt12(band.p90[K]) << "\n";
  return out.str();
}

nlohmann::json patch_to_json(const PatchCurve& curve, const PatchBand& band,
                             const std::vector<std::string>& names) {
  nlohmann::json j;
  nlohmann::json ranking = nlohmann::json::array();
  for (int i : curve.ranking) ranking.push_back(feature_name(names, i));
  j["ranking"] = std::move(ranking);
  nlohmann::json scores = nlohmann::json::array();
  for (double v : curve.scores) scores.push_back(round12(v));
  j["scores"] = std::move(scores);
  j["k_at_0.5"] = curve.k_at_half;
  j["k_at_0.9"] = curve.k_at_09;
  nlohmann::json rmean = nlohmann::json::array(), rp10 = nlohmann::json::array(),
                 rp90 = nlohmann::json::array();
  for (std::size_t K = 0; K < band.mean.size(); ++K) {
    rmean.push_back(round12(band.mean[K]));
    rp10.push_back(round12(band.p10[K]));
    rp90.push_back(round12(band.p90[K]));
  }
  j["random_mean"] = std::move(rmean);
  j["random_p10"] = std::move(rp10);
  j["random_p90"] = std::move(rp90);
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw InputError("failed writing " + path);
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace cfattr
