#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfattr/bench.hpp"
#include "cfattr/coalition.hpp"
#include "cfattr/counterfactual.hpp"
#include "cfattr/dataset.hpp"
#include "cfattr/error.hpp"
#include "cfattr/explain.hpp"
#include "cfattr/limits.hpp"
#include "cfattr/microgame.hpp"
#include "cfattr/model.hpp"
#include "cfattr/montecarlo.hpp"
#include "cfattr/parallel.hpp"
#include "cfattr/report.hpp"

namespace fs = std::filesystem;
using namespace cfattr;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  for (const std::string& item : split_list(s)) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw InputError(std::string("bad ") + what + " entry: " + item);
    }
  }
  if (out.empty()) throw InputError(std::string("empty ") + what + " list");
  return out;
}

std::vector<ReportRule> parse_rules(const std::string& s) {
  std::vector<ReportRule> rules;
  for (const std::string& name : split_list(s)) rules.push_back(report_rule_from_name(name));
  if (rules.empty()) throw InputError("no attribution rules selected");
  return rules;
}

Instance load_instance(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad instance JSON: ") + e.what());
  }
  if (!j.is_array()) throw ParseError("instance file must hold a JSON array");
  Instance x;
  for (const auto& v : j) {
    if (!v.is_number()) throw ParseError("instance entries must be numbers");
    x.push_back(v.get<double>());
  }
  if (int(x.size()) != dim)
    throw InputError("instance has " + std::to_string(x.size()) + " coordinates, model expects " +
                     std::to_string(dim));
  return x;
}

std::vector<CounterfactualPair> load_pair_array(const Predictor& model, const std::string& path,
                                                double epsilon) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad pair list JSON: ") + e.what());
  }
  if (!j.is_array()) throw ParseError("pair list must be a JSON array of {x0,x1} objects");
  std::vector<CounterfactualPair> pairs;
  for (const auto& entry : j) {
    Instance x0, x1;
    if (!entry.contains("x0") || !entry.contains("x1"))
      throw ParseError("pair entries need x0 and x1");
    for (const auto& v : entry.at("x0")) x0.push_back(v.get<double>());
    for (const auto& v : entry.at("x1")) x1.push_back(v.get<double>());
    if (int(x0.size()) != model.dim() || int(x1.size()) != model.dim())
      throw InputError("pair dimensions do not match the model");
    pairs.push_back(make_pair(model.space(), std::move(x0), std::move(x1), epsilon));
  }
  if (pairs.empty()) throw InputError("pair list is empty");
  return pairs;
}

void ensure_out(const std::string& out) {
  if (out.empty()) return;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw InputError("cannot create output directory " + out);
}

std::string out_path(const std::string& out, const char* name) {
  return (fs::path(out) / name).string();
}

struct CommonOpts {
  std::string model_path, pair_path, out;
  std::string rules = "equal_split,micro_shapley,equal_surplus";
  std::string format = "table";
  int m = 5;
  bool saturate = false;
  int order_cap = 0;
  bool mc = false;
  std::uint64_t perms = 1000;
  std::uint64_t seed = 0;
  double epsilon = 1e-12;
  int threads = 0;  // 0 = hardware
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_pair) {
  cmd->add_option("--model", o.model_path, "model JSON")->required();
  if (needs_pair) cmd->add_option("--pair", o.pair_path, "pair JSON {x0,x1}")->required();
  cmd->add_option("--m", o.m, "uniform grid resolution");
  cmd->add_flag("--saturate", o.saturate, "pick m by the saturation rule");
  cmd->add_option("--rules", o.rules, "comma list: equal_split,micro_shapley,solidarity,"
                                      "equal_surplus,es_macro (aliases: equal,shapley,es)");
  cmd->add_option("--order-cap", o.order_cap, "max pot order given a grid (0 = all)");
  cmd->add_flag("--mc", o.mc, "Monte-Carlo mode for large changed sets");
  cmd->add_option("--perms", o.perms, "Monte-Carlo permutations");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--epsilon", o.epsilon, "changed-set threshold on |x1-x0|");
  cmd->add_option("--out", o.out, "output directory for report files");
  cmd->add_option("--format", o.format, "stdout rendering: csv, json, table")
      ->check(CLI::IsMember({"csv", "json", "table"}));
  cmd->add_option("--threads", o.threads, "worker threads (0 = hardware)");
}

ExplainConfig to_config(const CommonOpts& o) {
  ExplainConfig cfg;
  cfg.m = o.m;
  cfg.saturate = o.saturate;
  cfg.rules = parse_rules(o.rules);
  cfg.order_cap = o.order_cap;
  cfg.use_mc = o.mc;
  cfg.mc.perms = o.perms;
  cfg.mc.seed = o.seed;
  cfg.threads = o.threads > 0 ? o.threads : hardware_threads();
  cfg.mc.threads = cfg.threads;
  return cfg;
}

void emit_local(const AttributionReport& rep, const CommonOpts& o) {
  if (!o.out.empty()) {
    ensure_out(o.out);
    write_text_file(out_path(o.out, "locals.csv"), locals_csv(rep));
    write_text_file(out_path(o.out, "pots.csv"), pots_csv(rep));
    write_json_file(out_path(o.out, "report.json"), report_to_json(rep));
  }
  if (o.format == "csv")
    std::cout << locals_csv(rep);
  else if (o.format == "json")
    std::cout << report_to_json(rep).dump(2) << "\n";
  else
    std::cout << render_table(rep);
}

int run_explain(const CommonOpts& o) {
  std::unique_ptr<Predictor> model = load_model(o.model_path);
  CounterfactualPair pair = load_pair(*model, o.pair_path, o.epsilon);
  emit_local(explain_local(*model, pair, to_config(o)), o);
  return 0;
}

int run_global(const CommonOpts& o, const std::string& pairs_path, const std::string& dataset_path,
               const std::string& label_col, const std::string& base_class,
               const std::string& target_class, std::size_t count) {
  std::unique_ptr<Predictor> model = load_model(o.model_path);
  std::vector<CounterfactualPair> pairs;
  if (!pairs_path.empty()) {
    pairs = load_pair_array(*model, pairs_path, o.epsilon);
  } else if (!dataset_path.empty()) {
    if (label_col.empty()) throw InputError("--label-col required with --dataset");
    Dataset data = load_dataset_csv(dataset_path, label_col);
    if (int(data.space.dim()) != model->dim())
      throw InputError("dataset feature count does not match the model");
    pairs = nn_pairing(data, base_class, target_class, count, o.epsilon);
  } else {
    throw InputError("global needs --pairs or --dataset");
  }

  GlobalReport g = explain_global(*model, pairs, to_config(o));
  if (!o.out.empty()) {
    ensure_out(o.out);
    write_text_file(out_path(o.out, "global.csv"), global_csv(g));
    write_json_file(out_path(o.out, "global.json"), global_to_json(g));
  }
  if (o.format == "csv")
    std::cout << global_csv(g);
  else if (o.format == "json")
    std::cout << global_to_json(g).dump(2) << "\n";
  else
    std::cout << render_global_table(g);
  return 0;
}

int run_cf(const std::vector<std::string>& model_paths, const std::string& x0_path,
           const std::string& method, double tau, std::uint64_t budget, std::uint64_t seed,
           const std::string& dataset_path, const std::string& label_col, const std::string& out) {
  std::vector<std::unique_ptr<Predictor>> owned;
  std::vector<const Predictor*> models;
  for (const std::string& p : model_paths) {
    owned.push_back(load_model(p));
    models.push_back(owned.back().get());
  }
  const Instance x0 = load_instance(x0_path, models[0]->dim());
  FeatureRanges ranges = unit_ranges(models[0]->dim());
  if (!dataset_path.empty()) {
    if (label_col.empty()) throw InputError("--label-col required with --dataset");
    ranges = ranges_from_dataset(load_dataset_csv(dataset_path, label_col));
    if (ranges.dim() != models[0]->dim())
      throw InputError("dataset feature count does not match the model");
  }

  CfTarget target{tau};
  CfResult res;
  if (method == "random")
    res = random_search_cf(models, x0, target, budget, seed, ranges);
  else if (method == "spheres")
    res = growing_spheres_cf(models, x0, target, {0.25, 0.5, 1.0, 2.0, 4.0},
                             int(std::max<std::uint64_t>(budget / 5, 1)), seed, ranges);
  else if (method == "genetic")
    res = genetic_cf(models, x0, target, 32, int(std::max<std::uint64_t>(budget / 32, 1)), seed,
                     ranges);
  else
    throw InputError("unknown method " + method + " (random, spheres, genetic)");

  nlohmann::json j;
  j["success"] = res.success;
  j["score"] = round12(res.score);
  j["draws"] = res.draws_used;
  j["method"] = method;
  j["tau"] = round12(tau);
  if (!out.empty()) {
    ensure_out(out);
    if (res.success) save_pair(res.pair, out_path(out, "pair.json"));
    write_json_file(out_path(out, "cf.json"), j);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_patch(const CommonOpts& o) {
  std::unique_ptr<Predictor> model = load_model(o.model_path);
  CounterfactualPair pair = load_pair(*model, o.pair_path, o.epsilon);

  ExplainConfig cfg = to_config(o);
  cfg.rules = {parse_rules(o.rules).front()};  // ranking rule
  cfg.dense = true;
  AttributionReport rep = explain_local(*model, pair, cfg);

  // rank by descending share, feature id breaking ties
  std::vector<int> ranking = rep.features;
  std::vector<double> share(rep.feature_names.size(), 0.0);
  for (std::size_t row = 0; row < rep.features.size(); ++row)
    share[rep.features[row]] = rep.locals[0][row];
  std::stable_sort(ranking.begin(), ranking.end(), [&](int a, int b) {
    if (share[a] != share[b]) return share[a] > share[b];
    return a < b;
  });

  PatchCurve curve = patch_budget_test(*model, pair, ranking);
  PatchBand band = random_patch_band(*model, pair, 10, o.seed);
  if (!o.out.empty()) {
    ensure_out(o.out);
    write_text_file(out_path(o.out, "patch.csv"), patch_csv(curve, band));
    write_json_file(out_path(o.out, "patch.json"),
                    patch_to_json(curve, band, pair.space.names));
  }
  if (o.format == "json")
    std::cout << patch_to_json(curve, band, pair.space.names).dump(2) << "\n";
  else
    std::cout << patch_csv(curve, band);
  return 0;
}

int run_mc(const CommonOpts& o, const std::string& mode, bool antithetic, int batch) {
  std::unique_ptr<Predictor> model = load_model(o.model_path);
  CounterfactualPair pair = load_pair(*model, o.pair_path, o.epsilon);

  McConfig cfg;
  cfg.perms = o.perms;
  cfg.seed = o.seed;
  cfg.antithetic = antithetic;
  cfg.batch = batch;
  cfg.threads = o.threads > 0 ? o.threads : hardware_threads();

  McEstimate est = (mode == "micro") ? mc_micro_shapley(*model, pair, o.m, cfg)
                                     : mc_macro_shapley(*model, pair, cfg);
  nlohmann::json j;
  j["mode"] = mode;
  j["perms"] = est.perms;
  j["seed"] = est.seed;
  j["dy"] = round12(est.dy);
  j["total"] = round12(est.total());
  if (!o.out.empty()) {
    ensure_out(o.out);
    write_text_file(out_path(o.out, "mc.csv"), mc_csv(est, pair.space.names));
    write_json_file(out_path(o.out, "mc.json"), j);
  }
  std::cout << mc_csv(est, pair.space.names);
  return 0;
}

int run_converge(const CommonOpts& o, const std::string& pot_spec, const std::string& schedule,
                 int nodes, double fd_step) {
  std::unique_ptr<Predictor> model = load_model(o.model_path);
  CounterfactualPair pair = load_pair(*model, o.pair_path, o.epsilon);

  std::vector<int> pot;
  if (pot_spec.empty()) {
    pot = pair.changed;
  } else {
    for (int one_based : parse_int_list(pot_spec, "pot")) pot.push_back(one_based - 1);
  }
  ConvergenceCurve curve = convergence_curve(*model, pair, pot,
                                             parse_int_list(schedule, "schedule"), nodes, fd_step,
                                             o.threads > 0 ? o.threads : hardware_threads());
  if (!o.out.empty()) {
    ensure_out(o.out);
    write_text_file(out_path(o.out, "convergence.csv"),
                    convergence_csv(curve, pair.space.names));
  }
  std::cout << convergence_csv(curve, pair.space.names);
  if (!curve.limit.smooth_model)
    std::cerr << "note: model is non-smooth; diagonal limit is indicative only\n";
  return 0;
}

int run_bench(int reps, std::uint64_t seed, const std::string& out) {
  BenchResult res = bench_scaling_default(reps, seed);
  if (!out.empty()) {
    ensure_out(out);
    write_text_file(out_path(out, "bench.csv"), bench_csv(res));
    write_json_file(out_path(out, "bench.json"), bench_to_json(res));
  }
  std::cout << bench_csv(res);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"counterfactual attribution via interaction pots and grid-state allocation"};
  app.require_subcommand(1);

  CommonOpts ex_opts;
  CLI::App* ex = app.add_subcommand("explain", "attribute one counterfactual pair");
  add_common(ex, ex_opts, true);

  CommonOpts gl_opts;
  std::string gl_pairs, gl_dataset, gl_label, gl_base = "0", gl_target = "1";
  std::size_t gl_count = 0;
  CLI::App* gl = app.add_subcommand("global", "average attributions over many pairs");
  add_common(gl, gl_opts, false);
  gl->add_option("--pairs", gl_pairs, "JSON array of {x0,x1} pairs");
  gl->add_option("--dataset", gl_dataset, "CSV dataset for nearest-neighbor pairing");
  gl->add_option("--label-col", gl_label, "label column name");
  gl->add_option("--base-class", gl_base, "baseline class label");
  gl->add_option("--target-class", gl_target, "target class label");
  gl->add_option("--count", gl_count, "number of baselines to pair (0 = all)");

  std::vector<std::string> cf_models;
  std::string cf_x0, cf_method = "random", cf_dataset, cf_label, cf_out;
  double cf_tau = 0.8;
  std::uint64_t cf_budget = 5000, cf_seed = 0;
  CLI::App* cf = app.add_subcommand("cf", "search for a counterfactual");
  cf->add_option("--model", cf_models, "model JSON (repeatable; min-aggregated)")->required();
  cf->add_option("--x0", cf_x0, "baseline instance JSON array")->required();
  cf->add_option("--method", cf_method, "random, spheres, genetic");
  cf->add_option("--target", cf_tau, "aggregated score threshold");
  cf->add_option("--budget", cf_budget, "evaluation budget");
  cf->add_option("--seed", cf_seed, "random seed");
  cf->add_option("--dataset", cf_dataset, "CSV dataset supplying feature ranges");
  cf->add_option("--label-col", cf_label, "label column name");
  cf->add_option("--out", cf_out, "output directory");

  CommonOpts pt_opts;
  CLI::App* pt = app.add_subcommand("patch-test", "top-K patch budget curve");
  add_common(pt, pt_opts, true);

  CommonOpts mc_opts;
  std::string mc_mode = "macro";
  bool mc_anti = false;
  int mc_batch = 64;
  CLI::App* mc = app.add_subcommand("mc", "Monte-Carlo permutation attribution");
  add_common(mc, mc_opts, true);
  mc->add_option("--mode", mc_mode, "macro or micro")->check(CLI::IsMember({"macro", "micro"}));
  mc->add_flag("--antithetic", mc_anti, "pair each permutation with its reversal");
  mc->add_option("--batch", mc_batch, "permutations per evaluation block");

  CommonOpts cv_opts;
  std::string cv_pot, cv_schedule = "1,2,3,4,5,6,8,10,12,15";
  int cv_nodes = 257;
  double cv_fd = 1e-4;
  CLI::App* cv = app.add_subcommand("converge", "m-sweep against the diagonal limit");
  add_common(cv, cv_opts, true);
  cv->add_option("--pot", cv_pot, "1-based feature list, default: full changed set");
  cv->add_option("--m-schedule", cv_schedule, "comma list of resolutions");
  cv->add_option("--nodes", cv_nodes, "quadrature nodes");
  cv->add_option("--fd-step", cv_fd, "finite-difference step");

  int bn_reps = 5;
  std::uint64_t bn_seed = 0;
  std::string bn_out;
  CLI::App* bn = app.add_subcommand("bench", "enumeration vs grid-state scaling");
  bn->add_option("--reps", bn_reps, "timing repetitions");
  bn->add_option("--seed", bn_seed, "random seed");
  bn->add_option("--out", bn_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ex) return run_explain(ex_opts);
    if (*gl)
      return run_global(gl_opts, gl_pairs, gl_dataset, gl_label, gl_base, gl_target, gl_count);
    if (*cf)
      return run_cf(cf_models, cf_x0, cf_method, cf_tau, cf_budget, cf_seed, cf_dataset, cf_label,
                    cf_out);
    if (*pt) return run_patch(pt_opts);
    if (*mc) return run_mc(mc_opts, mc_mode, mc_anti, mc_batch);
    if (*cv) return run_converge(cv_opts, cv_pot, cv_schedule, cv_nodes, cv_fd);
    if (*bn) return run_bench(bn_reps, bn_seed, bn_out);
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
