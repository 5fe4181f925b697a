#include "commands.hpp"

#include "mcpanel/csv_io.hpp"
#include "mcpanel/dgp.hpp"
#include "mcpanel/effects.hpp"
#include "mcpanel/estimator.hpp"
#include "mcpanel/experiments.hpp"
#include "mcpanel/inference.hpp"
#include "mcpanel/prox.hpp"
#include "mcpanel/selection.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mcpanel::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Inputs and options shared by the data-driven commands.
struct DataArgs {
  std::string y, w, x, z, v;
  bool augment = false;
  bool no_unit_effects = false;
  bool no_time_effects = false;
  bool no_standardize = false;

  FitOptions options() const { return {!no_unit_effects, !no_time_effects, !no_standardize}; }
};

struct SolverArgs {
  double lambda_L = 0.0;
  double lambda_H = 0.0;
  double lambda_beta = 0.0;
  int max_iterations = 500;
  double rel_tolerance = 1e-6;

  PenaltyConfig penalties() const {
    return {lambda_L, lambda_H, lambda_beta, max_iterations, rel_tolerance};
  }
};

struct GridArgs {
  int folds = 5;
  std::uint64_t seed = 1;
  int grid_points = 10;
  int grid_points_L = -1;
  int grid_points_H = -1;
  int grid_points_beta = -1;
  double min_ratio = 1e-4;
  bool no_zero = false;
  bool cube_search = false;
  std::vector<double> values_L, values_H, values_beta;

  GridSpec spec() const {
    GridSpec g;
    g.points_L = grid_points_L > 0 ? grid_points_L : grid_points;
    g.points_H = grid_points_H > 0 ? grid_points_H : grid_points;
    g.points_beta = grid_points_beta > 0 ? grid_points_beta : grid_points;
    g.min_ratio = min_ratio;
    g.include_zero = !no_zero;
    g.values_L = values_L;
    g.values_H = values_H;
    g.values_beta = values_beta;
    g.cube_search = cube_search;
    return g;
  }
};

struct State {
  DataArgs data;
  SolverArgs solver;
  GridArgs grid;
  DgpConfig dgp;
  std::string out;
  std::string mode = "imposed_null";
  bool post = false;
  std::string criterion = "mse";
  std::string family = "moving_block";
  Index n_perm = 999;
  std::uint64_t perm_seed = 1;
  std::string fit_dir;
  // simulate / replicate
  std::string target;
  double scale = 0.25;
  int runs = -1;
  std::uint64_t seed = 1;
  std::vector<std::string> variants;
  bool no_inference = false;
  bool desk_grid = false;
};

void add_data_options(CLI::App* sub, DataArgs& d) {
  sub->add_option("--y", d.y, "Outcome matrix CSV (N x T, no header)")->required();
  sub->add_option("--w", d.w, "Treatment matrix CSV (N x T, entries 0/1)")->required();
  sub->add_option("--x", d.x, "Unit covariates CSV (header row of names)");
  sub->add_option("--z", d.z, "Time covariates CSV (leading name column)");
  sub->add_option("--v", d.v, "Unit-time covariates, long CSV unit,time,covariate,value");
  sub->add_flag("--augment", d.augment, "Append identity blocks to X and Z (linear terms)");
  sub->add_flag("--no-unit-effects", d.no_unit_effects, "Drop unit fixed effects");
  sub->add_flag("--no-time-effects", d.no_time_effects, "Drop time fixed effects");
  sub->add_flag("--no-standardize", d.no_standardize, "Fit covariates on their original scale");
}

void add_solver_options(CLI::App* sub, SolverArgs& s, bool lambdas) {
  if (lambdas) {
    sub->add_option("--lambda-l", s.lambda_L, "Nuclear-norm penalty")->check(CLI::NonNegativeNumber);
    sub->add_option("--lambda-h", s.lambda_H, "l1 penalty on H")->check(CLI::NonNegativeNumber);
    sub->add_option("--lambda-beta", s.lambda_beta, "l1 penalty on beta")->check(CLI::NonNegativeNumber);
  }
  sub->add_option("--max-iterations", s.max_iterations, "Outer iteration cap")->check(CLI::PositiveNumber);
  sub->add_option("--rel-tolerance", s.rel_tolerance, "Relative objective decrease for convergence")
      ->check(CLI::PositiveNumber);
}

void add_grid_options(CLI::App* sub, GridArgs& g, bool with_seed) {
  sub->add_option("--folds", g.folds, "Number of folds")->check(CLI::Range(2, 1000));
  if (with_seed) sub->add_option("--seed", g.seed, "Fold seed");
  sub->add_option("--grid-points", g.grid_points, "Log-spaced points per axis")->check(CLI::PositiveNumber);
  sub->add_option("--grid-points-l", g.grid_points_L, "Points on the lambda_L axis");
  sub->add_option("--grid-points-h", g.grid_points_H, "Points on the lambda_H axis");
  sub->add_option("--grid-points-beta", g.grid_points_beta, "Points on the lambda_beta axis");
  sub->add_option("--min-ratio", g.min_ratio, "Smallest positive grid value relative to the maximum");
  sub->add_flag("--no-zero", g.no_zero, "Do not append 0 to each axis");
  sub->add_flag("--cube-search", g.cube_search, "Refine the incumbent after the grid (experimental)");
  sub->add_option("--lambda-l-values", g.values_L, "Explicit lambda_L values")->delimiter(',');
  sub->add_option("--lambda-h-values", g.values_H, "Explicit lambda_H values")->delimiter(',');
  sub->add_option("--lambda-beta-values", g.values_beta, "Explicit lambda_beta values")->delimiter(',');
}

void add_dgp_options(CLI::App* sub, DgpConfig& d, bool with_seed) {
  sub->add_option("--n", d.N, "Units");
  sub->add_option("--t", d.T, "Periods");
  sub->add_option("--tau", d.tau, "Treatment effect");
  sub->add_option("--rank-l", d.rank_L, "Rank of L");
  sub->add_option("--w-prob", d.w, "Treatment probability");
  sub->add_option("--sigma-max", d.sigma_max, "Bound of the covariate correlations");
  sub->add_option("--p", d.p, "Unit covariates");
  sub->add_option("--q", d.q, "Time covariates");
  sub->add_option("--h-size", d.h_size, "Variance of active H entries");
  sub->add_option("--h-prob", d.h_prob, "Activity probability of H entries");
  sub->add_option("--b", d.B, "Unit-time covariates");
  sub->add_option("--b-size", d.b_size, "Variance of active beta entries");
  sub->add_option("--b-prob", d.b_prob, "Activity probability of beta entries");
  sub->add_option("--sigma-eps", d.sigma_eps, "Shock standard deviation");
  sub->add_option("--zeta-l", d.zeta_L, "Rate of the exponential singular values");
  sub->add_flag("--exact-count-bernoulli", d.exact_count_bernoulli, "Draw activity counts exactly");
  if (with_seed) sub->add_option("--seed", d.seed, "Random seed");
}

Panel load_panel(const DataArgs& a) {
  PanelData d;
  d.Y = read_dense(a.y);
  d.W = read_dense(a.w);
  if (!a.x.empty()) d.X = read_unit_covariates(a.x, d.x_names);
  if (!a.z.empty()) d.Z = read_time_covariates(a.z, d.z_names);
  if (!a.v.empty()) d.V = read_unit_time_covariates(a.v, d.Y.rows(), d.Y.cols(), d.v_names);
  Panel p = validate(std::move(d));
  return a.augment ? augment_linear_terms(p) : p;
}

std::string to_text(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

class Output {
 public:
  explicit Output(std::string dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  void write(const std::string& name, const std::string& text) {
    write_file((fs::path(dir_) / name).string(), text);
    files_.push_back(name);
  }
  const std::string& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

ordered_json option_snapshot(const CLI::App* sub) {
  ordered_json cfg = ordered_json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty() && opt->get_name().empty()) continue;
    const std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames()[0];
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_min() == 0) {
      cfg[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto r = opt->results();
      cfg[name] = r.size() == 1 ? ordered_json(r[0]) : ordered_json(r);
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

void write_manifest(Output& out, const CLI::App* sub, const Commands& c, const std::string& started,
                    const ordered_json& seeds, int status, const ordered_json& extra = {}) {
  ordered_json m;
  m["command"] = sub->get_name();
  m["software_version"] = kVersion;
  m["arguments"] = c.argv;
  m["config"] = option_snapshot(sub);
  m["seeds"] = seeds;
  m["started_at"] = started;
  m["finished_at"] = utc_now();
  m["exit_status"] = status;
  m["outputs"] = out.files();
  if (!extra.is_null()) m["details"] = extra;
  write_file((fs::path(out.dir()) / "manifest.json").string(), m.dump(2) + "\n");
}

ordered_json fit_json(const FitResult& f, const Panel& panel, const DataArgs& data) {
  ordered_json j;
  j["mode"] = to_string(f.mode);
  j["post"] = f.post;
  j["augment"] = data.augment;
  j["lambda_L"] = f.penalties.lambda_L;
  j["lambda_H"] = f.penalties.lambda_H;
  j["lambda_beta"] = f.penalties.lambda_beta;
  j["max_iterations"] = f.penalties.max_iterations;
  j["rel_tolerance"] = f.penalties.rel_tolerance;
  j["unit_effects"] = f.options.unit_effects;
  j["time_effects"] = f.options.time_effects;
  j["standardize"] = f.options.standardize;
  j["converged"] = f.converged;
  j["n_iterations"] = f.n_iterations;
  j["objective"] = f.objective;
  j["loss"] = f.loss;
  j["rank_L"] = f.rank_L;
  j["size_H"] = f.support_H.size();
  j["size_beta"] = f.support_beta.size();
  ordered_json sh = ordered_json::array();
  for (const auto& [a, b] : f.support_H) sh.push_back({panel.data().x_names[a], panel.data().z_names[b]});
  j["support_H"] = sh;
  ordered_json sb = ordered_json::array();
  for (Index k : f.support_beta) sb.push_back(panel.data().v_names[k]);
  j["support_beta"] = sb;
  j["objective_trace"] = f.objective_trace;
  j["warnings"] = f.warnings;
  if (panel.n_treated() > 0 && panel.n_control() > 0) {
    const EffectEstimate e = estimate_atet(panel, f);
    j["atet"] = e.atet;
    j["atet_rot"] = e.atet_rot;
    j["n_treated"] = e.n_treated;
    j["n_control"] = e.n_control;
  } else {
    j["atet"] = nullptr;
    j["atet_rot"] = nullptr;
    j["n_treated"] = panel.n_treated();
    j["n_control"] = panel.n_control();
  }
  return j;
}

void write_fit(Output& out, const FitResult& f, const Panel& panel, const DataArgs& data) {
  const ModelParams& p = f.params;
  out.write("L.csv", to_text([&](std::ostream& os) { write_dense(os, p.L); }));
  out.write("H.csv", to_text([&](std::ostream& os) {
              write_h_triplets(os, p.H, panel.data().x_names, panel.data().z_names);
            }));
  out.write("beta.csv", to_text([&](std::ostream& os) { write_vector(os, p.beta, panel.data().v_names); }));
  out.write("gamma.csv", to_text([&](std::ostream& os) { write_vector(os, p.gamma); }));
  out.write("delta.csv", to_text([&](std::ostream& os) { write_vector(os, p.delta); }));
  if (panel.n_treated() > 0) {
    const Eigen::MatrixXd eff = treated_effects(panel, f);
    out.write("effects.csv", to_text([&](std::ostream& os) {
                os << "unit,time,effect\n";
                for (const Cell& c : panel.treated()) {
                  os << c.i + 1 << ',' << c.t + 1 << ',' << format_double(eff(c.i, c.t)) << '\n';
                }
              }));
  }
  out.write("fit.json", fit_json(f, panel, data).dump(2) + "\n");
}

FitResult load_fit(const std::string& dir, const Panel& panel) {
  const fs::path base(dir);
  const fs::path summary = base / "fit.json";
  std::ifstream in(summary);
  if (!in) throw CsvError("no stage-1 fit found: cannot open file '" + summary.string() + "'");
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw CsvError(summary.string() + ": " + e.what());
  }
  FitResult f;
  f.mode = parse_mode(j.at("mode").get<std::string>());
  f.penalties = {j.at("lambda_L").get<double>(), j.at("lambda_H").get<double>(),
                 j.at("lambda_beta").get<double>(), j.at("max_iterations").get<int>(),
                 j.at("rel_tolerance").get<double>()};
  f.options = {j.at("unit_effects").get<bool>(), j.at("time_effects").get<bool>(),
               j.at("standardize").get<bool>()};
  f.converged = j.at("converged").get<bool>();
  f.rank_L = j.at("rank_L").get<Index>();
  f.params.L = read_dense((base / "L.csv").string());
  f.params.H = read_h_triplets((base / "H.csv").string(), panel.data().x_names, panel.data().z_names);
  f.params.beta = panel.J() > 0 ? read_vector((base / "beta.csv").string()) : Eigen::VectorXd(0);
  f.params.gamma = read_vector((base / "gamma.csv").string());
  f.params.delta = read_vector((base / "delta.csv").string());
  if (f.params.L.rows() != panel.N() || f.params.L.cols() != panel.T() ||
      f.params.beta.size() != panel.J() || f.params.gamma.size() != panel.N() ||
      f.params.delta.size() != panel.T()) {
    throw ValidationError("stage-1 fit in '" + dir + "' does not match the panel dimensions");
  }
  for (Index a = 0; a < f.params.H.rows(); ++a) {
    for (Index b = 0; b < f.params.H.cols(); ++b) {
      if (std::abs(f.params.H(a, b)) > kZeroCutoff) f.support_H.emplace_back(a, b);
    }
  }
  for (Index k = 0; k < f.params.beta.size(); ++k) {
    if (std::abs(f.params.beta(k)) > kZeroCutoff) f.support_beta.push_back(k);
  }
  return f;
}

int cmd_fit(State& s, const CLI::App* sub, const Commands& c) {
  const std::string started = utc_now();
  const Panel panel = load_panel(s.data);
  FitResult f;
  std::string dir = s.out;
  if (s.post) {
    const FitResult first = load_fit(s.out, panel);
    f = fit_post(panel, first, first.mode);
    dir = (fs::path(s.out) / "post").string();
  } else {
    f = fit(panel, s.solver.penalties(), parse_mode(s.mode), s.data.options());
  }
  for (const auto& w : f.warnings) std::cerr << "warning: " << w << "\n";
  Output out(dir);
  write_fit(out, f, panel, s.data);
  const int status = f.converged ? 0 : 1;
  write_manifest(out, sub, c, started, ordered_json::array(), status);
  std::cout << "mode " << to_string(f.mode) << (f.post ? " (post)" : "") << ": objective "
            << format_double(f.objective) << ", rank_L " << f.rank_L << ", |H| " << f.support_H.size()
            << ", |beta| " << f.support_beta.size() << ", iterations " << f.n_iterations
            << (f.converged ? "" : " (not converged)") << "\n";
  if (panel.n_treated() > 0 && panel.n_control() > 0) {
    const EffectEstimate e = estimate_atet(panel, f);
    std::cout << "atet " << format_double(e.atet) << ", atet_rot " << format_double(e.atet_rot) << "\n";
  }
  if (!f.converged) std::cerr << "error: solver did not converge within " << f.penalties.max_iterations << " iterations\n";
  return status;
}

int cmd_cv(State& s, const CLI::App* sub, const Commands& c) {
  const std::string started = utc_now();
  const Panel panel = load_panel(s.data);
  CvOptions o;
  o.fit = s.data.options();
  o.max_iterations = s.solver.max_iterations;
  o.rel_tolerance = s.solver.rel_tolerance;
  o.workers = workers_from_env();
  const Criterion crit = parse_criterion(s.criterion);
  const CvResult r = cross_validate(panel, s.grid.spec(), s.grid.folds, s.grid.seed, crit, o);
  Output out(s.out);
  out.write("cv.csv", to_text([&](std::ostream& os) { write_cv_csv(os, r); }));
  ordered_json sel;
  for (Criterion k : {Criterion::mse, Criterion::one_se}) {
    const CvCell& cell = r.best(k);
    sel[to_string(k)] = {{"lambda_L", cell.lambdas.lambda_L},
                         {"lambda_H", cell.lambdas.lambda_H},
                         {"lambda_beta", cell.lambdas.lambda_beta},
                         {"cv_error", cell.cv_error},
                         {"cv_se", cell.cv_se}};
  }
  sel["criterion"] = to_string(crit);
  sel["lambda_max"] = {{"lambda_L", r.bounds.lambda_L},
                       {"lambda_H", r.bounds.lambda_H},
                       {"lambda_beta", r.bounds.lambda_beta}};
  out.write("selection.json", sel.dump(2) + "\n");
  write_manifest(out, sub, c, started, ordered_json::array({s.grid.seed}), 0);
  const Lambdas& l = r.selected().lambdas;
  std::cout << "criterion " << to_string(crit) << ": lambda_L " << format_double(l.lambda_L)
            << ", lambda_H " << format_double(l.lambda_H) << ", lambda_beta "
            << format_double(l.lambda_beta) << "\n";
  return 0;
}

int cmd_infer(State& s, const CLI::App* sub, const Commands& c) {
  const std::string started = utc_now();
  const Panel panel = load_panel(s.data);
  const FitResult f = s.fit_dir.empty() ? fit(panel, s.solver.penalties(), Mode::imposed_null, s.data.options())
                                        : load_fit(s.fit_dir, panel);
  const PermutationPlan plan = make_plan(parse_family(s.family), panel.N(), panel.T(), s.n_perm, s.perm_seed);
  const InferenceResult r = permutation_p_value(panel, f, plan);
  Output out(s.out);
  out.write("inference.csv", to_text([&](std::ostream& os) { write_inference_csv(os, r); }));
  ordered_json j{{"family", to_string(plan.family)},
                 {"count", plan.count},
                 {"exhaustive", plan.exhaustive},
                 {"statistic", r.statistic},
                 {"p_value", r.p_value},
                 {"fit_converged", f.converged}};
  out.write("inference.json", j.dump(2) + "\n");
  write_manifest(out, sub, c, started, ordered_json::array({s.perm_seed}), 0);
  std::cout << "statistic " << format_double(r.statistic) << ", permutations " << plan.count
            << ", p_value " << format_double(r.p_value) << "\n";
  return 0;
}

ExperimentSettings experiment_settings(const State& s) {
  ExperimentSettings e;
  e.grid = s.grid.spec();
  e.folds = s.grid.folds;
  e.cv.fit = s.data.options();
  e.max_iterations = s.solver.max_iterations;
  e.rel_tolerance = s.solver.rel_tolerance;
  e.inference = !s.no_inference;
  e.family = parse_family(s.family);
  e.n_perm = s.n_perm;
  e.variants = s.variants;
  for (const auto& v : e.variants) {
    if (std::find(variant_names().begin(), variant_names().end(), v) == variant_names().end()) {
      throw std::invalid_argument("unknown variant '" + v + "'");
    }
  }
  return e;
}

int run_replication(State& s, const CLI::App* sub, const Commands& c, const std::string& target,
                    int grid_points) {
  const std::string started = utc_now();
  ReplicationSpec spec;
  spec.target = target;
  spec.scale = s.scale;
  spec.runs = s.runs;
  spec.grid_points = grid_points;
  spec.seed = s.seed;
  spec.workers = workers_from_env();
  spec.dgp = s.dgp;
  spec.settings = experiment_settings(s);
  spec.desk_grid = s.desk_grid;
  const ReplicationResult r = replicate(spec, [](std::size_t done, std::size_t total) {
    std::cerr << "\rruns " << done << "/" << total << std::flush;
    if (done == total) std::cerr << "\n";
  });
  Output out(s.out);
  out.write("runs.csv", to_text([&](std::ostream& os) { write_runs_csv(os, r); }));
  out.write("aggregate.csv", to_text([&](std::ostream& os) { write_aggregate_csv(os, r); }));
  ordered_json details;
  details["target"] = target;
  details["scale"] = spec.scale;
  details["grid_points"] = r.spec.grid_points;
  ordered_json settings = ordered_json::array();
  std::size_t failed = 0;
  for (std::size_t k = 0; k < r.settings.size(); ++k) {
    settings.push_back({{"name", r.settings[k].name},
                        {"value", r.settings[k].value},
                        {"N", r.settings[k].dgp.N},
                        {"T", r.settings[k].dgp.T},
                        {"runs", r.settings[k].runs}});
    for (const auto& o : r.runs[k]) failed += o.status == "ok" ? 0 : 1;
  }
  details["settings"] = settings;
  details["failed_runs"] = failed;
  write_manifest(out, sub, c, started, ordered_json::array({s.seed}), 0, details);
  std::cout << "wrote " << out.dir() << "/runs.csv and aggregate.csv";
  if (failed > 0) std::cout << " (" << failed << " runs failed, see status column)";
  std::cout << "\n";
  return 0;
}

int cmd_generate(State& s, const CLI::App* sub, const Commands& c) {
  const std::string started = utc_now();
  const SimulatedPanel sim = generate(s.dgp);
  const PanelData& d = sim.panel.data();
  Output out(s.out);
  out.write("Y.csv", to_text([&](std::ostream& os) { write_dense(os, d.Y); }));
  out.write("W.csv", to_text([&](std::ostream& os) { write_dense(os, d.W); }));
  out.write("X.csv", to_text([&](std::ostream& os) { write_unit_covariates(os, d.X, d.x_names); }));
  out.write("Z.csv", to_text([&](std::ostream& os) { write_time_covariates(os, d.Z, d.z_names); }));
  out.write("V.csv", to_text([&](std::ostream& os) { write_unit_time_covariates(os, d.V, d.v_names); }));
  out.write("true_L.csv", to_text([&](std::ostream& os) { write_dense(os, sim.truth.L); }));
  out.write("true_H.csv", to_text([&](std::ostream& os) { write_h_triplets(os, sim.truth.H, d.x_names, d.z_names); }));
  out.write("true_beta.csv", to_text([&](std::ostream& os) { write_vector(os, sim.truth.beta, d.v_names); }));
  out.write("true_gamma.csv", to_text([&](std::ostream& os) { write_vector(os, sim.truth.gamma); }));
  out.write("true_delta.csv", to_text([&](std::ostream& os) { write_vector(os, sim.truth.delta); }));
  write_manifest(out, sub, c, started, ordered_json::array({s.dgp.seed}), 0, {{"tau", sim.tau}});
  std::cout << "wrote " << d.Y.rows() << "x" << d.Y.cols() << " panel to " << out.dir() << "\n";
  return 0;
}

}  // namespace

void register_commands(CLI::App& app, Commands& commands) {
  auto state = std::make_shared<State>();
  commands.state = state;
  State& s = *state;

  auto config_opt = [](CLI::App* sub) {
    sub->add_option("--config", "Flat key = value file; command-line flags take precedence");
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the penalized model for given penalties");
  add_data_options(fit_cmd, s.data);
  add_solver_options(fit_cmd, s.solver, true);
  fit_cmd->add_option("--mode", s.mode, "imposed-null or control-only")
      ->check(CLI::IsMember({"imposed_null", "imposed-null", "control_only", "control-only"}));
  fit_cmd->add_flag("--post", s.post, "Refit without penalties on the stage-1 fit found in --out");
  fit_cmd->add_option("--out", s.out, "Output directory")->required();
  config_opt(fit_cmd);
  fit_cmd->callback([&s, &commands, fit_cmd] { commands.action = [&s, &commands, fit_cmd] { return cmd_fit(s, fit_cmd, commands); }; });

  CLI::App* cv_cmd = app.add_subcommand("cv", "Cross-validate the three penalties");
  add_data_options(cv_cmd, s.data);
  add_solver_options(cv_cmd, s.solver, false);
  add_grid_options(cv_cmd, s.grid, true);
  cv_cmd->add_option("--criterion", s.criterion, "mse or 1se")->check(CLI::IsMember({"mse", "1se"}));
  cv_cmd->add_option("--out", s.out, "Output directory")->required();
  config_opt(cv_cmd);
  cv_cmd->callback([&s, &commands, cv_cmd] { commands.action = [&s, &commands, cv_cmd] { return cmd_cv(s, cv_cmd, commands); }; });

  CLI::App* infer_cmd = app.add_subcommand("infer", "Permutation test of the sharp null of no effect");
  add_data_options(infer_cmd, s.data);
  add_solver_options(infer_cmd, s.solver, true);
  infer_cmd->add_option("--fit-dir", s.fit_dir, "Use the imposed-null fit stored in this directory");
  infer_cmd->add_option("--family", s.family, "moving-block or iid")
      ->check(CLI::IsMember({"moving_block", "moving-block", "iid"}));
  infer_cmd->add_option("--n-perm", s.n_perm, "Random permutations for the iid family")->check(CLI::NonNegativeNumber);
  infer_cmd->add_option("--seed", s.perm_seed, "Seed for the iid family");
  infer_cmd->add_option("--out", s.out, "Output directory")->required();
  config_opt(infer_cmd);
  infer_cmd->callback([&s, &commands, infer_cmd] { commands.action = [&s, &commands, infer_cmd] { return cmd_infer(s, infer_cmd, commands); }; });

  auto experiment_options = [&](CLI::App* sub) {
    add_solver_options(sub, s.solver, false);
    add_grid_options(sub, s.grid, false);
    sub->add_option("--seed", s.seed, "Base seed of the experiment");
    sub->add_option("--runs", s.runs, "Replications per setting");
    sub->add_option("--variants", s.variants, "Subset of no_reg,imp0,imp0_rot,imp0_post,imp0_1se,not0")
        ->delimiter(',');
    sub->add_flag("--no-inference", s.no_inference, "Skip permutation p-values");
    sub->add_option("--family", s.family, "moving-block or iid")
        ->check(CLI::IsMember({"moving_block", "moving-block", "iid"}));
    sub->add_option("--n-perm", s.n_perm, "Random permutations for the iid family");
    sub->add_flag("--no-unit-effects", s.data.no_unit_effects, "Drop unit fixed effects");
    sub->add_flag("--no-time-effects", s.data.no_time_effects, "Drop time fixed effects");
    sub->add_flag("--no-standardize", s.data.no_standardize, "Fit covariates on their original scale");
    config_opt(sub);
  };

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Repeated DGP draws with every estimator variant");
  add_dgp_options(sim_cmd, s.dgp, false);
  experiment_options(sim_cmd);
  sim_cmd->add_option("--out", s.out, "Output directory")->capture_default_str();
  s.out.clear();
  sim_cmd->callback([&s, &commands, sim_cmd] {
    commands.action = [&s, &commands, sim_cmd] {
      if (s.out.empty()) s.out = "simulate_out";
      if (s.runs < 0) s.runs = 100;
      return run_replication(s, sim_cmd, commands, "simulate", s.grid.grid_points);
    };
  });

  CLI::App* rep_cmd = app.add_subcommand("replicate", "Desk-scale replication of a simulation figure");
  rep_cmd->add_option("target", s.target, "fig3, fig4, fig5, fig8, fig9 or fig10")
      ->required()
      ->check(CLI::IsMember(replication_targets()));
  rep_cmd->add_option("--scale", s.scale, "Shrinks N, T, runs and grid size")->check(CLI::PositiveNumber);
  add_dgp_options(rep_cmd, s.dgp, false);
  experiment_options(rep_cmd);
  rep_cmd->add_option("--out", s.out, "Output directory");
  rep_cmd->callback([&s, &commands, rep_cmd] {
    commands.action = [&s, &commands, rep_cmd] {
      if (s.out.empty()) s.out = "replicate_" + s.target;
      const bool explicit_grid = rep_cmd->get_option("--grid-points")->count() > 0;
      s.desk_grid = rep_cmd->get_option("--min-ratio")->count() == 0 && !s.grid.no_zero;
      return run_replication(s, rep_cmd, commands, s.target, explicit_grid ? s.grid.grid_points : -1);
    };
  });

  CLI::App* gen_cmd = app.add_subcommand("generate", "Write one simulated panel as CSV files");
  add_dgp_options(gen_cmd, s.dgp, true);
  gen_cmd->add_option("--out", s.out, "Output directory")->required();
  config_opt(gen_cmd);
  gen_cmd->callback([&s, &commands, gen_cmd] { commands.action = [&s, &commands, gen_cmd] { return cmd_generate(s, gen_cmd, commands); }; });

  app.require_subcommand(1);
}

std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
  std::string path;
  std::size_t cfg_at = args.size();
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) {
      path = args[k + 1];
      cfg_at = k;
      break;
    }
    if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
      cfg_at = k;
      break;
    }
  }
  if (path.empty()) return args;
  std::vector<std::string> rest;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (k == cfg_at) {
      if (args[k] == "--config") ++k;
      continue;
    }
    rest.push_back(args[k]);
  }
  if (rest.empty()) throw CLI::ConfigError("--config needs a subcommand");
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(rest[0]);
  } catch (const CLI::OptionNotFound&) {
    throw CLI::ConfigError("--config needs a subcommand");
  }
  std::ifstream in(path);
  if (!in) throw CLI::ConfigError("cannot open config file '" + path + "'");
  auto given = [&](const std::string& flag) {
    return std::any_of(rest.begin() + 1, rest.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };
  std::vector<std::string> extra;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#' || line[b] == ';' || line[b] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CLI::ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    auto trim = [](std::string v) {
      const auto s = v.find_first_not_of(" \t\r\"");
      const auto e = v.find_last_not_of(" \t\r\"");
      return s == std::string::npos ? std::string() : v.substr(s, e - s + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) {
      return ch == '_' ? '-' : static_cast<char>(std::tolower(ch));
    });
    if (key == "w") key = "w-prob";
    const std::string flag = "--" + key;
    const CLI::Option* opt = nullptr;
    try {
      opt = sub->get_option(flag);
    } catch (const CLI::OptionNotFound&) {
      throw CLI::ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "' for " +
                             sub->get_name());
    }
    if (given(flag)) continue;
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value == "yes" || value == "on") extra.push_back(flag);
    } else {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  std::vector<std::string> out{rest[0]};
  out.insert(out.end(), extra.begin(), extra.end());
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

}  // namespace mcpanel::cli
