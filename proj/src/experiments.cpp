#include "mcpanel/experiments.hpp"

#include "mcpanel/csv_io.hpp"
#include "mcpanel/effects.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace mcpanel {

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names{"no_reg", "imp0", "imp0_rot", "imp0_post", "imp0_1se", "not0"};
  return names;
}

const std::vector<std::string>& replication_targets() {
  static const std::vector<std::string> names{"fig3", "fig4", "fig5", "fig8", "fig9", "fig10"};
  return names;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 steps over the combined inputs
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

int workers_from_env() {
  const char* v = std::getenv("MCPANEL_WORKERS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw std::invalid_argument("MCPANEL_WORKERS must be a positive integer");
  return static_cast<int>(std::min(n, 256L));
}

namespace {

bool wanted(const ExperimentSettings& s, const std::string& v) {
  return s.variants.empty() || std::find(s.variants.begin(), s.variants.end(), v) != s.variants.end();
}

PenaltyConfig penalties_at(const Lambdas& l, const ExperimentSettings& s) {
  PenaltyConfig p;
  p.lambda_L = l.lambda_L;
  p.lambda_H = l.lambda_H;
  p.lambda_beta = l.lambda_beta;
  p.max_iterations = s.max_iterations;
  p.rel_tolerance = s.rel_tolerance;
  return p;
}

// lambda_L minimizing the CV error among cells with the smallest lambda_H and
// lambda_beta on the grid (zero when the grid includes it).
double no_reg_lambda_L(const CvResult& cv) {
  const double h = cv.axis_H.back(), b = cv.axis_beta.back();
  const CvCell* best = nullptr;
  for (const auto& c : cv.cells) {
    if (c.lambdas.lambda_H != h || c.lambdas.lambda_beta != b || !std::isfinite(c.cv_error)) continue;
    if (best == nullptr || c.cv_error < best->cv_error ||
        (c.cv_error == best->cv_error && c.lambdas.lambda_L > best->lambdas.lambda_L)) {
      best = &c;
    }
  }
  return best == nullptr ? 0.0 : best->lambdas.lambda_L;
}

VariantOutcome describe(const std::string& name, const FitResult& f, const SimulatedPanel& sim,
                        double tau_hat) {
  VariantOutcome v;
  v.variant = name;
  v.tau_hat = tau_hat;
  v.size_H = static_cast<double>(f.support_H.size());
  v.size_beta = static_cast<double>(f.support_beta.size());
  v.rank_L = static_cast<double>(f.rank_L);
  v.h_mse = f.params.H.size() > 0 ? (f.params.H - sim.truth.H).squaredNorm() / static_cast<double>(f.params.H.size()) : 0.0;
  v.beta_mse = f.params.beta.size() > 0
                   ? (f.params.beta - sim.truth.beta).squaredNorm() / static_cast<double>(f.params.beta.size())
                   : 0.0;
  v.converged = f.converged;
  return v;
}

}  // namespace

RunOutcome run_experiment(const DgpConfig& dgp, const ExperimentSettings& s, std::uint64_t cv_seed) {
  RunOutcome out;
  out.seed = dgp.seed;
  out.N = dgp.N;
  out.T = dgp.T;
  out.sigma_eps = dgp.sigma_eps;
  const SimulatedPanel sim = generate(dgp);
  const Panel& panel = sim.panel;
  out.true_size_H = (sim.truth.H.array() != 0.0).count();
  out.true_size_beta = (sim.truth.beta.array() != 0.0).count();

  CvOptions cvo = s.cv;
  cvo.max_iterations = s.max_iterations;
  cvo.rel_tolerance = s.rel_tolerance;
  const CvResult cv = cross_validate(panel, s.grid, s.folds, cv_seed, Criterion::mse, cvo);
  const Lambdas mse = cv.best(Criterion::mse).lambdas;
  const Lambdas one = cv.best(Criterion::one_se).lambdas;
  const PermutationPlan plan = make_plan(s.family, panel.N(), panel.T(), s.n_perm, dgp.seed);

  if (wanted(s, "no_reg")) {
    const FitResult f = fit(panel, penalties_at({no_reg_lambda_L(cv), 0.0, 0.0}, s), Mode::control_only);
    out.variants.push_back(describe("no_reg", f, sim, estimate_atet(panel, f).atet));
  }
  if (wanted(s, "imp0") || wanted(s, "imp0_rot") || wanted(s, "imp0_post")) {
    const FitResult f = fit(panel, penalties_at(mse, s), Mode::imposed_null);
    const EffectEstimate e = estimate_atet(panel, f);
    if (wanted(s, "imp0")) {
      VariantOutcome v = describe("imp0", f, sim, e.atet);
      if (s.inference) v.p_value = permutation_p_value(panel, f, plan).p_value;
      out.variants.push_back(v);
    }
    if (wanted(s, "imp0_rot")) out.variants.push_back(describe("imp0_rot", f, sim, e.atet_rot));
    if (wanted(s, "imp0_post")) {
      const FitResult post = fit_post(panel, f, Mode::imposed_null);
      out.variants.push_back(describe("imp0_post", post, sim, estimate_atet(panel, post).atet));
    }
  }
  if (wanted(s, "imp0_1se")) {
    const FitResult f = fit(panel, penalties_at(one, s), Mode::imposed_null);
    VariantOutcome v = describe("imp0_1se", f, sim, estimate_atet(panel, f).atet);
    if (s.inference) v.p_value = permutation_p_value(panel, f, plan).p_value;
    out.variants.push_back(v);
  }
  if (wanted(s, "not0")) {
    const FitResult f = fit(panel, penalties_at(mse, s), Mode::control_only);
    out.variants.push_back(describe("not0", f, sim, estimate_atet(panel, f).atet));
  }
  return out;
}

int default_runs(const std::string& target, double scale) {
  const double s3 = scale * scale * scale;
  if (target == "fig8" || target == "fig10") return std::max(2, static_cast<int>(std::lround(1400.0 * s3)));
  return std::max(2, static_cast<int>(std::lround(700.0 * s3)));
}

int default_grid_points(double scale) { return std::max(3, static_cast<int>(std::lround(10.0 * scale))); }

void apply_desk_grid(GridSpec& grid, double scale) {
  if (scale >= 1.0) return;
  grid.min_ratio = 1e-2;
  grid.include_zero = false;
}

std::vector<Setting> replication_settings(const ReplicationSpec& spec) {
  if (!(spec.scale > 0.0)) throw std::invalid_argument("scale must be positive");
  std::vector<Setting> out;
  auto add = [&](const std::string& name, double value, DgpConfig d) {
    d.rank_L = std::min({d.rank_L, d.N, d.T});
    out.push_back({name, value, d, spec.runs >= 0 ? spec.runs : default_runs(spec.target, spec.scale)});
  };
  const auto scaled = [&](double v) { return static_cast<Index>(std::lround(v * spec.scale)); };
  if (spec.target == "simulate") {
    out.push_back({"T", static_cast<double>(spec.dgp.T), spec.dgp, spec.runs >= 0 ? spec.runs : 100});
    return out;
  }
  if (spec.target == "fig3" || spec.target == "fig4" || spec.target == "fig5" || spec.target == "fig9") {
    for (double T0 : {10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0}) {
      DgpConfig d = spec.dgp;
      d.N = scaled(100.0);
      d.T = scaled(T0);
      if (d.T < 4) continue;
      add("T", static_cast<double>(d.T), d);
    }
  } else if (spec.target == "fig8" || spec.target == "fig10") {
    for (double sigma : {4.0, 2.0, 1.0, 0.5, 0.25}) {
      DgpConfig d = spec.dgp;
      d.N = scaled(100.0);
      d.T = scaled(80.0);
      d.sigma_eps = sigma;
      add("sigma_eps", sigma, d);
    }
  } else {
    throw std::invalid_argument("unknown replication target '" + spec.target + "'");
  }
  for (const auto& s : out) {
    if (s.dgp.N < 2 || s.dgp.T < 2) throw std::invalid_argument("scale produces a degenerate panel");
  }
  return out;
}

ReplicationResult replicate(const ReplicationSpec& spec, const ProgressFn& progress) {
  ReplicationResult r;
  r.spec = spec;
  if (r.spec.grid_points < 0 && spec.target != "simulate") r.spec.grid_points = default_grid_points(spec.scale);
  if (r.spec.desk_grid && spec.target != "simulate") apply_desk_grid(r.spec.settings.grid, spec.scale);
  if (r.spec.grid_points > 0) {
    r.spec.settings.grid.points_L = r.spec.settings.grid.points_H = r.spec.settings.grid.points_beta =
        r.spec.grid_points;
  }
  r.settings = replication_settings(r.spec);

  struct Job {
    std::size_t setting;
    std::size_t run;
  };
  std::vector<Job> jobs;
  r.runs.resize(r.settings.size());
  for (std::size_t s = 0; s < r.settings.size(); ++s) {
    r.runs[s].resize(r.settings[s].runs);
    for (int k = 0; k < r.settings[s].runs; ++k) jobs.push_back({s, static_cast<std::size_t>(k)});
  }

  std::atomic<std::size_t> next{0}, done{0};
  std::mutex progress_mutex;
  auto work = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job job = jobs[j];
      DgpConfig d = r.settings[job.setting].dgp;
      d.seed = derive_seed(spec.seed, job.setting, 2 * job.run);
      const std::uint64_t cv_seed = derive_seed(spec.seed, job.setting, 2 * job.run + 1);
      RunOutcome o;
      try {
        o = run_experiment(d, r.spec.settings, cv_seed);
      } catch (const std::exception& e) {
        o.seed = d.seed;
        o.N = d.N;
        o.T = d.T;
        o.sigma_eps = d.sigma_eps;
        o.status = std::string("error: ") + e.what();
      }
      o.run = job.run;
      r.runs[job.setting][job.run] = std::move(o);
      const std::size_t n = ++done;
      if (progress) {
        std::lock_guard<std::mutex> lock(progress_mutex);
        progress(n, jobs.size());
      }
    }
  };
  const int w = std::max(1, std::min<int>(spec.workers, static_cast<int>(jobs.size())));
  if (w == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < w; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return r;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

void write_runs_csv(std::ostream& os, const ReplicationResult& r) {
  os << "setting,value,run,seed,status,N,T,sigma_eps,true_size_H,true_size_beta,variant,tau_hat,"
        "size_H,size_beta,rank_L,h_mse,beta_mse,p_value,converged\n";
  for (std::size_t s = 0; s < r.settings.size(); ++s) {
    for (const RunOutcome& o : r.runs[s]) {
      const std::string head = r.settings[s].name + "," + format_double(r.settings[s].value) + "," +
                               std::to_string(o.run) + "," + std::to_string(o.seed) + "," +
                               csv_field(o.status) + "," + std::to_string(o.N) + "," +
                               std::to_string(o.T) + "," + format_double(o.sigma_eps) + "," +
                               std::to_string(o.true_size_H) + "," + std::to_string(o.true_size_beta);
      if (o.variants.empty()) {
        os << head << ",,,,,,,,,\n";
        continue;
      }
      for (const VariantOutcome& v : o.variants) {
        os << head << ',' << v.variant << ',' << format_double(v.tau_hat) << ','
           << format_double(v.size_H) << ',' << format_double(v.size_beta) << ','
           << format_double(v.rank_L) << ',' << format_double(v.h_mse) << ','
           << format_double(v.beta_mse) << ',' << (v.p_value >= 0.0 ? format_double(v.p_value) : "")
           << ',' << (v.converged ? 1 : 0) << '\n';
      }
    }
  }
}

void write_aggregate_csv(std::ostream& os, const ReplicationResult& r) {
  const std::string& target = r.spec.target;
  os << "setting,value,variant,quantity,statistic,result,n\n";
  for (std::size_t s = 0; s < r.settings.size(); ++s) {
    const Setting& st = r.settings[s];
    const double tau = st.dgp.tau;
    std::map<std::string, std::vector<double>> tau_hat, indexed, ratio, hmse, pvals;
    for (const RunOutcome& o : r.runs[s]) {
      if (o.status != "ok") continue;
      double base = -1.0;
      for (const auto& v : o.variants) {
        if (v.variant == "imp0") base = (v.tau_hat - tau) * (v.tau_hat - tau);
      }
      for (const auto& v : o.variants) {
        tau_hat[v.variant].push_back(v.tau_hat);
        if (base > 0.0) indexed[v.variant].push_back((v.tau_hat - tau) * (v.tau_hat - tau) / base);
        if (o.true_size_H > 0) ratio[v.variant].push_back(v.size_H / static_cast<double>(o.true_size_H));
        hmse[v.variant].push_back(v.h_mse);
        if (v.p_value >= 0.0) pvals[v.variant].push_back(v.p_value);
      }
    }
    auto row = [&](const std::string& variant, const std::string& quantity, const std::string& stat,
                   double value, std::size_t n) {
      os << st.name << ',' << format_double(st.value) << ',' << variant << ',' << quantity << ','
         << stat << ',' << format_double(value) << ',' << n << '\n';
    };
    auto box = [&](const std::string& quantity, const std::map<std::string, std::vector<double>>& data) {
      for (const auto& name : variant_names()) {
        const auto it = data.find(name);
        if (it == data.end() || it->second.empty()) continue;
        const auto& v = it->second;
        const std::size_t n = v.size();
        row(name, quantity, "min", quantile(v, 0.0), n);
        row(name, quantity, "q25", quantile(v, 0.25), n);
        row(name, quantity, "median", quantile(v, 0.5), n);
        row(name, quantity, "q75", quantile(v, 0.75), n);
        row(name, quantity, "max", quantile(v, 1.0), n);
      }
    };
    auto medians = [&](const std::string& quantity, const std::map<std::string, std::vector<double>>& data) {
      for (const auto& name : variant_names()) {
        const auto it = data.find(name);
        if (it == data.end() || it->second.empty()) continue;
        row(name, quantity, "median", quantile(it->second, 0.5), it->second.size());
      }
    };
    if (target == "fig3") {
      box("tau_hat", tau_hat);
    } else if (target == "fig4" || target == "fig8") {
      medians("indexed_squared_error", indexed);
    } else if (target == "fig5" || target == "fig10") {
      box("size_ratio_H", ratio);
    } else if (target == "fig9") {
      box("h_mse", hmse);
    } else {
      box("tau_hat", tau_hat);
      for (const auto& name : variant_names()) {
        const auto it = pvals.find(name);
        if (it == pvals.end() || it->second.empty()) continue;
        for (double alpha : {0.05, 0.1}) {
          const auto rej = std::count_if(it->second.begin(), it->second.end(),
                                         [&](double p) { return p <= alpha; });
          row(name, "p_value", "rejection_rate_" + format_double(alpha),
              static_cast<double>(rej) / static_cast<double>(it->second.size()), it->second.size());
        }
      }
    }
  }
}

}  // namespace mcpanel
