#include "moe/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace moe::cli {

namespace {

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

std::string grid_string(const std::vector<std::size_t>& grid) {
  std::string s;
  for (std::size_t i = 0; i < grid.size(); ++i) s += (i ? "," : "") + std::to_string(grid[i]);
  return s;
}

Interval interval_from(const KeyValueDocument& doc, const std::string& key, Interval fallback) {
  if (!doc.has(key)) return fallback;
  const Eigen::VectorXd v = doc.get_vector(key);
  if (v.size() != 2) throw ConfigError("key '" + key + "' needs two values lo,hi");
  return {v[0], v[1]};
}

std::string ell1_string(const std::vector<int>& ell1) {
  std::string s;
  for (std::size_t u = 0; u < ell1.size(); ++u) s += (u ? ";" : "") + std::to_string(ell1[u]);
  return s;
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Key/value settings file (format=1)");
  sub->add_option("--set", c.overrides, "Override one setting, key=value (repeatable)");
  sub->add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
}

KeyValueDocument settings(const Common& c) { return load_settings(c.config, c.overrides); }

std::string help_footer() {
  std::ostringstream s;
  s << "\nSettings (config file keys or --set key=value), with defaults:\n";
  for (const auto& k : known_keys()) {
    s << "  " << k.key << " = " << k.default_value << "\n      " << k.help << "\n";
  }
  s << "\nExit codes: 0 success, 1 usage or configuration error, 2 numeric or experiment failure.\n";
  return s.str();
}

}  // namespace

const std::vector<KeyInfo>& known_keys() {
  static const std::vector<KeyInfo> keys = [] {
    const FitConfig f;
    const TranslationSolverConfig t;
    const QuadratureSpec q;
    const polysys::SearchConfig s;
    const ExperimentConfig e;
    return std::vector<KeyInfo>{
        {"theta.beta0", "-5,5", "bounds on beta0"},
        {"theta.beta1", "-5,5", "bounds on every coordinate of beta1"},
        {"theta.a", "-5,5", "bounds on every coordinate of a"},
        {"theta.b", "-5,5", "bounds on b"},
        {"theta.sigma", "0.05,10", "bounds on the expert variance sigma"},
        {"theta.x", "-1,1", "covariate box, per coordinate"},
        {"fit.k", fmt(f.k), "number of fitted experts"},
        {"fit.restarts", fmt(f.restarts), "EM restarts"},
        {"fit.max_em_iters", fmt(f.max_em_iters), "EM iterations per restart"},
        {"fit.em_tol", fmt(f.em_tol), "stop when the relative log-likelihood gain falls below this"},
        {"fit.gating_inner_iters", fmt(f.gating_inner_iters), "gradient steps per gating M-step"},
        {"fit.gating_step", fmt(f.gating_step), "initial gating step length"},
        {"fit.threads", fmt(f.threads), "workers for restarts (0 = all cores)"},
        {"solver.step", fmt(t.step), "initial translation step (0 = 0.01 (1 + |G|_inf))"},
        {"solver.iterations", fmt(t.iterations), "subgradient iterations in total"},
        {"solver.stages", fmt(t.stages), "step halvings spread over the iterations"},
        {"quad.x_samples", fmt(q.x_samples), "Monte Carlo covariate draws"},
        {"quad.y_half_width", fmt(q.y_half_width), "y range [-L, L] (0 = automatic)"},
        {"quad.y_nodes", fmt(q.y_nodes), "trapezoid nodes on the y range (>= 1001)"},
        {"quad.threads", fmt(q.threads), "workers over covariate draws (0 = all cores)"},
        {"search.restarts", fmt(s.restarts), "random starts"},
        {"search.max_iters", fmt(s.max_iters), "Levenberg-Marquardt iterations per start"},
        {"search.init_range", fmt(s.init_range), "starts drawn uniformly in [-x, x]"},
        {"search.min_p5", fmt(s.min_p5), "smallest |p5_j| relative to the largest"},
        {"search.threads", fmt(s.threads), "workers (0 = all cores)"},
        {"experiment.truth", "(built-in two-expert fixture)", "measure document of the true model"},
        {"experiment.regime", to_string(e.regime), "exact or over"},
        {"experiment.k", fmt(e.k), "fitted experts"},
        {"experiment.n_grid", grid_string(e.n_grid), "increasing sample sizes"},
        {"experiment.replicates", fmt(e.replicates), "replicates per sample size (>= 3)"},
        {"experiment.threads", fmt(e.threads), "replicates in flight (0 = all cores)"},
        {"experiment.output", "(none)", "directory for raw.csv and summary.csv"},
    };
  }();
  return keys;
}

KeyValueDocument load_settings(const std::string& config_path,
                               const std::vector<std::string>& overrides) {
  KeyValueDocument doc = config_path.empty() ? KeyValueDocument::parse("format=1\n", "(defaults)")
                                             : KeyValueDocument::read_file(config_path);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + o + "'");
    }
    doc.set(o.substr(0, eq), o.substr(eq + 1));
  }
  std::set<std::string> allowed;
  for (const auto& k : known_keys()) allowed.insert(k.key);
  doc.reject_unknown(allowed);
  return doc;
}

ThetaBox theta_from(const KeyValueDocument& doc, std::size_t dim) {
  ThetaBox box = ThetaBox::with_defaults(dim);
  box.beta0 = interval_from(doc, "theta.beta0", box.beta0);
  box.b = interval_from(doc, "theta.b", box.b);
  box.sigma = interval_from(doc, "theta.sigma", box.sigma);
  const Interval beta1 = interval_from(doc, "theta.beta1", {-5.0, 5.0});
  const Interval a = interval_from(doc, "theta.a", {-5.0, 5.0});
  const Interval x = interval_from(doc, "theta.x", {-1.0, 1.0});
  box.beta1.assign(dim, beta1);
  box.a.assign(dim, a);
  box.covariate.assign(dim, x);
  try {
    box.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("theta: ") + e.what());
  }
  return box;
}

FitConfig fit_from(const KeyValueDocument& doc) {
  FitConfig f;
  f.k = doc.get_uint("fit.k", f.k);
  f.restarts = doc.get_uint("fit.restarts", f.restarts);
  f.max_em_iters = doc.get_uint("fit.max_em_iters", f.max_em_iters);
  f.em_tol = doc.get_double("fit.em_tol", f.em_tol);
  f.gating_inner_iters = doc.get_uint("fit.gating_inner_iters", f.gating_inner_iters);
  f.gating_step = doc.get_double("fit.gating_step", f.gating_step);
  f.threads = doc.get_uint("fit.threads", f.threads);
  return f;
}

TranslationSolverConfig solver_from(const KeyValueDocument& doc) {
  TranslationSolverConfig t;
  t.step = doc.get_double("solver.step", t.step);
  t.iterations = doc.get_uint("solver.iterations", t.iterations);
  t.stages = doc.get_uint("solver.stages", t.stages);
  return t;
}

QuadratureSpec quadrature_from(const KeyValueDocument& doc) {
  QuadratureSpec q;
  q.x_samples = doc.get_uint("quad.x_samples", q.x_samples);
  q.y_half_width = doc.get_double("quad.y_half_width", q.y_half_width);
  q.y_nodes = doc.get_uint("quad.y_nodes", q.y_nodes);
  q.threads = doc.get_uint("quad.threads", q.threads);
  return q;
}

polysys::SearchConfig search_from(const KeyValueDocument& doc) {
  polysys::SearchConfig s;
  s.restarts = doc.get_uint("search.restarts", s.restarts);
  s.max_iters = doc.get_uint("search.max_iters", s.max_iters);
  s.init_range = doc.get_double("search.init_range", s.init_range);
  s.min_p5 = doc.get_double("search.min_p5", s.min_p5);
  s.threads = doc.get_uint("search.threads", s.threads);
  return s;
}

ExperimentConfig experiment_from(const KeyValueDocument& doc, const std::string& base_dir) {
  ExperimentConfig e;
  if (auto truth = doc.find("experiment.truth")) {
    std::filesystem::path p(*truth);
    if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
    e.truth = read_measure(p.string());
  }
  e.box = theta_from(doc, e.truth.dim());
  if (auto regime = doc.find("experiment.regime")) {
    try {
      e.regime = regime_from_string(*regime);
    } catch (const std::invalid_argument& err) {
      throw ConfigError(std::string("experiment.regime: ") + err.what());
    }
  }
  e.k = doc.get_uint("experiment.k", e.k);
  if (doc.has("experiment.n_grid")) {
    const Eigen::VectorXd grid = doc.get_vector("experiment.n_grid");
    e.n_grid.clear();
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      if (!(grid[i] >= 1.0) || grid[i] != std::floor(grid[i])) {
        throw ConfigError("experiment.n_grid: sample sizes must be positive integers");
      }
      e.n_grid.push_back(static_cast<std::size_t>(grid[i]));
    }
  }
  e.replicates = doc.get_uint("experiment.replicates", e.replicates);
  e.threads = doc.get_uint("experiment.threads", e.threads);
  if (auto out = doc.find("experiment.output")) e.output_dir = *out;
  e.fit = fit_from(doc);
  e.solver = solver_from(doc);
  e.quadrature = quadrature_from(doc);
  return e;
}

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Softmax-gated Gaussian mixture of experts: simulation, estimation and rates"};
  app.require_subcommand(1);
  app.footer(help_footer());

  Common common;
  std::string measure_path, data_path, out_path, g_path, gstar_path, mode = "d1", kind = "both";
  std::string solution_path;
  std::size_t n = 0, m = 0, d = 0;
  int r = 0;

  auto* simulate = app.add_subcommand("simulate", "Draw a dataset from a measure document");
  add_common(simulate, common);
  simulate->add_option("--measure", measure_path, "True measure document")->required();
  simulate->add_option("--n", n, "Number of observations")->required();
  simulate->add_option("--out", out_path, "Dataset CSV (default: stdout)");

  auto* fit = app.add_subcommand("fit", "Maximum-likelihood fit by EM");
  add_common(fit, common);
  fit->add_option("--data", data_path, "Dataset CSV")->required();
  fit->add_option("--out", out_path, "Fitted measure document")->required();

  auto* loss = app.add_subcommand("loss", "Voronoi loss between a fitted and a true measure");
  add_common(loss, common);
  loss->add_option("--mode", mode, "d1 or d2")->check(CLI::IsMember({"d1", "d2"}))->capture_default_str();
  loss->add_option("--g", g_path, "Fitted measure document")->required();
  loss->add_option("--gstar", gstar_path, "True measure document")->required();

  auto* divergence = app.add_subcommand("divergence", "Hellinger and total-variation distances");
  add_common(divergence, common);
  divergence->add_option("--kind", kind, "hellinger, tv or both")
      ->check(CLI::IsMember({"hellinger", "tv", "both"}))
      ->capture_default_str();
  divergence->add_option("--g", g_path, "First measure document")->required();
  divergence->add_option("--gstar", gstar_path, "Second measure document")->required();

  auto* poly = app.add_subcommand("polysys", "Polynomial system behind the over-fitted rates");
  poly->require_subcommand(1);
  auto add_shape = [&](CLI::App* sub) {
    sub->add_option("--m", m, "Number of atoms")->required();
    sub->add_option("--d", d, "Covariate dimension")->required();
    sub->add_option("--r", r, "Order")->required();
  };
  auto* build = poly->add_subcommand("build", "Print the equations");
  add_shape(build);
  auto* check = poly->add_subcommand("check", "Residuals of a solution file");
  add_shape(check);
  check->add_option("--solution", solution_path, "Solution document")->required();
  auto* search = poly->add_subcommand("search", "Multi-start search for a non-trivial solution");
  add_shape(search);
  add_common(search, common);
  std::size_t restarts = 0;
  search->add_option("--restarts", restarts, "Random starts (overrides search.restarts)");
  search->add_option("--out", out_path, "Write the solution, or the best candidate, here");

  auto* experiment = app.add_subcommand("experiment", "Convergence-rate experiment");
  add_common(experiment, common);
  experiment->add_option("--out", out_path, "Output directory (overrides experiment.output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    if (*simulate) {
      const auto doc = settings(common);
      const MixingMeasure g = read_measure(measure_path);
      const ThetaBox box = theta_from(doc, g.dim());
      if (n == 0) throw ConfigError("--n must be positive");
      const Dataset data = sample(g, box, n, common.seed);
      if (out_path.empty()) {
        write_dataset_csv(out, data);
      } else {
        write_dataset(out_path, data);
      }
    } else if (*fit) {
      const auto doc = settings(common);
      const Dataset data = read_dataset(data_path);
      const ThetaBox box = theta_from(doc, data.dim());
      FitConfig cfg = fit_from(doc);
      cfg.seed = common.seed;
      const FitResult res = fit_mle(data, box, cfg);
      write_measure(out_path, res.measure);
      nlohmann::json summary = {{"final_loglik", res.final_loglik},
                                {"iterations", res.iterations},
                                {"restart", res.restart},
                                {"converged", res.converged},
                                {"ridge_used", res.ridge_used},
                                {"empty_component", res.empty_component}};
      out << summary.dump() << "\n";
    } else if (*loss) {
      const auto doc = settings(common);
      const MixingMeasure g = read_measure(g_path);
      const MixingMeasure gstar = read_measure(gstar_path);
      if (g.dim() != gstar.dim()) throw ConfigError("--g and --gstar differ in dimension");
      const ThetaBox box = theta_from(doc, gstar.dim());
      const TranslationSolverConfig solver = solver_from(doc);
      const LossResult res =
          mode == "d1" ? loss_d1(g, gstar, box, solver) : loss_d2(g, gstar, box, solver);
      out << "mode=" << mode << "\n";
      out << "value=" << format_double(res.value) << "\n";
      out << "t1=" << format_double(res.t1) << "\n";
      out << "t2=" << format_vector(res.t2) << "\n";
      std::string cells;
      for (std::size_t i = 0; i < res.assignment.cell_of.size(); ++i) {
        cells += (i ? "," : "") + std::to_string(res.assignment.cell_of[i] + 1);
      }
      out << "cell_of=" << cells << "\n";
    } else if (*divergence) {
      const auto doc = settings(common);
      const MixingMeasure g = read_measure(g_path);
      const MixingMeasure gstar = read_measure(gstar_path);
      if (g.dim() != gstar.dim()) throw ConfigError("--g and --gstar differ in dimension");
      const ThetaBox box = theta_from(doc, gstar.dim());
      QuadratureSpec spec = quadrature_from(doc);
      spec.seed = common.seed;
      if (kind != "tv") {
        const Estimate h = hellinger_sq(g, gstar, box, spec);
        out << "hellinger_sq=" << format_double(h.value) << "\n";
        out << "hellinger_sq_se=" << format_double(h.se) << "\n";
      }
      if (kind != "hellinger") {
        const Estimate v = total_variation(g, gstar, box, spec);
        out << "total_variation=" << format_double(v.value) << "\n";
        out << "total_variation_se=" << format_double(v.se) << "\n";
      }
    } else if (*poly) {
      if (m == 0 || d == 0 || r < 1) throw ConfigError("--m and --d must be positive and --r at least 1");
      const polysys::PolySystem sys = polysys::build_system(m, d, r);
      if (*build) {
        out << "equations=" << sys.equations.size() << "\n";
        for (const auto& eq : sys.equations) out << polysys::format_equation(eq, d) << "\n";
      } else if (*check) {
        const auto sol = read_solution(solution_path);
        if (sol.m() != m || sol.d() != d) {
          throw ConfigError(solution_path + ": solution has m=" + std::to_string(sol.m()) +
                            ", d=" + std::to_string(sol.d()) + " but --m " + std::to_string(m) +
                            " --d " + std::to_string(d) + " was given");
        }
        const Eigen::VectorXd res = polysys::evaluate_system(sys, sol);
        out << "index,ell1,ell2,residual\n";
        for (std::size_t q = 0; q < sys.equations.size(); ++q) {
          out << q + 1 << "," << ell1_string(sys.equations[q].ell1) << ","
              << sys.equations[q].ell2 << "," << format_double(res[static_cast<Eigen::Index>(q)])
              << "\n";
        }
        out << "max_residual=" << format_double(res.cwiseAbs().maxCoeff()) << "\n";
        out << "nontrivial=" << (polysys::is_nontrivial(sol) ? "true" : "false") << "\n";
      } else {
        const auto doc = settings(common);
        polysys::SearchConfig cfg = search_from(doc);
        if (restarts > 0) cfg.restarts = restarts;
        cfg.seed = common.seed;
        const polysys::SearchResult res = polysys::search_nontrivial(m, d, r, cfg);
        out << "found=" << (res.found ? "true" : "false") << "\n";
        out << "best_residual=" << format_double(res.best_residual) << "\n";
        out << "restarts_run=" << res.restarts_run << "\n";
        out << "verdict=" << res.verdict() << "\n";
        if (!out_path.empty()) {
          write_text_file(out_path, solution_to_string(res.found ? *res.solution : res.best));
        }
      }
    } else if (*experiment) {
      const auto doc = settings(common);
      const std::string base =
          common.config.empty() ? "" : std::filesystem::path(common.config).parent_path().string();
      ExperimentConfig cfg = experiment_from(doc, base);
      cfg.seed = common.seed;
      if (!out_path.empty()) cfg.output_dir = out_path;
      const RateResult res = run_experiment(cfg);
      for (const auto& q : res.quantities) {
        out << "quantity=" << q.name << " slope=" << format_double(q.fit.slope)
            << " intercept=" << format_double(q.fit.intercept) << " r2=" << format_double(q.fit.r2)
            << "\n";
      }
      std::size_t failed = 0;
      for (std::size_t f : res.failures) failed += f;
      out << "failed_replicates=" << failed << "\n";
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kNumericFailure;
  }
  return kSuccess;
}

int parse_and_dispatch(int argc, const char* const* argv) {
  return parse_and_dispatch(argc, argv, std::cout, std::cerr);
}

}  // namespace moe::cli
