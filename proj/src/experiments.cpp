#include "moe/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "moe/io.hpp"
#include "moe/parallel.hpp"
#include "moe/random.hpp"

namespace moe {

namespace {

const char* const kQuantities[] = {"loss", "hellinger", "err_slope_intercept", "err_shape",
                                   "err_weight"};

double quantity_of(const ReplicateRow& row, std::size_t q) {
  switch (q) {
    case 0: return row.loss;
    case 1: return row.hellinger;
    case 2: return row.err_slope_intercept;
    case 3: return row.err_shape;
    default: return row.err_weight;
  }
}

ReplicateRow run_replicate(const ExperimentConfig& cfg, std::size_t n, std::size_t replicate,
                           std::uint64_t seed) {
  ReplicateRow row;
  row.n = n;
  row.replicate = replicate;
  row.seed = seed;
  try {
    const Dataset data = sample(cfg.truth, cfg.box, n, seed);
    FitConfig fit = cfg.fit;
    fit.k = cfg.k;
    fit.seed = derive_seed(seed, {1});
    fit.threads = 1;
    const FitResult est = fit_mle(data, cfg.box, fit);
    row.loglik = est.final_loglik;
    row.converged = est.converged;

    const LossResult loss = cfg.regime == Regime::exact
                                ? loss_d1(est.measure, cfg.truth, cfg.box, cfg.solver)
                                : loss_d2(est.measure, cfg.truth, cfg.box, cfg.solver);
    row.loss = loss.value;

    QuadratureSpec quad = cfg.quadrature;
    quad.seed = derive_seed(seed, {2});
    quad.threads = 1;
    const Estimate h = hellinger(est.measure, cfg.truth, cfg.box, quad);
    row.hellinger = h.value;
    row.hellinger_se = h.se;

    const GroupErrors groups =
        parameter_group_errors(est.measure, cfg.truth, loss.assignment, loss.t1, loss.t2);
    for (std::size_t j = 0; j < cfg.truth.size(); ++j) {
      const bool tracked =
          cfg.regime == Regime::exact || loss.assignment.cells[j].size() > 1;
      if (tracked) {
        row.err_slope_intercept = std::max(row.err_slope_intercept, groups.slope_intercept[j]);
        row.err_shape = std::max(row.err_shape, groups.shape[j]);
      }
      row.err_weight = std::max(row.err_weight, groups.weight[j]);
    }
    const double checks[] = {row.loglik, row.loss, row.hellinger, row.err_slope_intercept,
                             row.err_shape, row.err_weight};
    if (!std::all_of(std::begin(checks), std::end(checks), [](double v) { return std::isfinite(v); })) {
      row.failed = true;
      row.failure = "non-finite result";
    }
  } catch (const std::exception& e) {
    row.failed = true;
    row.failure = e.what();
  }
  return row;
}

}  // namespace

std::string to_string(Regime r) { return r == Regime::exact ? "exact" : "over"; }

Regime regime_from_string(const std::string& s) {
  if (s == "exact") return Regime::exact;
  if (s == "over") return Regime::over;
  throw std::invalid_argument("regime must be 'exact' or 'over', got '" + s + "'");
}

MixingMeasure reference_fixture() {
  auto atom = [](double beta1, double a, double b, double sigma) {
    ExpertComponent c;
    c.beta0 = std::log(0.5);
    c.beta1 = Eigen::VectorXd::Constant(1, beta1);
    c.a = Eigen::VectorXd::Constant(1, a);
    c.b = b;
    c.sigma = sigma;
    return c;
  };
  return MixingMeasure({atom(2.0, 1.0, 0.5, 0.3), atom(-2.0, -1.0, -0.5, 0.5)});
}

void ExperimentConfig::validate() const {
  box.validate();
  if (box.dim() != truth.dim()) throw std::invalid_argument("theta box and truth differ in dimension");
  box.require_contains(truth);
  bool gated = false;
  for (const auto& c : truth) gated = gated || (c.beta1.array() != 0.0).any();
  if (!gated) throw std::invalid_argument("the true measure needs at least one non-zero gating slope beta1");
  if (n_grid.size() < 4) throw std::invalid_argument("the n grid needs at least 4 points");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] == 0) throw std::invalid_argument("sample sizes must be positive");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw std::invalid_argument("the n grid must increase");
  }
  if (replicates < 3) throw std::invalid_argument("replicates must be at least 3");
  if (regime == Regime::exact && k != truth.size()) {
    throw std::invalid_argument("the exact regime needs k equal to the true number of atoms");
  }
  if (regime == Regime::over && k <= truth.size()) {
    throw std::invalid_argument("the over regime needs k larger than the true number of atoms");
  }
  fit.validate();
  solver.validate();
  quadrature.validate();
}

SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 4) throw std::invalid_argument("fit_slope needs at least 4 points");
  const auto m = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [n, v] : points) {
    if (!(n > 0.0)) throw std::invalid_argument("fit_slope needs positive n");
    if (!(v > 0.0)) throw std::invalid_argument("fit_slope needs positive values");
    sx += std::log(n);
    sy += std::log(v);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [n, v] : points) {
    const double dx = std::log(n) - mx, dy = std::log(v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_slope needs distinct n values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

GroupErrors parameter_group_errors(const MixingMeasure& ghat, const MixingMeasure& gstar,
                                   const VoronoiAssignment& assignment, double t1,
                                   const Eigen::Ref<const Eigen::VectorXd>& t2) {
  GroupErrors out;
  const std::size_t k = gstar.size();
  out.slope_intercept.assign(k, 0.0);
  out.shape.assign(k, 0.0);
  out.weight.assign(k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const auto& s = gstar[j];
    double mass = 0.0;
    for (std::size_t i : assignment.cells[j]) {
      const auto& c = ghat[i];
      const double db = c.b - s.b;
      const double ds = c.sigma - s.sigma;
      const double first = std::sqrt((c.beta1 - s.beta1 - t2).squaredNorm() + db * db);
      const double second = std::sqrt((c.a - s.a).squaredNorm() + ds * ds);
      out.slope_intercept[j] = std::max(out.slope_intercept[j], first);
      out.shape[j] = std::max(out.shape[j], second);
      mass += ghat.weight(i);
    }
    out.weight[j] = std::abs(mass - std::exp(s.beta0 + t1));
  }
  return out;
}

const QuantitySummary& RateResult::quantity(const std::string& name) const {
  for (const auto& q : quantities) {
    if (q.name == name) return q;
  }
  throw std::out_of_range("no tracked quantity named '" + name + "'");
}

bool nonincreasing_with_one_inversion(const std::vector<double>& means) {
  std::size_t inversions = 0;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (means[i] > means[i - 1]) ++inversions;
  }
  return inversions <= 1;
}

RateResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::size_t grid = cfg.n_grid.size();
  const std::size_t reps = cfg.replicates;

  RateResult result;
  result.regime = cfg.regime;
  result.rows.resize(grid * reps);
  parallel_for(grid * reps, cfg.threads, [&](std::size_t idx) {
    const std::size_t g = idx / reps;
    const std::size_t r = idx % reps;
    result.rows[idx] = run_replicate(cfg, cfg.n_grid[g], r, derive_seed(cfg.seed, {g, r}));
  });

  result.failures.assign(grid, 0);
  for (std::size_t g = 0; g < grid; ++g) {
    for (std::size_t r = 0; r < reps; ++r) result.failures[g] += result.rows[g * reps + r].failed;
  }

  for (std::size_t q = 0; q < std::size(kQuantities); ++q) {
    QuantitySummary s;
    s.name = kQuantities[q];
    for (std::size_t g = 0; g < grid; ++g) {
      std::vector<double> vals;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& row = result.rows[g * reps + r];
        if (!row.failed) vals.push_back(quantity_of(row, q));
      }
      double mean = 0.0, ss = 0.0;
      for (double v : vals) mean += v;
      if (!vals.empty()) mean /= static_cast<double>(vals.size());
      for (double v : vals) ss += (v - mean) * (v - mean);
      const double se = vals.size() > 1
                            ? std::sqrt(ss / static_cast<double>(vals.size() - 1) /
                                        static_cast<double>(vals.size()))
                            : 0.0;
      s.n.push_back(cfg.n_grid[g]);
      s.mean.push_back(mean);
      s.se.push_back(se);
      s.used.push_back(vals.size());
    }
    result.quantities.push_back(std::move(s));
  }

  if (!cfg.output_dir.empty()) {
    std::filesystem::create_directories(cfg.output_dir);
    write_text_file((std::filesystem::path(cfg.output_dir) / "raw.csv").string(), raw_csv(result));
  }

  for (std::size_t g = 0; g < grid; ++g) {
    if (static_cast<double>(result.failures[g]) > kMaxFailureFraction * static_cast<double>(reps)) {
      std::string reason;
      for (std::size_t r = 0; r < reps && reason.empty(); ++r) reason = result.rows[g * reps + r].failure;
      throw ExperimentError("n=" + std::to_string(cfg.n_grid[g]) + ": " +
                            std::to_string(result.failures[g]) + " of " + std::to_string(reps) +
                            " replicates failed (first: " + reason + ")");
    }
  }

  for (auto& s : result.quantities) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t g = 0; g < grid; ++g) pts.emplace_back(static_cast<double>(s.n[g]), s.mean[g]);
    try {
      s.fit = fit_slope(pts);
    } catch (const std::invalid_argument& e) {
      throw ExperimentError("slope of " + s.name + ": " + e.what());
    }
  }

  if (!cfg.output_dir.empty()) {
    write_text_file((std::filesystem::path(cfg.output_dir) / "summary.csv").string(),
                    summary_csv(result));
  }
  return result;
}

std::string raw_csv(const RateResult& result) {
  std::ostringstream out;
  out << "# format=1\n";
  out << "regime,n,replicate,seed,loglik,converged,failed,loss,hellinger,hellinger_se,"
         "err_slope_intercept,err_shape,err_weight\n";
  for (const auto& r : result.rows) {
    out << to_string(result.regime) << ',' << r.n << ',' << r.replicate << ',' << r.seed << ','
        << format_double(r.loglik) << ',' << r.converged << ',' << r.failed << ','
        << format_double(r.loss) << ',' << format_double(r.hellinger) << ','
        << format_double(r.hellinger_se) << ',' << format_double(r.err_slope_intercept) << ','
        << format_double(r.err_shape) << ',' << format_double(r.err_weight) << '\n';
  }
  return out.str();
}

std::string summary_csv(const RateResult& result) {
  std::ostringstream out;
  out << "# format=1\n";
  out << "regime,quantity,slope,intercept,r2,n,mean,se,used,failed\n";
  for (const auto& q : result.quantities) {
    for (std::size_t g = 0; g < q.n.size(); ++g) {
      out << to_string(result.regime) << ',' << q.name << ',' << format_double(q.fit.slope) << ','
          << format_double(q.fit.intercept) << ',' << format_double(q.fit.r2) << ',' << q.n[g]
          << ',' << format_double(q.mean[g]) << ',' << format_double(q.se[g]) << ',' << q.used[g]
          << ',' << result.failures[g] << '\n';
    }
  }
  return out.str();
}

}  // namespace moe
