#include "moe/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "moe/parallel.hpp"
#include "moe/random.hpp"

namespace moe {

namespace {

constexpr double kRidge = 1e-8;
constexpr double kEmptyResponsibility = 1e-8;

// Gate probabilities and their logarithms at every data point, n x k.
struct GateValues {
  Eigen::MatrixXd log_gate;
  Eigen::MatrixXd gate;
};

void fill_logits(const Dataset& data, const GatingParams& p, Eigen::MatrixXd& out) {
  const Eigen::Index k = p.beta0.size();
  out.resize(data.x.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    out.col(j).setConstant(p.beta0[j]);
    for (Eigen::Index u = 0; u < data.x.cols(); ++u) out.col(j) += p.beta1(j, u) * data.x.col(u);
  }
}

// Column-wise array expressions keep exp/log vectorized.
GateValues gate_values(const Dataset& data, const GatingParams& p) {
  GateValues out;
  fill_logits(data, p, out.log_gate);
  auto& m = out.log_gate;
  const Eigen::Index k = m.cols();
  Eigen::ArrayXd top = m.col(0).array();
  for (Eigen::Index j = 1; j < k; ++j) top = top.max(m.col(j).array());
  out.gate.resize(m.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    m.col(j).array() -= top;
    out.gate.col(j).array() = m.col(j).array().exp();
  }
  const Eigen::ArrayXd total = out.gate.array().rowwise().sum();
  const Eigen::ArrayXd log_total = total.log();
  for (Eigen::Index j = 0; j < k; ++j) {
    m.col(j).array() -= log_total;
    out.gate.col(j).array() /= total;
  }
  return out;
}

double objective_from_gate(const Eigen::MatrixXd& resp, const GateValues& gv) {
  return (resp.array() * gv.log_gate.array()).sum() / static_cast<double>(resp.rows());
}

GatingParams gradient_from_gate(const Dataset& data, const Eigen::MatrixXd& resp,
                                const GateValues& gv) {
  const Eigen::MatrixXd diff = resp - gv.gate;
  const double inv_n = 1.0 / static_cast<double>(data.size());
  GatingParams grad;
  grad.beta0 = diff.colwise().sum().transpose() * inv_n;
  grad.beta1 = diff.transpose() * data.x * inv_n;
  return grad;
}

// Responsibilities and mean log-likelihood from a single pass.
double e_step_with_loglik(const MixingMeasure& g, const Dataset& data, Eigen::MatrixXd& resp) {
  const auto k = static_cast<Eigen::Index>(g.size());
  const auto n = data.x.rows();
  resp = gate_values(data, GatingParams::from(g)).log_gate;
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& c = g[static_cast<std::size_t>(j)];
    const Eigen::ArrayXd resid = data.y.array() - (data.x * c.a).array() - c.b;
    resp.col(j).array() +=
        -0.5 * (std::log(2.0 * std::numbers::pi * c.sigma) + resid.square() / c.sigma);
  }
  Eigen::ArrayXd top = resp.col(0).array();
  for (Eigen::Index j = 1; j < k; ++j) top = top.max(resp.col(j).array());
  for (Eigen::Index j = 0; j < k; ++j) resp.col(j).array() = (resp.col(j).array() - top).exp();
  const Eigen::ArrayXd total_mass = resp.array().rowwise().sum();
  for (Eigen::Index j = 0; j < k; ++j) resp.col(j).array() /= total_mass;
  const double total = (top + total_mass.log()).sum();
  return total / static_cast<double>(n);
}

GatingParams project_gating(GatingParams p, const ThetaBox& box) {
  for (Eigen::Index j = 0; j < p.beta0.size(); ++j) {
    p.beta0[j] = box.beta0.clamp(p.beta0[j]);
    for (Eigen::Index u = 0; u < p.beta1.cols(); ++u) {
      p.beta1(j, u) = box.beta1[static_cast<std::size_t>(u)].clamp(p.beta1(j, u));
    }
  }
  return p;
}

MixingMeasure assemble(const std::vector<ExpertComponent>& experts, const GatingParams& gating) {
  std::vector<ExpertComponent> out = experts;
  for (std::size_t j = 0; j < out.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out[j].beta0 = gating.beta0[jj];
    out[j].beta1 = gating.beta1.row(jj).transpose();
  }
  return MixingMeasure(std::move(out));
}

double weighted_sse(const Dataset& data, const Eigen::VectorXd& w, const Eigen::VectorXd& a,
                    double b) {
  const Eigen::ArrayXd resid = data.y.array() - (data.x * a).array() - b;
  return (w.array() * resid.square()).sum();
}

struct LeastSquares {
  Eigen::VectorXd a;
  double b = 0.0;
  bool ridge = false;
};

// Weighted least squares of y on [x, 1]; ridges a (near) singular design.
LeastSquares weighted_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& w) {
  const auto d = x.cols();
  Eigen::MatrixXd design(x.rows(), d + 1);
  design.leftCols(d) = x;
  design.col(d).setOnes();
  Eigen::MatrixXd normal = design.transpose() * w.asDiagonal() * design;
  const Eigen::VectorXd rhs = design.transpose() * (w.array() * y.array()).matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal, Eigen::EigenvaluesOnly);
  const double top = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  LeastSquares out;
  if (eig.eigenvalues().minCoeff() <= 1e-12 * top) {
    normal.diagonal().array() += kRidge;
    out.ridge = true;
  }
  const Eigen::VectorXd coef = normal.ldlt().solve(rhs);
  out.a = coef.head(d);
  out.b = coef[d];
  return out;
}

MixingMeasure initial_measure(const Dataset& data, const ThetaBox& box, const FitConfig& cfg,
                              std::size_t restart) {
  Rng rng(derive_seed(cfg.seed, {restart}));
  auto uniform = [&rng](const Interval& iv) {
    return std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
  };
  const std::size_t d = data.dim();
  const std::size_t n = data.size();
  const std::size_t sub = std::max<std::size_t>(d + 2, n / cfg.k);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  std::vector<ExpertComponent> comps(cfg.k);
  for (auto& c : comps) {
    c.beta0 = uniform(box.beta0);
    c.beta1.resize(static_cast<Eigen::Index>(d));
    c.a.resize(static_cast<Eigen::Index>(d));
    for (std::size_t u = 0; u < d; ++u) {
      c.beta1[static_cast<Eigen::Index>(u)] = uniform(box.beta1[u]);
      c.a[static_cast<Eigen::Index>(u)] = uniform(box.a[u]);
    }
    c.b = uniform(box.b);
    c.sigma = uniform(box.sigma);

    // Partial Fisher-Yates: the first `sub` entries become a random subsample.
    const std::size_t take = std::min(sub, n);
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(take), static_cast<Eigen::Index>(d));
    Eigen::VectorXd ys(static_cast<Eigen::Index>(take));
    for (std::size_t i = 0; i < take; ++i) {
      xs.row(static_cast<Eigen::Index>(i)) = data.x.row(order[i]);
      ys[static_cast<Eigen::Index>(i)] = data.y[order[i]];
    }
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ys.size());
    const LeastSquares ls = weighted_least_squares(xs, ys, ones);
    c.a = ls.a;
    c.b = ls.b;
    const Eigen::ArrayXd resid = ys.array() - (xs * ls.a).array() - ls.b;
    c.sigma = resid.square().mean();
    c = box.project(std::move(c));
  }
  return MixingMeasure(std::move(comps));
}

// Largest s in [lo_slack, hi_slack] closest to `want`, where every coordinate
// value v + s must stay inside `iv`.
double feasible_shift(double want, const std::vector<double>& values, const Interval& iv) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (double v : values) {
    lo = std::max(lo, iv.lo - v);
    hi = std::min(hi, iv.hi - v);
  }
  if (lo > hi) return 0.0;
  return std::clamp(want, lo, hi);
}

}  // namespace

void FitConfig::validate() const {
  if (k < 1) throw std::invalid_argument("fit.k must be at least 1");
  if (restarts < 1) throw std::invalid_argument("fit.restarts must be at least 1");
  if (max_em_iters < 1) throw std::invalid_argument("fit.max_em_iters must be at least 1");
  if (!(em_tol > 0.0)) throw std::invalid_argument("fit.em_tol must be positive");
  if (!(gating_step > 0.0)) throw std::invalid_argument("fit.gating_step must be positive");
}

GatingParams GatingParams::from(const MixingMeasure& g) {
  GatingParams p;
  const auto k = static_cast<Eigen::Index>(g.size());
  p.beta0.resize(k);
  p.beta1.resize(k, static_cast<Eigen::Index>(g.dim()));
  for (Eigen::Index j = 0; j < k; ++j) {
    p.beta0[j] = g[static_cast<std::size_t>(j)].beta0;
    p.beta1.row(j) = g[static_cast<std::size_t>(j)].beta1.transpose();
  }
  return p;
}

Eigen::MatrixXd em_e_step(const MixingMeasure& g, const Dataset& data) {
  if (data.dim() != g.dim()) throw std::invalid_argument("dataset/measure dimension mismatch");
  Eigen::MatrixXd resp;
  e_step_with_loglik(g, data, resp);
  return resp;
}

ExpertUpdate em_m_step_experts(const Dataset& data, const Eigen::MatrixXd& responsibilities,
                               const MixingMeasure& current, const ThetaBox& box) {
  if (responsibilities.rows() != data.x.rows() ||
      static_cast<std::size_t>(responsibilities.cols()) != current.size()) {
    throw std::invalid_argument("responsibility matrix has the wrong shape");
  }
  ExpertUpdate out;
  out.components = current.components();
  out.ridge.assign(current.size(), false);
  out.empty.assign(current.size(), false);
  for (std::size_t j = 0; j < current.size(); ++j) {
    const Eigen::VectorXd w = responsibilities.col(static_cast<Eigen::Index>(j));
    const double total = w.sum();
    if (!(total > kEmptyResponsibility)) {
      out.empty[j] = true;
      continue;
    }
    auto& c = out.components[j];
    const LeastSquares ls = weighted_least_squares(data.x, data.y, w);
    out.ridge[j] = ls.ridge;

    ExpertComponent candidate = c;
    candidate.a = ls.a;
    candidate.b = ls.b;
    candidate = box.project(std::move(candidate));
    const bool clamped = candidate.a != ls.a || candidate.b != ls.b;
    double sse = weighted_sse(data, w, candidate.a, candidate.b);
    if (clamped) {
      const double sse_current = weighted_sse(data, w, c.a, c.b);
      if (sse_current < sse) {
        candidate.a = c.a;
        candidate.b = c.b;
        sse = sse_current;
      }
    }
    c.a = candidate.a;
    c.b = candidate.b;
    c.sigma = box.sigma.clamp(sse / total);
  }
  return out;
}

double gating_objective(const Dataset& data, const Eigen::MatrixXd& responsibilities,
                        const GatingParams& params) {
  return objective_from_gate(responsibilities, gate_values(data, params));
}

GatingParams gating_gradient(const Dataset& data, const Eigen::MatrixXd& responsibilities,
                             const GatingParams& params) {
  return gradient_from_gate(data, responsibilities, gate_values(data, params));
}

GatingUpdate em_m_step_gating(const Dataset& data, const Eigen::MatrixXd& responsibilities,
                              const GatingParams& current, const ThetaBox& box,
                              std::size_t inner_iters, double step, double base_step) {
  GatingUpdate out;
  out.params = project_gating(current, box);
  GateValues gv = gate_values(data, out.params);
  double value = objective_from_gate(responsibilities, gv);
  out.objective_trace.push_back(value);
  if (!(base_step > 0.0)) base_step = step;
  const double floor = base_step * std::ldexp(1.0, -40);
  const double ceiling = base_step * 64.0;
  for (std::size_t it = 0; it < inner_iters; ++it) {
    const GatingParams grad = gradient_from_gate(data, responsibilities, gv);
    bool accepted = false;
    bool halved = false;
    while (step >= floor) {
      GatingParams trial;
      trial.beta0 = out.params.beta0 + step * grad.beta0;
      trial.beta1 = out.params.beta1 + step * grad.beta1;
      trial = project_gating(std::move(trial), box);
      GateValues trial_gv = gate_values(data, trial);
      const double trial_value = objective_from_gate(responsibilities, trial_gv);
      if (trial_value >= value) {
        out.params = std::move(trial);
        gv = std::move(trial_gv);
        value = trial_value;
        accepted = true;
        break;
      }
      step *= 0.5;
      halved = true;
    }
    if (!accepted) break;
    out.objective_trace.push_back(value);
    // Grow only after a step that needed no backtracking, so that accepted
    // and rejected trials do not alternate.
    if (!halved) step = std::min(step * 2.0, ceiling);
  }
  out.step = std::max(step, floor);
  return out;
}

MixingMeasure canonical_representative(const MixingMeasure& g, const ThetaBox& box) {
  std::vector<double> beta0;
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& c : g) {
    beta0.push_back(c.beta0);
    m = std::max(m, c.beta0);
  }
  double s = 0.0;
  for (double b0 : beta0) s += std::exp(b0 - m);
  const double t1 = feasible_shift(-(m + std::log(s)), beta0, box.beta0);

  Eigen::VectorXd t2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.dim()));
  for (std::size_t u = 0; u < g.dim(); ++u) {
    std::vector<double> coord;
    double mean = 0.0;
    for (const auto& c : g) {
      coord.push_back(c.beta1[static_cast<Eigen::Index>(u)]);
      mean += coord.back();
    }
    mean /= static_cast<double>(g.size());
    t2[static_cast<Eigen::Index>(u)] = feasible_shift(-mean, coord, box.beta1[u]);
  }
  return translate_unchecked(g, t1, t2);
}

FitResult run_em(const Dataset& data, const ThetaBox& box, const FitConfig& cfg,
                 const MixingMeasure& start) {
  MixingMeasure g = box.project(start);
  Eigen::MatrixXd resp;
  double ll = e_step_with_loglik(g, data, resp);
  FitResult out{g, ll, 0, 0, false, {ll}, {}, false, false};
  double step = cfg.gating_step;  // carried between outer iterations
  for (std::size_t it = 1; it <= cfg.max_em_iters; ++it) {
    const ExpertUpdate experts = em_m_step_experts(data, resp, g, box);
    const GatingUpdate gating = em_m_step_gating(data, resp, GatingParams::from(g), box,
                                                 cfg.gating_inner_iters, step, cfg.gating_step);
    step = gating.step;
    out.ridge_used = out.ridge_used || std::ranges::any_of(experts.ridge, [](bool b) { return b; });
    out.empty_component =
        out.empty_component || std::ranges::any_of(experts.empty, [](bool b) { return b; });
    g = assemble(experts.components, gating.params);
    const double next = e_step_with_loglik(g, data, resp);
    out.loglik_trace.push_back(next);
    out.iterations = it;
    const double rel = (next - ll) / std::max(1.0, std::abs(ll));
    ll = next;
    if (rel < cfg.em_tol) {
      out.converged = true;
      break;
    }
  }
  out.measure = g;
  out.final_loglik = ll;
  return out;
}

FitResult fit_mle(const Dataset& data, const ThetaBox& box, const FitConfig& cfg) {
  cfg.validate();
  box.validate();
  if (data.dim() != box.dim()) throw std::invalid_argument("dataset/box dimension mismatch");
  if (data.size() < cfg.k) throw std::invalid_argument("fewer observations than components");

  std::vector<std::optional<FitResult>> runs(cfg.restarts);
  parallel_for(cfg.restarts, cfg.threads, [&](std::size_t r) {
    runs[r] = run_em(data, box, cfg, initial_measure(data, box, cfg, r));
    runs[r]->restart = r;
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r]->final_loglik > runs[best]->final_loglik) best = r;
  }
  FitResult out = std::move(*runs[best]);
  for (const auto& r : runs) out.restart_logliks.push_back(r->final_loglik);
  out.measure = canonical_representative(out.measure, box);

  const bool degenerate = data.y.maxCoeff() == data.y.minCoeff();
  if (degenerate) out.converged = false;
  return out;
}

}  // namespace moe
