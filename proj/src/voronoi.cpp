#include "moe/voronoi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace moe {

namespace {

double theta_distance_sq(const ExpertComponent& c, const ExpertComponent& s) {
  const double db = c.b - s.b;
  const double ds = c.sigma - s.sigma;
  return (c.a - s.a).squaredNorm() + db * db + ds * ds;
}

// Per-atom pieces of the loss, with translation-independent parts precomputed.
struct AtomTerm {
  double weight = 0.0;
  Eigen::VectorXd beta1_offset;  // beta1_i - beta1*_j
  double coupled_sq = 0.0;       // squared norm of the parts sharing a norm with beta1
  double separate_sq = 0.0;      // (a, sigma) group for fine-grained cells
  int order = 1;                 // 1: first-order norm; otherwise rbar of the cell
};

struct LossTerms {
  std::vector<AtomTerm> atoms;
  std::vector<double> cell_weight;  // sum of exp(beta0_i) over the cell
  std::vector<double> true_weight;  // exp(beta0*_j)

  double evaluate(double t1, const Eigen::VectorXd& t2, double* grad_t1,
                  Eigen::VectorXd* grad_t2) const {
    double value = 0.0;
    if (grad_t1) *grad_t1 = 0.0;
    if (grad_t2) grad_t2->setZero(t2.size());
    for (const auto& atom : atoms) {
      const Eigen::VectorXd u = atom.beta1_offset - t2;
      const double sq = u.squaredNorm() + atom.coupled_sq;
      if (atom.order == 1) {
        const double norm = std::sqrt(sq);
        value += atom.weight * norm;
        // Zero subgradient at the kink.
        if (grad_t2 && norm > 0.0) *grad_t2 -= atom.weight / norm * u;
      } else {
        const double r = atom.order;
        value += atom.weight * (std::pow(sq, 0.5 * r) + std::pow(atom.separate_sq, 0.25 * r));
        if (grad_t2) *grad_t2 -= atom.weight * r * std::pow(sq, 0.5 * r - 1.0) * u;
      }
    }
    const double scale = std::exp(t1);
    for (std::size_t j = 0; j < true_weight.size(); ++j) {
      const double target = true_weight[j] * scale;
      const double diff = cell_weight[j] - target;
      value += std::abs(diff);
      if (grad_t1 && diff != 0.0) *grad_t1 += (diff > 0.0 ? -target : target);
    }
    return value;
  }
};

LossTerms build_terms(const MixingMeasure& g, const MixingMeasure& gstar,
                      const VoronoiAssignment& assignment, bool fine_grained) {
  if (g.dim() != gstar.dim()) throw std::invalid_argument("measures have different dimensions");
  if (assignment.cell_of.size() != g.size() || assignment.cells.size() != gstar.size()) {
    throw std::invalid_argument("Voronoi assignment does not match the measures");
  }
  LossTerms terms;
  terms.cell_weight.assign(gstar.size(), 0.0);
  for (std::size_t j = 0; j < gstar.size(); ++j) terms.true_weight.push_back(gstar.weight(j));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t j = assignment.cell_of[i];
    const auto& c = g[i];
    const auto& s = gstar[j];
    AtomTerm atom;
    atom.weight = g.weight(i);
    atom.beta1_offset = c.beta1 - s.beta1;
    const double db = c.b - s.b;
    const double ds = c.sigma - s.sigma;
    const double da_sq = (c.a - s.a).squaredNorm();
    const std::size_t cell_size = assignment.cells[j].size();
    if (fine_grained && cell_size > 1) {
      atom.order = rbar(cell_size).value;
      atom.coupled_sq = db * db;
      atom.separate_sq = da_sq + ds * ds;
    } else {
      atom.coupled_sq = da_sq + db * db + ds * ds;
    }
    terms.cell_weight[j] += atom.weight;
    terms.atoms.push_back(std::move(atom));
  }
  return terms;
}

Eigen::VectorXd project(const TranslationBox& box, Eigen::VectorXd t) {
  // t = (t1, t2...)
  t[0] = box.t1.clamp(t[0]);
  for (std::size_t u = 0; u < box.t2.size(); ++u) {
    const auto idx = static_cast<Eigen::Index>(u + 1);
    t[idx] = box.t2[u].clamp(t[idx]);
  }
  return t;
}

// Projected subgradient with a fixed step length per stage; the step halves
// between stages and each stage restarts from the best point found so far.
LossResult minimize_translation(const LossTerms& terms, const MixingMeasure& g,
                                const MixingMeasure& gstar, const ThetaBox& theta,
                                const TranslationSolverConfig& cfg, VoronoiAssignment assignment) {
  cfg.validate();
  const auto d = static_cast<Eigen::Index>(gstar.dim());
  const TranslationBox box = cfg.box ? *cfg.box : TranslationBox::feasible(gstar, theta);
  if (box.t2.size() != static_cast<std::size_t>(d)) {
    throw std::invalid_argument("translation box dimension mismatch");
  }

  Eigen::VectorXd t(d + 1);
  t[0] = cfg.t1_start;
  if (cfg.t2_start) {
    if (cfg.t2_start->size() != d) throw std::invalid_argument("t2 start has wrong dimension");
    t.tail(d) = *cfg.t2_start;
  } else {
    t.tail(d).setZero();
  }
  t = project(box, t);

  auto eval = [&](const Eigen::VectorXd& p, Eigen::VectorXd* grad) {
    if (!grad) return terms.evaluate(p[0], p.tail(d), nullptr, nullptr);
    double g1 = 0.0;
    Eigen::VectorXd g2(d);
    const double v = terms.evaluate(p[0], p.tail(d), &g1, &g2);
    grad->resize(d + 1);
    (*grad)[0] = g1;
    grad->tail(d) = g2;
    return v;
  };

  Eigen::VectorXd best_t = t;
  double best = eval(t, nullptr);
  double step = cfg.step > 0.0 ? cfg.step : 0.01 * (1.0 + g.sup_norm());
  const std::size_t per_stage = std::max<std::size_t>(1, cfg.iterations / cfg.stages);
  std::size_t used = 0;
  Eigen::VectorXd grad;
  for (std::size_t stage = 0; stage < cfg.stages && used < cfg.iterations; ++stage) {
    t = best_t;
    for (std::size_t it = 0; it < per_stage && used < cfg.iterations; ++it, ++used) {
      eval(t, &grad);
      const double norm = grad.norm();
      if (norm == 0.0) break;
      t = project(box, t - (step / norm) * grad);
      const double v = eval(t, nullptr);
      if (v < best) {
        best = v;
        best_t = t;
      }
    }
    step *= 0.5;
  }

  LossResult out;
  out.value = best;
  out.t1 = best_t[0];
  out.t2 = best_t.tail(d);
  out.assignment = std::move(assignment);
  return out;
}

}  // namespace

bool VoronoiAssignment::exact_fitted() const {
  return cell_of.size() == cells.size() &&
         std::ranges::all_of(cells, [](const auto& c) { return c.size() == 1; });
}

std::size_t VoronoiAssignment::largest_cell() const {
  std::size_t m = 0;
  for (const auto& c : cells) m = std::max(m, c.size());
  return m;
}

VoronoiAssignment voronoi_cells(const MixingMeasure& g, const MixingMeasure& gstar) {
  if (g.dim() != gstar.dim()) throw std::invalid_argument("measures have different dimensions");
  for (std::size_t j = 0; j < gstar.size(); ++j) {
    for (std::size_t l = j + 1; l < gstar.size(); ++l) {
      if (theta_distance_sq(gstar[j], gstar[l]) == 0.0) {
        throw std::invalid_argument("true atoms " + std::to_string(j + 1) + " and " +
                                    std::to_string(l + 1) + " share (a, b, sigma)");
      }
    }
  }
  VoronoiAssignment out;
  out.cells.resize(gstar.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::size_t best = 0;
    double best_sq = theta_distance_sq(g[i], gstar[0]);
    for (std::size_t j = 1; j < gstar.size(); ++j) {
      const double sq = theta_distance_sq(g[i], gstar[j]);
      if (sq < best_sq) {
        best_sq = sq;
        best = j;
      }
    }
    out.cells[best].push_back(i);
    out.cell_of.push_back(best);
    out.distances.push_back(std::sqrt(best_sq));
  }
  return out;
}

TranslationBox TranslationBox::feasible(const MixingMeasure& gstar, const ThetaBox& theta) {
  if (gstar.dim() != theta.dim()) throw std::invalid_argument("box dimension mismatch");
  TranslationBox box;
  box.t1 = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  box.t2.assign(gstar.dim(), box.t1);
  for (const auto& c : gstar) {
    box.t1.lo = std::max(box.t1.lo, theta.beta0.lo - c.beta0);
    box.t1.hi = std::min(box.t1.hi, theta.beta0.hi - c.beta0);
    for (std::size_t u = 0; u < gstar.dim(); ++u) {
      const double v = c.beta1[static_cast<Eigen::Index>(u)];
      box.t2[u].lo = std::max(box.t2[u].lo, theta.beta1[u].lo - v);
      box.t2[u].hi = std::min(box.t2[u].hi, theta.beta1[u].hi - v);
    }
  }
  if (box.t1.lo > box.t1.hi) throw std::invalid_argument("true measure lies outside Theta");
  for (const auto& iv : box.t2) {
    if (iv.lo > iv.hi) throw std::invalid_argument("true measure lies outside Theta");
  }
  return box;
}

TranslationBox TranslationBox::intersect(const TranslationBox& other) const {
  if (t2.size() != other.t2.size()) throw std::invalid_argument("translation box dimension mismatch");
  TranslationBox out;
  out.t1 = {std::max(t1.lo, other.t1.lo), std::min(t1.hi, other.t1.hi)};
  for (std::size_t u = 0; u < t2.size(); ++u) {
    out.t2.push_back({std::max(t2[u].lo, other.t2[u].lo), std::min(t2[u].hi, other.t2[u].hi)});
  }
  return out;
}

bool TranslationBox::contains(double a, const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (!t1.contains(a) || static_cast<std::size_t>(b.size()) != t2.size()) return false;
  for (std::size_t u = 0; u < t2.size(); ++u) {
    if (!t2[u].contains(b[static_cast<Eigen::Index>(u)])) return false;
  }
  return true;
}

void TranslationSolverConfig::validate() const {
  if (step < 0.0) throw std::invalid_argument("solver.step must be positive (or 0 for default)");
  if (iterations < 1) throw std::invalid_argument("solver.iterations must be at least 1");
  if (stages < 1) throw std::invalid_argument("solver.stages must be at least 1");
}

double loss_d1_at(const MixingMeasure& g, const MixingMeasure& gstar,
                  const VoronoiAssignment& assignment, double t1,
                  const Eigen::Ref<const Eigen::VectorXd>& t2) {
  if (g.size() != gstar.size() || !assignment.exact_fitted()) {
    throw std::invalid_argument(
        "D1 needs one fitted atom per Voronoi cell; use loss_d2 for over-fitted measures");
  }
  const LossTerms terms = build_terms(g, gstar, assignment, false);
  return terms.evaluate(t1, t2, nullptr, nullptr);
}

double loss_d2_at(const MixingMeasure& g, const MixingMeasure& gstar,
                  const VoronoiAssignment& assignment, double t1,
                  const Eigen::Ref<const Eigen::VectorXd>& t2) {
  const LossTerms terms = build_terms(g, gstar, assignment, true);
  return terms.evaluate(t1, t2, nullptr, nullptr);
}

LossResult loss_d1(const MixingMeasure& g, const MixingMeasure& gstar, const ThetaBox& theta,
                   const TranslationSolverConfig& cfg) {
  VoronoiAssignment assignment = voronoi_cells(g, gstar);
  if (g.size() != gstar.size() || !assignment.exact_fitted()) {
    throw std::invalid_argument(
        "D1 needs one fitted atom per Voronoi cell; use loss_d2 for over-fitted measures");
  }
  const LossTerms terms = build_terms(g, gstar, assignment, false);
  return minimize_translation(terms, g, gstar, theta, cfg, std::move(assignment));
}

LossResult loss_d2(const MixingMeasure& g, const MixingMeasure& gstar, const ThetaBox& theta,
                   const TranslationSolverConfig& cfg) {
  VoronoiAssignment assignment = voronoi_cells(g, gstar);
  const LossTerms terms = build_terms(g, gstar, assignment, true);
  return minimize_translation(terms, g, gstar, theta, cfg, std::move(assignment));
}

RbarValue rbar(std::size_t m) {
  if (m < 2) throw std::invalid_argument("rbar is defined for cells with at least two atoms");
  if (m == 2) return {4, false};
  if (m == 3) return {6, false};
  return {static_cast<int>(2 * m), true};
}

}  // namespace moe
