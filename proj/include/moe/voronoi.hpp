#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "moe/model.hpp"

namespace moe {

/// Fitted atoms grouped by their nearest true atom in (a, b, sigma).
struct VoronoiAssignment {
  std::vector<std::vector<std::size_t>> cells;  // cells[j]: fitted indices nearest to true atom j
  std::vector<std::size_t> cell_of;             // fitted index -> true index
  std::vector<double> distances;                // fitted index -> distance to its true atom

  bool exact_fitted() const;
  std::size_t largest_cell() const;
};

/// Nearest true atom by Euclidean distance on (a, b, sigma); ties go to the lower index.
VoronoiAssignment voronoi_cells(const MixingMeasure& g, const MixingMeasure& gstar);

/// Feasible translations: gstar's beta0 + t1 and beta1 + t2 stay inside Theta.
struct TranslationBox {
  Interval t1;
  std::vector<Interval> t2;

  static TranslationBox feasible(const MixingMeasure& gstar, const ThetaBox& theta);
  TranslationBox intersect(const TranslationBox& other) const;
  bool contains(double t1, const Eigen::Ref<const Eigen::VectorXd>& t2) const;
};

struct TranslationSolverConfig {
  double step = 0.0;  // initial step length; 0 selects 0.01 * (1 + |G|_inf)
  std::size_t iterations = 10000;
  std::size_t stages = 20;  // the step halves between stages
  std::optional<TranslationBox> box;  // default: TranslationBox::feasible(gstar, theta)
  double t1_start = 0.0;
  std::optional<Eigen::VectorXd> t2_start;

  void validate() const;
};

struct LossResult {
  double value = 0.0;
  double t1 = 0.0;
  Eigen::VectorXd t2;
  VoronoiAssignment assignment;
};

/// The D1 objective at a fixed translation. Throws std::invalid_argument unless
/// every cell holds exactly one fitted atom.
double loss_d1_at(const MixingMeasure& g, const MixingMeasure& gstar,
                  const VoronoiAssignment& assignment, double t1,
                  const Eigen::Ref<const Eigen::VectorXd>& t2);

/// The D2 objective at a fixed translation; any number of fitted atoms.
double loss_d2_at(const MixingMeasure& g, const MixingMeasure& gstar,
                  const VoronoiAssignment& assignment, double t1,
                  const Eigen::Ref<const Eigen::VectorXd>& t2);

/// inf over feasible (t1, t2) of loss_d1_at, by projected subgradient descent.
LossResult loss_d1(const MixingMeasure& g, const MixingMeasure& gstar, const ThetaBox& theta,
                   const TranslationSolverConfig& cfg = {});
LossResult loss_d2(const MixingMeasure& g, const MixingMeasure& gstar, const ThetaBox& theta,
                   const TranslationSolverConfig& cfg = {});

struct RbarValue {
  int value = 0;
  bool conjectural = false;
};

/// Smallest order at which the m-atom polynomial system has no non-trivial
/// solution: 4 for m = 2, 6 for m = 3, and the conjectured 2m beyond.
RbarValue rbar(std::size_t m);

}  // namespace moe
