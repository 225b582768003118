#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "moe/model.hpp"

namespace moe {

struct FitConfig {
  std::size_t k = 2;
  std::size_t restarts = 4;
  std::size_t max_em_iters = 500;
  double em_tol = 1e-8;  // relative log-likelihood improvement
  std::size_t gating_inner_iters = 3;
  double gating_step = 1.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // restarts run on this many workers

  void validate() const;
};

struct FitResult {
  MixingMeasure measure;
  double final_loglik = 0.0;
  std::size_t iterations = 0;
  std::size_t restart = 0;
  bool converged = false;
  std::vector<double> loglik_trace;     // chosen restart, one entry per outer iteration
  std::vector<double> restart_logliks;  // final value of every restart
  bool ridge_used = false;
  bool empty_component = false;
};

/// Posterior component probabilities, n x k'. Rows sum to one.
Eigen::MatrixXd em_e_step(const MixingMeasure& g, const Dataset& data);

struct ExpertUpdate {
  std::vector<ExpertComponent> components;  // gating fields copied from the input measure
  std::vector<bool> ridge;                  // rank-deficient weighted design was ridged
  std::vector<bool> empty;                  // zero responsibility, component left unchanged
};

/// Responsibility-weighted least squares for (a, b), weighted mean squared
/// residual for sigma, projected onto the box. A clamped (a, b) that would
/// lower the expected complete-data likelihood is rejected in favour of the
/// current one.
ExpertUpdate em_m_step_experts(const Dataset& data, const Eigen::MatrixXd& responsibilities,
                               const MixingMeasure& current, const ThetaBox& box);

struct GatingParams {
  Eigen::VectorXd beta0;  // k
  Eigen::MatrixXd beta1;  // k x d

  static GatingParams from(const MixingMeasure& g);
};

/// (1/n) sum_i sum_j r_ij log gate_j(x_i).
double gating_objective(const Dataset& data, const Eigen::MatrixXd& responsibilities,
                        const GatingParams& params);
GatingParams gating_gradient(const Dataset& data, const Eigen::MatrixXd& responsibilities,
                             const GatingParams& params);

struct GatingUpdate {
  GatingParams params;
  std::vector<double> objective_trace;  // initial value, then one per accepted step
  double step = 0.0;                    // step length to start the next call with
};

/// Projected gradient ascent on gating_objective with step backtracking.
/// Steps halve on a decrease and stay within [2^-40, 64] * base_step
/// (base_step = step when not given).
GatingUpdate em_m_step_gating(const Dataset& data, const Eigen::MatrixXd& responsibilities,
                              const GatingParams& current, const ThetaBox& box,
                              std::size_t inner_iters, double step, double base_step = 0.0);

/// Translation of g (density unchanged) with sum exp(beta0) = 1 and mean beta1 = 0,
/// as far as the box allows.
MixingMeasure canonical_representative(const MixingMeasure& g, const ThetaBox& box);

/// Multi-restart EM for the maximum-likelihood estimate over measures with k components.
FitResult fit_mle(const Dataset& data, const ThetaBox& box, const FitConfig& cfg);

/// One EM run from a given starting measure (exposed for monotonicity checks).
FitResult run_em(const Dataset& data, const ThetaBox& box, const FitConfig& cfg,
                 const MixingMeasure& start);

}  // namespace moe
