#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "moe/divergence.hpp"
#include "moe/estimator.hpp"
#include "moe/model.hpp"
#include "moe/voronoi.hpp"

namespace moe {

enum class Regime { exact, over };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// Two experts in d = 1 with gating slopes +-2, expert slopes 1 and -1,
/// intercepts +-0.5, variances 0.3 and 0.5, and equal weights 1/2.
MixingMeasure reference_fixture();

struct ExperimentConfig {
  MixingMeasure truth = reference_fixture();
  ThetaBox box = ThetaBox::with_defaults(1);
  Regime regime = Regime::exact;
  std::size_t k = 2;
  std::vector<std::size_t> n_grid{1000, 2000, 4000, 8000, 16000, 32000};
  std::size_t replicates = 20;
  FitConfig fit;
  TranslationSolverConfig solver;
  QuadratureSpec quadrature;
  std::uint64_t seed = 0;
  std::size_t threads = 1;  // replicates in flight
  std::string output_dir;   // raw.csv and summary.csv are written here when non-empty

  void validate() const;
};

/// Raised when more than 20% of the replicates at some n fail.
class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kMaxFailureFraction = 0.2;

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of log(value) on log(n). Needs at least four
/// points and positive values.
SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points);

/// Per true atom j, over its Voronoi cell A_j:
///   slope_intercept[j] = max |(beta1_i - beta1*_j - t2, b_i - b*_j)|,
///   shape[j]           = max |(a_i - a*_j, sigma_i - sigma*_j)|,
///   weight[j]          = |sum exp(beta0_i) - exp(beta0*_j + t1)|.
/// An empty cell contributes 0 to the first two groups.
struct GroupErrors {
  std::vector<double> slope_intercept;
  std::vector<double> shape;
  std::vector<double> weight;
};

GroupErrors parameter_group_errors(const MixingMeasure& ghat, const MixingMeasure& gstar,
                                   const VoronoiAssignment& assignment, double t1,
                                   const Eigen::Ref<const Eigen::VectorXd>& t2);

struct ReplicateRow {
  std::size_t n = 0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double loglik = 0.0;
  bool converged = false;
  bool failed = false;
  std::string failure;
  double loss = 0.0;
  double hellinger = 0.0;
  double hellinger_se = 0.0;
  // Maxima over true atoms; in the over-fitted regime the first two run over
  // cells holding more than one fitted atom only.
  double err_slope_intercept = 0.0;
  double err_shape = 0.0;
  double err_weight = 0.0;
};

struct QuantitySummary {
  std::string name;
  std::vector<std::size_t> n;
  std::vector<double> mean;
  std::vector<double> se;
  std::vector<std::size_t> used;  // successful replicates behind each mean
  SlopeFit fit;
};

struct RateResult {
  Regime regime = Regime::exact;
  std::vector<QuantitySummary> quantities;  // loss, hellinger, err_slope_intercept, err_shape, err_weight
  std::vector<std::size_t> failures;        // per n
  std::vector<ReplicateRow> rows;

  const QuantitySummary& quantity(const std::string& name) const;
};

/// Means that decrease along the grid, allowing at most one increase.
bool nonincreasing_with_one_inversion(const std::vector<double>& means);

RateResult run_experiment(const ExperimentConfig& cfg);

std::string raw_csv(const RateResult& result);
std::string summary_csv(const RateResult& result);

}  // namespace moe
