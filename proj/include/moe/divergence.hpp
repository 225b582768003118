#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>

#include "moe/model.hpp"

namespace moe {

/// Integration plan for divergences between conditional densities: Monte
/// Carlo over x drawn uniformly from the covariate box, composite trapezoid
/// over y on [-L, L].
struct QuadratureSpec {
  std::size_t x_samples = 2000;
  double y_half_width = 0.0;  // L; 0 sizes it from both measures
  std::size_t y_nodes = 4001;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct Estimate {
  double value = 0.0;
  double se = 0.0;  // Monte Carlo standard error over x
};

/// Raised when the y range leaves more than 1e-10 probability mass outside.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kTailMassLimit = 1e-10;

/// Half-width covering every expert mean over the covariate box plus seven
/// standard deviations.
double auto_half_width(const MixingMeasure& g, const MixingMeasure& h, const ThetaBox& box);

/// E_x[ 1/2 int (sqrt g(y|x) - sqrt g'(y|x))^2 dy ].
Estimate hellinger_sq(const MixingMeasure& g, const MixingMeasure& gp, const ThetaBox& box,
                      const QuadratureSpec& spec = {});

/// sqrt of hellinger_sq, with a delta-method standard error.
Estimate hellinger(const MixingMeasure& g, const MixingMeasure& gp, const ThetaBox& box,
                   const QuadratureSpec& spec = {});

/// E_x[ 1/2 int |g(y|x) - g'(y|x)| dy ]. Sign changes between nodes are
/// split at the linearly interpolated root.
Estimate total_variation(const MixingMeasure& g, const MixingMeasure& gp, const ThetaBox& box,
                         const QuadratureSpec& spec = {});

}  // namespace moe
