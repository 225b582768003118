#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace moe {

/// One expert of a softmax-gated Gaussian mixture of experts.
///
/// The expert predicts y ~ N(a'x + b, sigma) and is selected with
/// probability proportional to exp(beta1'x + beta0). `sigma` is the
/// Gaussian variance, not the standard deviation.
struct ExpertComponent {
  double beta0 = 0.0;
  Eigen::VectorXd beta1;
  Eigen::VectorXd a;
  double b = 0.0;
  double sigma = 1.0;

  std::size_t dim() const { return static_cast<std::size_t>(a.size()); }
  bool operator==(const ExpertComponent& other) const;
};

/// A finite mixing measure sum_i exp(beta0_i) * delta_(beta1_i, a_i, b_i, sigma_i).
/// Weights exp(beta0_i) are not normalized.
class MixingMeasure {
 public:
  explicit MixingMeasure(std::vector<ExpertComponent> components);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return components_.size(); }
  const ExpertComponent& operator[](std::size_t i) const { return components_[i]; }
  const std::vector<ExpertComponent>& components() const { return components_; }
  auto begin() const { return components_.begin(); }
  auto end() const { return components_.end(); }

  double weight(std::size_t i) const;
  double total_weight() const;
  /// Largest absolute parameter value over all components.
  double sup_norm() const;

  bool operator==(const MixingMeasure& other) const = default;

 private:
  std::vector<ExpertComponent> components_;
  std::size_t dim_ = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  bool contains(double v) const { return v >= lo && v <= hi; }
  double width() const { return hi - lo; }
};

/// Compact parameter box Theta together with the covariate box X.
struct ThetaBox {
  Interval beta0{-5.0, 5.0};
  std::vector<Interval> beta1;
  std::vector<Interval> a;
  Interval b{-5.0, 5.0};
  Interval sigma{0.05, 10.0};
  std::vector<Interval> covariate;

  /// beta0, beta1, a, b in [-5, 5], sigma in [0.05, 10], X = [-1, 1]^dim.
  static ThetaBox with_defaults(std::size_t dim);

  std::size_t dim() const { return covariate.size(); }
  /// Throws std::invalid_argument on an empty interval or sigma_min <= 0.
  void validate() const;

  /// Names the first violated bound, e.g. "component 2: b=6 outside [-5, 5]".
  std::optional<std::string> violation(const ExpertComponent& c) const;
  std::optional<std::string> violation(const MixingMeasure& g) const;
  bool contains(const MixingMeasure& g) const { return !violation(g); }
  void require_contains(const MixingMeasure& g) const;

  /// Coordinate-wise clamping, which is the Euclidean projection onto the box.
  ExpertComponent project(ExpertComponent c) const;
  MixingMeasure project(const MixingMeasure& g) const;

  bool covariate_contains(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Largest |x|_1 over the covariate box.
  double covariate_l1_radius() const;
};

struct Dataset {
  Eigen::MatrixXd x;  // n x d, one covariate per row
  Eigen::VectorXd y;
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }
  std::size_t dim() const { return static_cast<std::size_t>(x.cols()); }
};

/// Softmax gating weights at x, computed with max subtraction.
Eigen::VectorXd softmax_gate(const MixingMeasure& g, const Eigen::Ref<const Eigen::VectorXd>& x);

/// g_G(y | x).
double conditional_density(const MixingMeasure& g, const Eigen::Ref<const Eigen::VectorXd>& x,
                           double y);
/// log g_G(y | x) via log-sum-exp.
double log_conditional_density(const MixingMeasure& g,
                               const Eigen::Ref<const Eigen::VectorXd>& x, double y);

double gaussian_density(double y, double mean, double variance);
double gaussian_log_density(double y, double mean, double variance);

/// beta0 -> beta0 + t1, beta1 -> beta1 + t2; throws if the result leaves `box`.
MixingMeasure translate(const MixingMeasure& g, double t1,
                        const Eigen::Ref<const Eigen::VectorXd>& t2, const ThetaBox& box);
MixingMeasure translate_unchecked(const MixingMeasure& g, double t1,
                                  const Eigen::Ref<const Eigen::VectorXd>& t2);

/// Draws n i.i.d. pairs: x uniform on the covariate box, expert from the gate,
/// y from the chosen Gaussian. Deterministic in `seed`.
Dataset sample(const MixingMeasure& g, const ThetaBox& box, std::size_t n, std::uint64_t seed);

/// Mean log conditional density over the dataset.
double log_likelihood(const MixingMeasure& g, const Dataset& data);

// Flat parameter layout, per component: beta0, beta1[0..d), a[0..d), b, sigma.
std::size_t parameters_per_component(std::size_t dim);
Eigen::VectorXd to_parameter_vector(const MixingMeasure& g);
MixingMeasure from_parameter_vector(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                    std::size_t dim);

/// Gradient of log_likelihood in the flat parameter layout.
Eigen::VectorXd log_likelihood_gradient(const MixingMeasure& g, const Dataset& data);

}  // namespace moe
