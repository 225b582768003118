#include "moe/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "moe/random.hpp"

namespace moe {

namespace {

bool all_finite(const ExpertComponent& c) {
  return std::isfinite(c.beta0) && c.beta1.allFinite() && c.a.allFinite() && std::isfinite(c.b) &&
         std::isfinite(c.sigma);
}

std::string describe(const char* name, double v, const Interval& iv) {
  std::ostringstream os;
  os.precision(17);
  os << name << "=" << v << " outside [" << iv.lo << ", " << iv.hi << "]";
  return os.str();
}

void require_dim(const MixingMeasure& g, Eigen::Index n) {
  if (static_cast<std::size_t>(n) != g.dim()) {
    throw std::invalid_argument("covariate dimension " + std::to_string(n) +
                                " does not match measure dimension " + std::to_string(g.dim()));
  }
}

// Gating logits and expert log-densities for one observation; returns the log density.
double log_joint_terms(const MixingMeasure& g, const Eigen::Ref<const Eigen::VectorXd>& x,
                       double y, Eigen::VectorXd& log_gate, Eigen::VectorXd& log_joint) {
  const auto k = static_cast<Eigen::Index>(g.size());
  log_gate.resize(k);
  log_joint.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& c = g[static_cast<std::size_t>(i)];
    log_gate[i] = c.beta1.dot(x) + c.beta0;
  }
  const double m = log_gate.maxCoeff();
  const double lse_gate = m + std::log((log_gate.array() - m).exp().sum());
  log_gate.array() -= lse_gate;
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& c = g[static_cast<std::size_t>(i)];
    log_joint[i] = log_gate[i] + gaussian_log_density(y, c.a.dot(x) + c.b, c.sigma);
  }
  const double mj = log_joint.maxCoeff();
  return mj + std::log((log_joint.array() - mj).exp().sum());
}

}  // namespace

bool ExpertComponent::operator==(const ExpertComponent& other) const {
  return beta0 == other.beta0 && beta1.size() == other.beta1.size() &&
         a.size() == other.a.size() && beta1 == other.beta1 && a == other.a && b == other.b &&
         sigma == other.sigma;
}

MixingMeasure::MixingMeasure(std::vector<ExpertComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixing measure needs at least one component");
  dim_ = components_.front().dim();
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    if (c.dim() != dim_ || static_cast<std::size_t>(c.beta1.size()) != dim_) {
      throw std::invalid_argument("component " + std::to_string(i + 1) +
                                  " has inconsistent dimension");
    }
    if (!all_finite(c)) {
      throw std::invalid_argument("component " + std::to_string(i + 1) + " has non-finite fields");
    }
    if (!(c.sigma > 0.0)) {
      throw std::invalid_argument("component " + std::to_string(i + 1) +
                                  " has non-positive variance");
    }
  }
}

double MixingMeasure::weight(std::size_t i) const { return std::exp(components_[i].beta0); }

double MixingMeasure::total_weight() const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += weight(i);
  return s;
}

double MixingMeasure::sup_norm() const {
  double s = 0.0;
  for (const auto& c : components_) {
    s = std::max({s, std::abs(c.beta0), std::abs(c.b), std::abs(c.sigma)});
    if (dim_ > 0) s = std::max({s, c.beta1.cwiseAbs().maxCoeff(), c.a.cwiseAbs().maxCoeff()});
  }
  return s;
}

ThetaBox ThetaBox::with_defaults(std::size_t dim) {
  ThetaBox box;
  box.beta1.assign(dim, Interval{-5.0, 5.0});
  box.a.assign(dim, Interval{-5.0, 5.0});
  box.covariate.assign(dim, Interval{-1.0, 1.0});
  return box;
}

void ThetaBox::validate() const {
  auto check = [](const Interval& iv, const std::string& name) {
    if (!(iv.lo < iv.hi)) throw std::invalid_argument("empty parameter interval for " + name);
  };
  check(beta0, "beta0");
  check(b, "b");
  check(sigma, "sigma");
  if (!(sigma.lo > 0.0)) throw std::invalid_argument("sigma_min must be positive");
  if (beta1.size() != a.size() || a.size() != covariate.size()) {
    throw std::invalid_argument("parameter box dimensions disagree");
  }
  for (std::size_t u = 0; u < beta1.size(); ++u) {
    check(beta1[u], "beta1[" + std::to_string(u + 1) + "]");
    check(a[u], "a[" + std::to_string(u + 1) + "]");
    check(covariate[u], "x[" + std::to_string(u + 1) + "]");
  }
}

std::optional<std::string> ThetaBox::violation(const ExpertComponent& c) const {
  if (c.dim() != dim()) return "dimension " + std::to_string(c.dim()) + " != box dimension " +
                               std::to_string(dim());
  if (!beta0.contains(c.beta0)) return describe("beta0", c.beta0, beta0);
  for (std::size_t u = 0; u < dim(); ++u) {
    const auto ui = static_cast<Eigen::Index>(u);
    if (!beta1[u].contains(c.beta1[ui]))
      return describe(("beta1[" + std::to_string(u + 1) + "]").c_str(), c.beta1[ui], beta1[u]);
    if (!a[u].contains(c.a[ui]))
      return describe(("a[" + std::to_string(u + 1) + "]").c_str(), c.a[ui], a[u]);
  }
  if (!b.contains(c.b)) return describe("b", c.b, b);
  if (!sigma.contains(c.sigma)) return describe("sigma", c.sigma, sigma);
  return std::nullopt;
}

std::optional<std::string> ThetaBox::violation(const MixingMeasure& g) const {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (auto v = violation(g[i])) return "component " + std::to_string(i + 1) + ": " + *v;
  }
  return std::nullopt;
}

void ThetaBox::require_contains(const MixingMeasure& g) const {
  if (auto v = violation(g)) throw std::out_of_range("parameter outside Theta: " + *v);
}

ExpertComponent ThetaBox::project(ExpertComponent c) const {
  c.beta0 = beta0.clamp(c.beta0);
  for (std::size_t u = 0; u < dim(); ++u) {
    const auto ui = static_cast<Eigen::Index>(u);
    c.beta1[ui] = beta1[u].clamp(c.beta1[ui]);
    c.a[ui] = a[u].clamp(c.a[ui]);
  }
  c.b = b.clamp(c.b);
  c.sigma = sigma.clamp(c.sigma);
  return c;
}

MixingMeasure ThetaBox::project(const MixingMeasure& g) const {
  std::vector<ExpertComponent> out;
  out.reserve(g.size());
  for (const auto& c : g) out.push_back(project(c));
  return MixingMeasure(std::move(out));
}

bool ThetaBox::covariate_contains(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  for (std::size_t u = 0; u < dim(); ++u) {
    if (!covariate[u].contains(x[static_cast<Eigen::Index>(u)])) return false;
  }
  return true;
}

double ThetaBox::covariate_l1_radius() const {
  double r = 0.0;
  for (const auto& iv : covariate) r += std::max(std::abs(iv.lo), std::abs(iv.hi));
  return r;
}

double gaussian_log_density(double y, double mean, double variance) {
  const double r = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

double gaussian_density(double y, double mean, double variance) {
  return std::exp(gaussian_log_density(y, mean, variance));
}

Eigen::VectorXd softmax_gate(const MixingMeasure& g, const Eigen::Ref<const Eigen::VectorXd>& x) {
  require_dim(g, x.size());
  Eigen::VectorXd logits(static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    logits[static_cast<Eigen::Index>(i)] = g[i].beta1.dot(x) + g[i].beta0;
  }
  Eigen::VectorXd w = (logits.array() - logits.maxCoeff()).exp();
  return w / w.sum();
}

double log_conditional_density(const MixingMeasure& g,
                               const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
  require_dim(g, x.size());
  if (!x.allFinite() || !std::isfinite(y)) throw std::domain_error("non-finite covariate or response");
  Eigen::VectorXd log_gate, log_joint;
  return log_joint_terms(g, x, y, log_gate, log_joint);
}

double conditional_density(const MixingMeasure& g, const Eigen::Ref<const Eigen::VectorXd>& x,
                           double y) {
  require_dim(g, x.size());
  if (!x.allFinite() || !std::isfinite(y)) throw std::domain_error("non-finite covariate or response");
  const Eigen::VectorXd gate = softmax_gate(g, x);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    s += gate[static_cast<Eigen::Index>(i)] * gaussian_density(y, g[i].a.dot(x) + g[i].b, g[i].sigma);
  }
  return s;
}

MixingMeasure translate_unchecked(const MixingMeasure& g, double t1,
                                  const Eigen::Ref<const Eigen::VectorXd>& t2) {
  require_dim(g, t2.size());
  std::vector<ExpertComponent> out(g.begin(), g.end());
  for (auto& c : out) {
    c.beta0 += t1;
    c.beta1 += t2;
  }
  return MixingMeasure(std::move(out));
}

MixingMeasure translate(const MixingMeasure& g, double t1,
                        const Eigen::Ref<const Eigen::VectorXd>& t2, const ThetaBox& box) {
  MixingMeasure out = translate_unchecked(g, t1, t2);
  box.require_contains(out);
  return out;
}

Dataset sample(const MixingMeasure& g, const ThetaBox& box, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample size must be at least 1");
  if (box.dim() != g.dim()) throw std::invalid_argument("covariate box dimension mismatch");
  const auto d = static_cast<Eigen::Index>(g.dim());
  Dataset data;
  data.seed = seed;
  data.x.resize(static_cast<Eigen::Index>(n), d);
  data.y.resize(static_cast<Eigen::Index>(n));

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index u = 0; u < d; ++u) {
      const auto& iv = box.covariate[static_cast<std::size_t>(u)];
      x[u] = iv.lo + iv.width() * unit(rng);
    }
    const Eigen::VectorXd gate = softmax_gate(g, x);
    const double pick = unit(rng);
    std::size_t j = 0;
    double acc = gate[0];
    while (pick >= acc && j + 1 < g.size()) acc += gate[static_cast<Eigen::Index>(++j)];
    const auto& c = g[j];
    const auto row = static_cast<Eigen::Index>(i);
    data.x.row(row) = x.transpose();
    data.y[row] = c.a.dot(x) + c.b + std::sqrt(c.sigma) * normal(rng);
  }
  return data;
}

double log_likelihood(const MixingMeasure& g, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  require_dim(g, data.x.cols());
  Eigen::VectorXd log_gate, log_joint;
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    s += log_joint_terms(g, data.x.row(i).transpose(), data.y[i], log_gate, log_joint);
  }
  const double mean = s / static_cast<double>(data.size());
  if (!std::isfinite(mean)) throw std::domain_error("log-likelihood is not finite");
  return mean;
}

std::size_t parameters_per_component(std::size_t dim) { return 2 * dim + 3; }

Eigen::VectorXd to_parameter_vector(const MixingMeasure& g) {
  const std::size_t d = g.dim();
  const auto p = static_cast<Eigen::Index>(parameters_per_component(d));
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::VectorXd theta(p * static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Eigen::Index o = p * static_cast<Eigen::Index>(i);
    theta[o] = g[i].beta0;
    theta.segment(o + 1, di) = g[i].beta1;
    theta.segment(o + 1 + di, di) = g[i].a;
    theta[o + 1 + 2 * di] = g[i].b;
    theta[o + 2 + 2 * di] = g[i].sigma;
  }
  return theta;
}

MixingMeasure from_parameter_vector(const Eigen::Ref<const Eigen::VectorXd>& theta,
                                    std::size_t dim) {
  const auto p = static_cast<Eigen::Index>(parameters_per_component(dim));
  const auto di = static_cast<Eigen::Index>(dim);
  if (theta.size() == 0 || theta.size() % p != 0) {
    throw std::invalid_argument("parameter vector length is not a multiple of 2*dim+3");
  }
  std::vector<ExpertComponent> out(static_cast<std::size_t>(theta.size() / p));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Eigen::Index o = p * static_cast<Eigen::Index>(i);
    out[i].beta0 = theta[o];
    out[i].beta1 = theta.segment(o + 1, di);
    out[i].a = theta.segment(o + 1 + di, di);
    out[i].b = theta[o + 1 + 2 * di];
    out[i].sigma = theta[o + 2 + 2 * di];
  }
  return MixingMeasure(std::move(out));
}

Eigen::VectorXd log_likelihood_gradient(const MixingMeasure& g, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empty dataset");
  require_dim(g, data.x.cols());
  const std::size_t d = g.dim();
  const auto p = static_cast<Eigen::Index>(parameters_per_component(d));
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p * static_cast<Eigen::Index>(g.size()));
  Eigen::VectorXd log_gate, log_joint;
  for (Eigen::Index n = 0; n < data.x.rows(); ++n) {
    const Eigen::VectorXd x = data.x.row(n).transpose();
    const double y = data.y[n];
    const double lse = log_joint_terms(g, x, y, log_gate, log_joint);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto& c = g[i];
      const double post = std::exp(log_joint[ii] - lse);
      const double gate = std::exp(log_gate[ii]);
      const double resid = y - c.a.dot(x) - c.b;
      const Eigen::Index o = p * ii;
      grad[o] += post - gate;
      grad.segment(o + 1, di) += (post - gate) * x;
      grad.segment(o + 1 + di, di) += post * resid / c.sigma * x;
      grad[o + 1 + 2 * di] += post * resid / c.sigma;
      grad[o + 2 + 2 * di] += post * (resid * resid / (2.0 * c.sigma * c.sigma) - 0.5 / c.sigma);
    }
  }
  return grad / static_cast<double>(data.size());
}

}  // namespace moe
