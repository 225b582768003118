#include "moe/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "moe/parallel.hpp"
#include "moe/random.hpp"

namespace moe {

namespace {

constexpr double kTailSigmas = 7.0;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Density of g(. | x) on the y grid.
Eigen::ArrayXd density_on_grid(const MixingMeasure& g, const Eigen::VectorXd& x,
                               const Eigen::ArrayXd& ys) {
  const Eigen::VectorXd gate = softmax_gate(g, x);
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(ys.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = g[i];
    const double mean = c.a.dot(x) + c.b;
    const double norm = gate[static_cast<Eigen::Index>(i)] / std::sqrt(2.0 * std::numbers::pi * c.sigma);
    out += norm * (-(ys - mean).square() / (2.0 * c.sigma)).exp();
  }
  return out;
}

double tail_mass(const MixingMeasure& g, const Eigen::VectorXd& x, double half_width) {
  const Eigen::VectorXd gate = softmax_gate(g, x);
  double mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = g[i];
    const double mean = c.a.dot(x) + c.b;
    const double sd = std::sqrt(c.sigma);
    mass += gate[static_cast<Eigen::Index>(i)] *
            (normal_cdf((-half_width - mean) / sd) + normal_cdf((mean - half_width) / sd));
  }
  return mass;
}

double trapezoid(const Eigen::ArrayXd& f, double h) {
  const Eigen::Index n = f.size();
  return h * (f.sum() - 0.5 * (f[0] + f[n - 1]));
}

// Exact integral of |c| over [0, 1], where c is the cubic through
// (-1, a), (0, b), (1, c), (2, d) and b, c have opposite signs.
double cubic_cell_abs(double a, double b, double c, double d) {
  const double k0 = b;
  const double k1 = -a / 3.0 - b / 2.0 + c - d / 6.0;
  const double k2 = a / 2.0 - b + c / 2.0;
  const double k3 = -a / 6.0 + b / 2.0 - c / 2.0 + d / 6.0;
  const auto poly = [&](double s) { return k0 + s * (k1 + s * (k2 + s * k3)); };
  const auto prim = [&](double s) { return s * (k0 + s * (k1 / 2.0 + s * (k2 / 3.0 + s * k3 / 4.0))); };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((poly(mid) >= 0.0) == (b >= 0.0)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double root = 0.5 * (lo + hi);
  return std::abs(prim(root)) + std::abs(prim(1.0) - prim(root));
}

// Trapezoid rule for |f|. The kink where f changes sign would cost O(h^2),
// so an isolated crossing cell is integrated with a cubic interpolant and the
// neighbouring trapezoid sums get their Euler-Maclaurin end corrections.
// Crossings closer than three nodes fall back to a linear split.
double trapezoid_abs(const Eigen::ArrayXd& f, double h) {
  const Eigen::Index n = f.size();
  const auto crosses = [&](Eigen::Index i) {
    return i >= 0 && i + 1 < n && f[i] != 0.0 && f[i + 1] != 0.0 && (f[i] > 0.0) != (f[i + 1] > 0.0);
  };
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double u = f[i];
    const double v = f[i + 1];
    if (!crosses(i)) {
      total += 0.5 * h * (std::abs(u) + std::abs(v));
      continue;
    }
    bool isolated = i >= 2 && i + 3 < n;
    for (Eigen::Index j = i - 3; isolated && j <= i + 3; ++j) {
      if (j != i && crosses(j)) isolated = false;
    }
    if (!isolated) {
      const double cut = std::abs(u) / (std::abs(u) + std::abs(v));
      total += 0.5 * h * (cut * std::abs(u) + (1.0 - cut) * std::abs(v));
      continue;
    }
    total += h * cubic_cell_abs(f[i - 1], u, v, f[i + 2]);
    const double left = (3.0 * std::abs(u) - 4.0 * std::abs(f[i - 1]) + std::abs(f[i - 2])) / (2.0 * h);
    const double right =
        (-3.0 * std::abs(v) + 4.0 * std::abs(f[i + 2]) - std::abs(f[i + 3])) / (2.0 * h);
    total -= h * h / 12.0 * (left - right);
  }
  // Sign changes through an exact zero: the kink sits on node i.
  for (Eigen::Index i = 3; i + 3 < n; ++i) {
    if (f[i] != 0.0 || !(f[i - 1] * f[i + 1] < 0.0)) continue;
    if (crosses(i - 3) || crosses(i - 2) || crosses(i + 1) || crosses(i + 2)) continue;
    const double left = (-4.0 * std::abs(f[i - 1]) + std::abs(f[i - 2])) / (2.0 * h);
    const double right = (4.0 * std::abs(f[i + 1]) - std::abs(f[i + 2])) / (2.0 * h);
    total -= h * h / 12.0 * (left - right);
  }
  return total;
}

using Integrand = std::function<double(const Eigen::ArrayXd&, const Eigen::ArrayXd&, double)>;

Estimate integrate(const MixingMeasure& g, const MixingMeasure& gp, const ThetaBox& box,
                   const QuadratureSpec& spec, const Integrand& integrand) {
  spec.validate();
  if (g.dim() != gp.dim()) throw std::invalid_argument("measures have different dimensions");
  if (box.dim() != g.dim()) throw std::invalid_argument("covariate box dimension mismatch");

  const bool automatic = spec.y_half_width == 0.0;
  const double half_width = automatic ? auto_half_width(g, gp, box) : spec.y_half_width;
  const auto nodes = static_cast<Eigen::Index>(spec.y_nodes);
  const Eigen::ArrayXd ys = Eigen::ArrayXd::LinSpaced(nodes, -half_width, half_width);
  const double h = 2.0 * half_width / static_cast<double>(nodes - 1);

  const std::size_t n = spec.x_samples;
  const auto d = static_cast<Eigen::Index>(g.dim());
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(n), d);
  Rng rng(spec.seed);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    for (Eigen::Index u = 0; u < d; ++u) {
      const auto& iv = box.covariate[static_cast<std::size_t>(u)];
      xs(i, u) = std::uniform_real_distribution<double>(iv.lo, iv.hi)(rng);
    }
  }

  std::vector<double> values(n);
  std::vector<double> tails(n);
  parallel_for(n, spec.threads, [&](std::size_t i) {
    const Eigen::VectorXd x = xs.row(static_cast<Eigen::Index>(i)).transpose();
    tails[i] = std::max(tail_mass(g, x, half_width), tail_mass(gp, x, half_width));
    values[i] = integrand(density_on_grid(g, x, ys), density_on_grid(gp, x, ys), h);
  });

  const double worst_tail = *std::max_element(tails.begin(), tails.end());
  if (worst_tail > kTailMassLimit) {
    std::ostringstream msg;
    msg << "y range [-" << half_width << ", " << half_width << "] leaves tail mass " << worst_tail
        << " > " << kTailMassLimit << "; use a larger half-width";
    throw QuadratureError(msg.str());
  }

  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double se = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return {mean, se};
}

}  // namespace

void QuadratureSpec::validate() const {
  if (x_samples == 0) throw std::invalid_argument("x_samples must be positive");
  if (y_nodes < 1001) throw std::invalid_argument("y_nodes must be at least 1001");
  if (!(y_half_width >= 0.0) || !std::isfinite(y_half_width)) {
    throw std::invalid_argument("y_half_width must be finite and non-negative");
  }
}

double auto_half_width(const MixingMeasure& g, const MixingMeasure& h, const ThetaBox& box) {
  double width = 0.0;
  for (const MixingMeasure* m : {&g, &h}) {
    for (const auto& c : *m) {
      double reach = std::abs(c.b) + kTailSigmas * std::sqrt(c.sigma);
      for (Eigen::Index u = 0; u < c.a.size(); ++u) {
        const auto& iv = box.covariate[static_cast<std::size_t>(u)];
        reach += std::abs(c.a[u]) * std::max(std::abs(iv.lo), std::abs(iv.hi));
      }
      width = std::max(width, reach);
    }
  }
  return width;
}

Estimate hellinger_sq(const MixingMeasure& g, const MixingMeasure& gp, const ThetaBox& box,
                      const QuadratureSpec& spec) {
  return integrate(g, gp, box, spec, [](const Eigen::ArrayXd& p, const Eigen::ArrayXd& q, double h) {
    return 0.5 * trapezoid((p.sqrt() - q.sqrt()).square(), h);
  });
}

Estimate hellinger(const MixingMeasure& g, const MixingMeasure& gp, const ThetaBox& box,
                   const QuadratureSpec& spec) {
  const Estimate sq = hellinger_sq(g, gp, box, spec);
  const double value = std::sqrt(std::max(sq.value, 0.0));
  return {value, value > 0.0 ? sq.se / (2.0 * value) : std::sqrt(sq.se)};
}

Estimate total_variation(const MixingMeasure& g, const MixingMeasure& gp, const ThetaBox& box,
                         const QuadratureSpec& spec) {
  return integrate(g, gp, box, spec, [](const Eigen::ArrayXd& p, const Eigen::ArrayXd& q, double h) {
    return 0.5 * trapezoid_abs(p - q, h);
  });
}

}  // namespace moe
