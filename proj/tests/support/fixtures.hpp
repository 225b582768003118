#pragma once

// Shared fixtures and independent reference computations for the tests.
// The oracles here deliberately avoid the library's own helpers.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "moe/model.hpp"
#include "moe/voronoi.hpp"

namespace testing {

inline moe::ExpertComponent atom(double beta0, std::vector<double> beta1, std::vector<double> a,
                                 double b, double sigma) {
  moe::ExpertComponent c;
  c.beta0 = beta0;
  c.beta1 = Eigen::Map<Eigen::VectorXd>(beta1.data(), static_cast<Eigen::Index>(beta1.size()));
  c.a = Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
  c.b = b;
  c.sigma = sigma;
  return c;
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// Random measure with every coordinate in the interior of the default box.
inline moe::MixingMeasure random_measure(std::mt19937_64& rng, std::size_t k, std::size_t d,
                                         double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::uniform_real_distribution<double> s(0.2, 2.0);
  std::vector<moe::ExpertComponent> comps;
  for (std::size_t i = 0; i < k; ++i) {
    moe::ExpertComponent c;
    c.beta0 = u(rng);
    c.beta1.resize(static_cast<Eigen::Index>(d));
    c.a.resize(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
      c.beta1[j] = u(rng);
      c.a[j] = u(rng);
    }
    c.b = u(rng);
    c.sigma = s(rng);
    comps.push_back(c);
  }
  return moe::MixingMeasure(comps);
}

/// gstar with every coordinate jittered by N(0, noise^2). The first `extra`
/// atoms are duplicated and every duplicated atom carries half its weight.
inline moe::MixingMeasure random_near(std::mt19937_64& rng, const moe::MixingMeasure& gstar,
                                      double noise, std::size_t extra = 0) {
  std::normal_distribution<double> n(0.0, noise);
  std::vector<moe::ExpertComponent> out;
  const std::size_t k = gstar.size();
  for (std::size_t j = 0; j < k + extra; ++j) {
    moe::ExpertComponent c = gstar[j % k];
    const bool split = j >= k || j < extra;
    c.beta0 += n(rng) + (split ? std::log(0.5) : 0.0);
    c.beta1.array() += n(rng);
    c.a.array() += n(rng);
    c.b += n(rng);
    c.sigma = std::max(0.06, c.sigma + n(rng));
    out.push_back(c);
  }
  return moe::MixingMeasure(out);
}

/// Term-by-term g_G(y | x) with no max subtraction.
inline double direct_density(const moe::MixingMeasure& g, const Eigen::VectorXd& x, double y) {
  double denom = 0.0;
  for (const auto& c : g) denom += std::exp(c.beta1.dot(x) + c.beta0);
  double total = 0.0;
  for (const auto& c : g) {
    const double gate = std::exp(c.beta1.dot(x) + c.beta0) / denom;
    const double mean = c.a.dot(x) + c.b;
    total += gate * std::exp(-(y - mean) * (y - mean) / (2.0 * c.sigma)) /
             std::sqrt(2.0 * 3.14159265358979323846 * c.sigma);
  }
  return total;
}

/// D1 / D2 summand written straight from the formula, with cells from a
/// brute-force nearest search.
inline std::vector<std::size_t> nearest_cells(const moe::MixingMeasure& g,
                                              const moe::MixingMeasure& gstar) {
  std::vector<std::size_t> cell(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < gstar.size(); ++j) {
      double dist = 0.0;
      for (Eigen::Index u = 0; u < g[i].a.size(); ++u) {
        dist += (g[i].a[u] - gstar[j].a[u]) * (g[i].a[u] - gstar[j].a[u]);
      }
      dist += (g[i].b - gstar[j].b) * (g[i].b - gstar[j].b);
      dist += (g[i].sigma - gstar[j].sigma) * (g[i].sigma - gstar[j].sigma);
      if (dist < best) {
        best = dist;
        cell[i] = j;
      }
    }
  }
  return cell;
}

inline double oracle_loss(const moe::MixingMeasure& g, const moe::MixingMeasure& gstar, double t1,
                          const Eigen::VectorXd& t2, bool fine_grained) {
  const auto cell = nearest_cells(g, gstar);
  std::vector<std::size_t> count(gstar.size(), 0);
  for (auto j : cell) ++count[j];
  double total = 0.0;
  std::vector<double> mass(gstar.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& c = g[i];
    const auto& s = gstar[cell[i]];
    const double w = std::exp(c.beta0);
    mass[cell[i]] += w;
    double sq_first = 0.0;
    for (Eigen::Index u = 0; u < c.beta1.size(); ++u) {
      const double v = c.beta1[u] - s.beta1[u] - t2[u];
      sq_first += v * v;
    }
    sq_first += (c.b - s.b) * (c.b - s.b);
    double sq_second = 0.0;
    for (Eigen::Index u = 0; u < c.a.size(); ++u) sq_second += (c.a[u] - s.a[u]) * (c.a[u] - s.a[u]);
    sq_second += (c.sigma - s.sigma) * (c.sigma - s.sigma);
    if (!fine_grained || count[cell[i]] == 1) {
      total += w * std::sqrt(sq_first + sq_second);
    } else {
      const double r = 2.0 * static_cast<double>(count[cell[i]]);  // 4 for pairs, 6 for triples
      total += w * (std::pow(std::sqrt(sq_first), r) + std::pow(std::sqrt(sq_second), r / 2.0));
    }
  }
  for (std::size_t j = 0; j < gstar.size(); ++j) {
    total += std::abs(mass[j] - std::exp(gstar[j].beta0 + t1));
  }
  return total;
}

/// Grid search over (t1, t2) in d = 1 followed by repeated local zooming.
inline double grid_minimum(const std::function<double(double, double)>& f, double lo1, double hi1,
                           double lo2, double hi2, int nodes = 401, int zooms = 6) {
  double best = std::numeric_limits<double>::infinity();
  double c1 = 0.0, c2 = 0.0;
  double w1 = hi1 - lo1, w2 = hi2 - lo2;
  double s1 = lo1, s2 = lo2;
  for (int z = 0; z <= zooms; ++z) {
    const double h1 = w1 / (nodes - 1), h2 = w2 / (nodes - 1);
    for (int i = 0; i < nodes; ++i) {
      const double t1 = std::min(hi1, std::max(lo1, s1 + h1 * i));
      for (int j = 0; j < nodes; ++j) {
        const double t2 = std::min(hi2, std::max(lo2, s2 + h2 * j));
        const double v = f(t1, t2);
        if (v < best) {
          best = v;
          c1 = t1;
          c2 = t2;
        }
      }
    }
    w1 = 4.0 * h1;
    w2 = 4.0 * h2;
    s1 = c1 - w1 / 2.0;
    s2 = c2 - w2 / 2.0;
    nodes = 41;
  }
  return best;
}

}  // namespace testing
