#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "moe/estimator.hpp"
#include "moe/experiments.hpp"
#include "moe/voronoi.hpp"

using namespace moe;
using testing::atom;
using testing::vec;

namespace {

// Normal-equations solve of y on [x, 1] without any library helper.
std::pair<Eigen::VectorXd, double> ols_oracle(const Dataset& data, const Eigen::VectorXd& w) {
  const Eigen::Index d = data.x.cols();
  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(d + 1, d + 1);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(d + 1);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    Eigen::VectorXd row(d + 1);
    row.head(d) = data.x.row(i).transpose();
    row[d] = 1.0;
    xtx += w[i] * row * row.transpose();
    xty += w[i] * data.y[i] * row;
  }
  const Eigen::VectorXd coef = xtx.fullPivLu().solve(xty);
  return {coef.head(d), coef[d]};
}

}  // namespace

TEST_CASE("e-step matches Bayes rule") {
  std::mt19937_64 rng(1);
  const ThetaBox box = ThetaBox::with_defaults(2);
  const auto g = testing::random_measure(rng, 3, 2);
  const Dataset data = sample(g, box, 300, 4);
  const Eigen::MatrixXd r = em_e_step(g, data);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
    const Eigen::VectorXd x = data.x.row(i).transpose();
    double denom = 0.0;
    for (const auto& c : g) denom += std::exp(c.beta1.dot(x) + c.beta0);
    const double total = testing::direct_density(g, x, data.y[i]);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const auto& c = g[j];
      const double mean = c.a.dot(x) + c.b;
      const double joint = std::exp(c.beta1.dot(x) + c.beta0) / denom *
                           std::exp(-(data.y[i] - mean) * (data.y[i] - mean) / (2 * c.sigma)) /
                           std::sqrt(2 * 3.14159265358979323846 * c.sigma);
      CHECK(std::abs(r(i, static_cast<Eigen::Index>(j)) - joint / total) < 1e-12);
    }
    CHECK(std::abs(r.row(i).sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("e-step edge cases") {
  const ThetaBox box = ThetaBox::with_defaults(1);
  const MixingMeasure one({atom(0.0, {1.0}, {1.0}, 0.0, 1.0)});
  const Dataset data = sample(one, box, 20, 2);
  CHECK((em_e_step(one, data).array() == 1.0).all());

  // Mirror-image experts at x = 0, y = 0 are indistinguishable.
  const MixingMeasure sym({atom(0.0, {1.0}, {1.0}, 0.5, 1.0), atom(0.0, {-1.0}, {-1.0}, -0.5, 1.0)});
  Dataset point;
  point.x = Eigen::MatrixXd::Zero(1, 1);
  point.y = vec({0.0});
  const Eigen::MatrixXd r = em_e_step(sym, point);
  CHECK(std::abs(r(0, 0) - 0.5) < 1e-15);
}

TEST_CASE("expert m-step") {
  const ThetaBox box = ThetaBox::with_defaults(1);
  Dataset line;
  line.x = Eigen::VectorXd::LinSpaced(50, -1.0, 1.0);
  line.y = 2.0 * line.x.col(0).array() + 1.0;
  const MixingMeasure start({atom(0.0, {0.0}, {0.0}, 0.0, 1.0)});
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(50, 1);
  const ExpertUpdate upd = em_m_step_experts(line, ones, start, box);
  CHECK(std::abs(upd.components[0].a[0] - 2.0) < 1e-10);
  CHECK(std::abs(upd.components[0].b - 1.0) < 1e-10);
  CHECK(upd.components[0].sigma == box.sigma.lo);

  std::mt19937_64 rng(7);
  const auto g = testing::random_measure(rng, 2, 2);
  const Dataset data = sample(g, ThetaBox::with_defaults(2), 400, 3);
  const Eigen::MatrixXd r = em_e_step(g, data);
  const ExpertUpdate u2 = em_m_step_experts(data, r, g, ThetaBox::with_defaults(2));
  for (Eigen::Index j = 0; j < 2; ++j) {
    const auto [a, b] = ols_oracle(data, r.col(j));
    CHECK((u2.components[static_cast<std::size_t>(j)].a - a).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(u2.components[static_cast<std::size_t>(j)].b - b) < 1e-9);
  }

  Eigen::MatrixXd dead = Eigen::MatrixXd::Zero(data.x.rows(), 2);
  dead.col(0).setOnes();
  const ExpertUpdate u3 = em_m_step_experts(data, dead, g, ThetaBox::with_defaults(2));
  CHECK(u3.empty[1]);
  CHECK(u3.components[1] == g[1]);
}

TEST_CASE("expert m-step ridges a singular design") {
  const ThetaBox box = ThetaBox::with_defaults(1);
  Dataset flat;
  flat.x = Eigen::MatrixXd::Constant(10, 1, 0.3);
  flat.y = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
  const MixingMeasure start({atom(0.0, {0.0}, {0.0}, 0.0, 1.0)});
  const ExpertUpdate upd = em_m_step_experts(flat, Eigen::MatrixXd::Ones(10, 1), start, box);
  CHECK(upd.ridge[0]);
  CHECK(std::isfinite(upd.components[0].b));
}

TEST_CASE("gating objective: gradient, stationarity and ascent") {
  std::mt19937_64 rng(12);
  const ThetaBox box = ThetaBox::with_defaults(2);
  const auto g = testing::random_measure(rng, 3, 2, 1.0);
  const Dataset data = sample(testing::random_measure(rng, 3, 2, 1.0), box, 300, 5);
  const Eigen::MatrixXd r = em_e_step(testing::random_measure(rng, 3, 2, 1.0), data);
  const GatingParams p = GatingParams::from(g);
  const GatingParams grad = gating_gradient(data, r, p);
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < 3; ++j) {
    GatingParams up = p, down = p;
    up.beta0[j] += h;
    down.beta0[j] -= h;
    const double fd = (gating_objective(data, r, up) - gating_objective(data, r, down)) / (2 * h);
    CHECK(std::abs(fd - grad.beta0[j]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    for (Eigen::Index u = 0; u < 2; ++u) {
      GatingParams up1 = p, down1 = p;
      up1.beta1(j, u) += h;
      down1.beta1(j, u) -= h;
      const double fd1 = (gating_objective(data, r, up1) - gating_objective(data, r, down1)) / (2 * h);
      CHECK(std::abs(fd1 - grad.beta1(j, u)) <= 1e-4 * std::max(1.0, std::abs(fd1)));
    }
  }

  const GatingUpdate upd = em_m_step_gating(data, r, p, box, 25, 1.0);
  for (std::size_t i = 1; i < upd.objective_trace.size(); ++i) {
    CHECK(upd.objective_trace[i] >= upd.objective_trace[i - 1]);
  }

  // Responsibilities equal to the current gate: already optimal.
  Eigen::MatrixXd gate(data.x.rows(), 3);
  for (Eigen::Index i = 0; i < data.x.rows(); ++i) gate.row(i) = softmax_gate(g, data.x.row(i).transpose());
  const GatingUpdate still = em_m_step_gating(data, gate, p, box, 10, 1.0);
  CHECK((still.params.beta0 - p.beta0).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((still.params.beta1 - p.beta1).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("k = 1 fit is the closed-form regression") {
  const ThetaBox box = ThetaBox::with_defaults(2);
  std::mt19937_64 rng(4);
  const auto g = testing::random_measure(rng, 2, 2, 1.0);
  const Dataset data = sample(g, box, 500, 8);
  FitConfig cfg;
  cfg.k = 1;
  cfg.restarts = 2;
  const FitResult fit = fit_mle(data, box, cfg);
  const auto [a, b] = ols_oracle(data, Eigen::VectorXd::Ones(500));
  const Eigen::ArrayXd resid = data.y.array() - (data.x * a).array() - b;
  CHECK((fit.measure[0].a - a).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(fit.measure[0].b - b) < 1e-8);
  CHECK(std::abs(fit.measure[0].sigma - resid.square().mean()) < 1e-8);
}

TEST_CASE("EM log-likelihood never decreases") {
  std::mt19937_64 rng(30);
  for (int rep = 0; rep < 5; ++rep) {
    const ThetaBox box = ThetaBox::with_defaults(1);
    const auto truth = testing::random_measure(rng, 2, 1);
    const Dataset data = sample(truth, box, 400, rep);
    FitConfig cfg;
    cfg.k = 3;
    cfg.max_em_iters = 60;
    const FitResult res = run_em(data, box, cfg, testing::random_measure(rng, 3, 1));
    for (std::size_t i = 1; i < res.loglik_trace.size(); ++i) {
      CHECK(res.loglik_trace[i] >= res.loglik_trace[i - 1] - 1e-10);
    }
    CHECK(box.contains(res.measure));
  }
}

TEST_CASE("fit is deterministic and picks the best restart") {
  const ThetaBox box = ThetaBox::with_defaults(1);
  const Dataset data = sample(reference_fixture(), box, 2000, 17);
  FitConfig cfg;
  cfg.restarts = 3;
  cfg.seed = 5;
  const FitResult a = fit_mle(data, box, cfg);
  cfg.threads = 3;
  const FitResult b = fit_mle(data, box, cfg);
  CHECK(a.measure == b.measure);
  CHECK(a.final_loglik == b.final_loglik);
  for (double ll : a.restart_logliks) CHECK(a.final_loglik >= ll);
  CHECK(a.final_loglik == a.restart_logliks[a.restart]);
}

TEST_CASE("fit recovers the well-separated fixture") {
  const ThetaBox box = ThetaBox::with_defaults(1);
  const Dataset data = sample(reference_fixture(), box, 50000, 2024);
  FitConfig cfg;
  cfg.seed = 1;
  const FitResult fit = fit_mle(data, box, cfg);
  CHECK(loss_d1(fit.measure, reference_fixture(), box).value < 0.1);
}

TEST_CASE("degenerate responses are reported as not converged") {
  const ThetaBox box = ThetaBox::with_defaults(1);
  Dataset data;
  data.x = Eigen::VectorXd::LinSpaced(30, -1.0, 1.0);
  data.y = Eigen::VectorXd::Constant(30, 0.25);
  FitConfig cfg;
  const FitResult fit = fit_mle(data, box, cfg);
  CHECK_FALSE(fit.converged);
  CHECK(box.contains(fit.measure));
}

TEST_CASE("fit configuration checks") {
  FitConfig cfg;
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.em_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  const ThetaBox box = ThetaBox::with_defaults(1);
  const Dataset tiny = sample(reference_fixture(), box, 1, 1);
  CHECK_THROWS_AS(fit_mle(tiny, box, FitConfig{}), std::invalid_argument);
}

TEST_CASE("canonical representative keeps the density") {
  const ThetaBox box = ThetaBox::with_defaults(1);
  const MixingMeasure g({atom(1.0, {0.5}, {1.0}, 0.0, 1.0), atom(2.0, {1.5}, {-1.0}, 0.2, 0.5)});
  const MixingMeasure c = canonical_representative(g, box);
  CHECK(std::abs(c.total_weight() - 1.0) < 1e-12);
  CHECK(std::abs(c[0].beta1[0] + c[1].beta1[0]) < 1e-12);
  for (double x : {-0.7, 0.1, 0.8}) {
    CHECK(std::abs(conditional_density(c, vec({x}), 0.3) - conditional_density(g, vec({x}), 0.3)) < 1e-12);
  }
}
