#include "moe/polysys.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "moe/parallel.hpp"
#include "moe/random.hpp"

namespace moe::polysys {

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

int sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

// Every vector v with 0 <= v <= bound coordinate-wise and |v| <= cap.
void enumerate_bounded(const std::vector<int>& bound, int cap, std::size_t pos,
                       std::vector<int>& current,
                       const std::function<void(const std::vector<int>&)>& emit) {
  if (pos == bound.size()) {
    emit(current);
    return;
  }
  for (int v = 0; v <= bound[pos] && v <= cap; ++v) {
    current[pos] = v;
    enumerate_bounded(bound, cap - v, pos + 1, current, emit);
  }
  current[pos] = 0;
}

// All ell1 in N^d with |ell1| == total.
void enumerate_exact(std::size_t d, int total, std::size_t pos, std::vector<int>& current,
                     std::vector<std::vector<int>>& out) {
  if (pos + 1 == d) {
    current[pos] = total;
    out.push_back(current);
    return;
  }
  for (int v = total; v >= 0; --v) {
    current[pos] = v;
    enumerate_exact(d, total - v, pos + 1, current, out);
  }
}

std::size_t vars_per_atom(std::size_t d) { return 2 * d + 3; }

Eigen::VectorXd pack(const CandidateSolution& s) {
  const std::size_t d = s.d();
  const auto per = static_cast<Eigen::Index>(vars_per_atom(d));
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::VectorXd z(per * static_cast<Eigen::Index>(s.m()));
  for (std::size_t j = 0; j < s.m(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const Eigen::Index o = per * jj;
    z.segment(o, di) = s.p1[j];
    z.segment(o + di, di) = s.p2[j];
    z[o + 2 * di] = s.p3[jj];
    z[o + 2 * di + 1] = s.p4[jj];
    z[o + 2 * di + 2] = s.p5[jj];
  }
  return z;
}

CandidateSolution unpack(const Eigen::VectorXd& z, std::size_t m, std::size_t d) {
  const auto per = static_cast<Eigen::Index>(vars_per_atom(d));
  const auto di = static_cast<Eigen::Index>(d);
  CandidateSolution s = CandidateSolution::zeros(m, d);
  for (std::size_t j = 0; j < m; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const Eigen::Index o = per * jj;
    s.p1[j] = z.segment(o, di);
    s.p2[j] = z.segment(o + di, di);
    s.p3[jj] = z[o + 2 * di];
    s.p4[jj] = z[o + 2 * di + 1];
    s.p5[jj] = z[o + 2 * di + 2];
  }
  return s;
}

// Flattened monomials of a system for repeated evaluation.
struct CompiledTerm {
  double coefficient;
  std::vector<int> alpha1;
  std::vector<int> alpha2;
  int alpha3;
  int alpha4;
};

struct CompiledSystem {
  std::size_t d;
  int r;
  std::vector<std::vector<CompiledTerm>> equations;

  // With degree_scaled, equation (ell1, ell2) is multiplied by (|ell1| + ell2)!.
  CompiledSystem(const PolySystem& sys, bool degree_scaled) : d(sys.d), r(sys.r) {
    for (const auto& eq : sys.equations) {
      auto& terms = equations.emplace_back();
      const double scale = degree_scaled ? factorial(eq.degree()) : 1.0;
      for (const auto& a : eq.terms) {
        terms.push_back({scale / a.factorial(), a.alpha1, a.alpha2, a.alpha3, a.alpha4});
      }
    }
  }

  Eigen::VectorXd evaluate(const Eigen::VectorXd& z) const {
    const std::size_t per = vars_per_atom(d);
    const std::size_t m = static_cast<std::size_t>(z.size()) / per;
    const auto pw = static_cast<std::size_t>(r + 1);
    // powers[var][e] = value^e for the 2d + 2 polynomial unknowns of one atom.
    std::vector<double> powers((2 * d + 2) * pw);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(equations.size()));
    for (std::size_t j = 0; j < m; ++j) {
      const double* v = z.data() + j * per;
      for (std::size_t var = 0; var < 2 * d + 2; ++var) {
        double acc = 1.0;
        for (std::size_t e = 0; e < pw; ++e) {
          powers[var * pw + e] = acc;
          acc *= v[var];
        }
      }
      const double w = v[2 * d + 2] * v[2 * d + 2];
      for (std::size_t q = 0; q < equations.size(); ++q) {
        double s = 0.0;
        for (const auto& t : equations[q]) {
          double term = t.coefficient;
          for (std::size_t u = 0; u < d; ++u) {
            term *= powers[u * pw + static_cast<std::size_t>(t.alpha1[u])];
            term *= powers[(d + u) * pw + static_cast<std::size_t>(t.alpha2[u])];
          }
          term *= powers[(2 * d) * pw + static_cast<std::size_t>(t.alpha3)];
          term *= powers[(2 * d + 1) * pw + static_cast<std::size_t>(t.alpha4)];
          s += term;
        }
        out[static_cast<Eigen::Index>(q)] += w * s;
      }
    }
    return out;
  }
};

// Rescale onto max weighted magnitude 1 and max |p5| = 1, then enforce the p5 floor.
void normalize_in_place(Eigen::VectorXd& z, std::size_t d, double min_p5) {
  const std::size_t per = vars_per_atom(d);
  const std::size_t m = static_cast<std::size_t>(z.size()) / per;
  double mag = 0.0;
  double p5max = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double* v = z.data() + j * per;
    for (std::size_t u = 0; u < d; ++u) {
      mag = std::max({mag, std::abs(v[u]), std::sqrt(std::abs(v[d + u]))});
    }
    mag = std::max({mag, std::abs(v[2 * d]), std::sqrt(std::abs(v[2 * d + 1]))});
    p5max = std::max(p5max, std::abs(v[2 * d + 2]));
  }
  const double lambda = mag > 0.0 ? 1.0 / mag : 1.0;
  for (std::size_t j = 0; j < m; ++j) {
    double* v = z.data() + j * per;
    for (std::size_t u = 0; u < d; ++u) {
      v[u] *= lambda;
      v[d + u] *= lambda * lambda;
    }
    v[2 * d] *= lambda;
    v[2 * d + 1] *= lambda * lambda;
    double p5 = p5max > 0.0 ? std::abs(v[2 * d + 2]) / p5max : 1.0;
    v[2 * d + 2] = std::max(p5, min_p5);
  }
}

struct LocalResult {
  Eigen::VectorXd z;
  double residual;
};

LocalResult levenberg_marquardt(const CompiledSystem& sys, Eigen::VectorXd z,
                                const SearchConfig& cfg) {
  normalize_in_place(z, sys.d, cfg.min_p5);
  Eigen::VectorXd f = sys.evaluate(z);
  double norm = f.norm();
  double mu = 1e-3;
  const auto nv = z.size();
  Eigen::MatrixXd jac(f.size(), nv);
  for (std::size_t it = 0; it < cfg.max_iters && norm > 1e-3 * cfg.residual_tol; ++it) {
    for (Eigen::Index c = 0; c < nv; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(z[c]));
      Eigen::VectorXd zp = z, zm = z;
      zp[c] += h;
      zm[c] -= h;
      jac.col(c) = (sys.evaluate(zp) - sys.evaluate(zm)) / (2.0 * h);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtf = jac.transpose() * f;
    bool accepted = false;
    while (mu < 1e12) {
      Eigen::MatrixXd lhs = jtj;
      lhs.diagonal().array() += mu * (1.0 + jtj.diagonal().array());
      Eigen::VectorXd trial = z - lhs.ldlt().solve(jtf);
      normalize_in_place(trial, sys.d, cfg.min_p5);
      const Eigen::VectorXd ft = sys.evaluate(trial);
      const double nt = ft.norm();
      if (std::isfinite(nt) && nt < norm) {
        z = std::move(trial);
        f = ft;
        norm = nt;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) break;
  }
  return {z, norm};
}

}  // namespace

double MultiIndex::factorial() const {
  double f = polysys::factorial(alpha3) * polysys::factorial(alpha4);
  for (int v : alpha1) f *= polysys::factorial(v);
  for (int v : alpha2) f *= polysys::factorial(v);
  return f;
}

std::vector<MultiIndex> index_set(const std::vector<int>& ell1, int ell2) {
  if (ell2 < 0 || std::ranges::any_of(ell1, [](int v) { return v < 0; })) {
    throw std::invalid_argument("index_set needs non-negative orders");
  }
  std::vector<MultiIndex> out;
  std::vector<int> alpha2(ell1.size(), 0);
  enumerate_bounded(ell1, ell2, 0, alpha2, [&](const std::vector<int>& a2) {
    const int rest = ell2 - sum(a2);
    for (int a4 = 0; 2 * a4 <= rest; ++a4) {
      MultiIndex idx;
      idx.alpha2 = a2;
      idx.alpha1.resize(ell1.size());
      for (std::size_t u = 0; u < ell1.size(); ++u) idx.alpha1[u] = ell1[u] - a2[u];
      idx.alpha3 = rest - 2 * a4;
      idx.alpha4 = a4;
      out.push_back(std::move(idx));
    }
  });
  std::ranges::sort(out, std::greater<>{});
  return out;
}

int Equation::degree() const { return sum(ell1) + ell2; }

PolySystem build_system(std::size_t m, std::size_t d, int r) {
  if (m < 1) throw std::invalid_argument("polynomial system needs m >= 1");
  if (d < 1) throw std::invalid_argument("polynomial system needs d >= 1");
  if (r < 1) throw std::invalid_argument("polynomial system needs r >= 1");
  PolySystem sys{m, d, r, {}};
  for (int total = 1; total <= r; ++total) {
    for (int l1 = total; l1 >= 0; --l1) {
      std::vector<std::vector<int>> ell1s;
      std::vector<int> cur(d, 0);
      enumerate_exact(d, l1, 0, cur, ell1s);
      for (const auto& ell1 : ell1s) {
        const int ell2 = total - l1;
        sys.equations.push_back({ell1, ell2, index_set(ell1, ell2)});
      }
    }
  }
  return sys;
}

std::string format_equation(const Equation& eq, std::size_t d) {
  auto power = [](const std::string& base, int e) {
    return e == 1 ? base : base + "^" + std::to_string(e);
  };
  std::ostringstream os;
  os << "(l1=(";
  for (std::size_t u = 0; u < eq.ell1.size(); ++u) os << (u ? "," : "") << eq.ell1[u];
  os << "), l2=" << eq.ell2 << "): sum_j p5_j^2 * (";
  for (std::size_t t = 0; t < eq.terms.size(); ++t) {
    const auto& a = eq.terms[t];
    std::vector<std::string> factors;
    const double f = a.factorial();
    if (f != 1.0) factors.push_back("1/" + std::to_string(static_cast<long long>(f)));
    for (std::size_t u = 0; u < a.alpha1.size(); ++u) {
      const std::string suffix = d == 1 ? "_j" : "_j" + std::to_string(u + 1);
      if (a.alpha1[u]) factors.push_back(power("p1" + suffix, a.alpha1[u]));
    }
    for (std::size_t u = 0; u < a.alpha2.size(); ++u) {
      const std::string suffix = d == 1 ? "_j" : "_j" + std::to_string(u + 1);
      if (a.alpha2[u]) factors.push_back(power("p2" + suffix, a.alpha2[u]));
    }
    if (a.alpha3) factors.push_back(power("p3_j", a.alpha3));
    if (a.alpha4) factors.push_back(power("p4_j", a.alpha4));
    if (t) os << " + ";
    for (std::size_t q = 0; q < factors.size(); ++q) os << (q ? "*" : "") << factors[q];
  }
  os << ") = 0";
  return os.str();
}

CandidateSolution CandidateSolution::zeros(std::size_t m, std::size_t d) {
  CandidateSolution s;
  s.p1.assign(m, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)));
  s.p2.assign(m, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)));
  s.p3 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  s.p4 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  s.p5 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  return s;
}

bool CandidateSolution::all_finite() const {
  for (const auto& v : p1) if (!v.allFinite()) return false;
  for (const auto& v : p2) if (!v.allFinite()) return false;
  return p3.allFinite() && p4.allFinite() && p5.allFinite();
}

CandidateSolution CandidateSolution::padded(std::size_t extra) const {
  CandidateSolution s = zeros(m() + extra, d());
  for (std::size_t j = 0; j < m(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    s.p1[j] = p1[j];
    s.p2[j] = p2[j];
    s.p3[jj] = p3[jj];
    s.p4[jj] = p4[jj];
    s.p5[jj] = p5[jj];
  }
  for (std::size_t j = m(); j < m() + extra; ++j) s.p5[static_cast<Eigen::Index>(j)] = 1.0;
  return s;
}

Eigen::VectorXd evaluate_system(const PolySystem& sys, const CandidateSolution& sol) {
  if (sol.m() == 0 || sol.d() != sys.d || sol.p4.size() != sol.p3.size() ||
      sol.p5.size() != sol.p3.size() || sol.p1.size() != sol.m() || sol.p2.size() != sol.m()) {
    throw std::invalid_argument("candidate solution does not match the system dimensions");
  }
  return CompiledSystem(sys, false).evaluate(pack(sol));
}

bool is_nontrivial(const CandidateSolution& sol, double tol_zero) {
  if (sol.m() == 0) return false;
  return sol.p5.cwiseAbs().minCoeff() > tol_zero && sol.p3.cwiseAbs().maxCoeff() > tol_zero;
}

CandidateSolution normalize(const CandidateSolution& sol) {
  Eigen::VectorXd z = pack(sol);
  normalize_in_place(z, sol.d(), 0.0);
  return unpack(z, sol.m(), sol.d());
}

void SearchConfig::validate() const {
  if (restarts < 1) throw std::invalid_argument("search restarts must be at least 1");
  if (max_iters < 1) throw std::invalid_argument("search max_iters must be at least 1");
  if (!(init_range > 0.0)) throw std::invalid_argument("search init_range must be positive");
  if (!(min_p5 >= 0.0 && min_p5 < 1.0)) throw std::invalid_argument("search min_p5 must be in [0, 1)");
  if (!(residual_tol > 0.0)) throw std::invalid_argument("search residual_tol must be positive");
}

std::string SearchResult::verdict() const {
  std::ostringstream os;
  os.precision(3);
  if (found) {
    os << "non-trivial solution found at restart " << found_at_restart << " (residual "
       << std::scientific << best_residual << ")";
  } else {
    os << "no non-trivial solution found in " << restarts_run << " restarts; best residual "
       << std::scientific << best_residual
       << " (heuristic evidence only, not a proof of unsolvability)";
  }
  return os.str();
}

SearchResult search_nontrivial(std::size_t m, std::size_t d, int r, const SearchConfig& cfg) {
  cfg.validate();
  if (m < 2) throw std::invalid_argument("search_nontrivial needs m >= 2");
  const PolySystem sys = build_system(m, d, r);
  const CompiledSystem compiled(sys, true);
  const auto nv = static_cast<Eigen::Index>(m * vars_per_atom(d));

  SearchResult out;
  out.best_residual = std::numeric_limits<double>::infinity();
  out.best = CandidateSolution::zeros(m, d);

  const std::size_t threads = cfg.threads == 0 ? 1 : cfg.threads;
  const std::size_t batch = std::max<std::size_t>(1, 4 * threads);
  std::vector<LocalResult> results;
  for (std::size_t begin = 0; begin < cfg.restarts; begin += batch) {
    const std::size_t count = std::min(batch, cfg.restarts - begin);
    results.assign(count, LocalResult{});
    parallel_for(count, threads, [&](std::size_t i) {
      Rng rng(derive_seed(cfg.seed, {begin + i}));
      std::uniform_real_distribution<double> unif(-cfg.init_range, cfg.init_range);
      Eigen::VectorXd z(nv);
      for (Eigen::Index c = 0; c < nv; ++c) z[c] = unif(rng);
      results[i] = levenberg_marquardt(compiled, std::move(z), cfg);
    });
    for (std::size_t i = 0; i < count; ++i) {
      ++out.restarts_run;
      CandidateSolution cand = unpack(results[i].z, m, d);
      if (!is_nontrivial(cand, cfg.tol_zero)) continue;
      if (results[i].residual < out.best_residual) {
        out.best_residual = results[i].residual;
        out.best = cand;
      }
      if (results[i].residual < cfg.residual_tol) {
        out.found = true;
        out.found_at_restart = begin + i;
        out.solution = cand;
        out.best = cand;
        out.best_residual = results[i].residual;
        return out;
      }
    }
  }
  return out;
}

}  // namespace moe::polysys
