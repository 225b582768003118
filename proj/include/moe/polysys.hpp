#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace moe::polysys {

/// alpha = (alpha1, alpha2, alpha3, alpha4) in N^d x N^d x N x N.
struct MultiIndex {
  std::vector<int> alpha1;
  std::vector<int> alpha2;
  int alpha3 = 0;
  int alpha4 = 0;

  auto operator<=>(const MultiIndex&) const = default;
  /// Product of the factorials of every scalar entry.
  double factorial() const;
};

/// All alpha with alpha1 + alpha2 = ell1 and |alpha2| + alpha3 + 2 alpha4 = ell2,
/// in descending lexicographic order.
std::vector<MultiIndex> index_set(const std::vector<int>& ell1, int ell2);

struct Equation {
  std::vector<int> ell1;
  int ell2 = 0;
  std::vector<MultiIndex> terms;

  int degree() const;  // |ell1| + ell2
};

struct PolySystem {
  std::size_t m = 0;
  std::size_t d = 0;
  int r = 0;
  std::vector<Equation> equations;
};

/// Every (ell1, ell2) with |ell1| <= r, ell2 <= r - |ell1| and |ell1| + ell2 >= 1,
/// ordered by total degree, then by ell1 descending.
PolySystem build_system(std::size_t m, std::size_t d, int r);

/// Human-readable monomial form of one equation, e.g.
/// "sum_j p5_j^2 * (p1_j*p3_j + p2_j) = 0".
std::string format_equation(const Equation& eq, std::size_t d);

/// Unknowns {p1_j, p2_j, p3_j, p4_j, p5_j}, j = 1..m.
struct CandidateSolution {
  std::vector<Eigen::VectorXd> p1;
  std::vector<Eigen::VectorXd> p2;
  Eigen::VectorXd p3;
  Eigen::VectorXd p4;
  Eigen::VectorXd p5;

  static CandidateSolution zeros(std::size_t m, std::size_t d);
  std::size_t m() const { return static_cast<std::size_t>(p3.size()); }
  std::size_t d() const { return p1.empty() ? 0 : static_cast<std::size_t>(p1.front().size()); }
  bool all_finite() const;
  /// Appends an atom with p5 = 1 and every other unknown zero.
  CandidateSolution padded(std::size_t extra) const;
};

/// One residual per equation.
Eigen::VectorXd evaluate_system(const PolySystem& sys, const CandidateSolution& sol);

constexpr double kTolZero = 1e-9;

/// All p5 non-zero and at least one p3 non-zero (magnitudes above `tol_zero`).
bool is_nontrivial(const CandidateSolution& sol, double tol_zero = kTolZero);

struct SearchConfig {
  std::size_t restarts = 10000;
  std::size_t max_iters = 200;  // Levenberg-Marquardt iterations per restart
  double init_range = 2.0;      // starts drawn uniformly in [-init_range, init_range]
  double min_p5 = 0.1;          // lower bound on |p5_j| / max |p5|
  double residual_tol = 1e-8;
  double tol_zero = kTolZero;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct SearchResult {
  bool found = false;
  std::optional<CandidateSolution> solution;  // set iff found
  CandidateSolution best;                      // best non-trivial candidate seen
  double best_residual = 0.0;                  // Euclidean norm at the normalized best
  std::size_t restarts_run = 0;
  std::size_t found_at_restart = 0;

  /// A miss is numerical evidence only, never a proof of unsolvability.
  std::string verdict() const;
};

/// Multi-start damped Gauss-Newton on the residual vector over normalized
/// unknowns (weighted magnitude max(|p1|, |p3|, |p2|^1/2, |p4|^1/2) = 1 and
/// max |p5| = 1).
SearchResult search_nontrivial(std::size_t m, std::size_t d, int r, const SearchConfig& cfg);

/// Rescales a candidate onto the search normalization; the residual of
/// equation (ell1, ell2) scales by lambda^(|ell1| + ell2) and by the p5 factor squared.
CandidateSolution normalize(const CandidateSolution& sol);

}  // namespace moe::polysys
