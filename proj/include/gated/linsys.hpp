#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gated/detail/numeric.hpp"
#include "gated/errors.hpp"

namespace gated::linsys {

/// On-demand generator of the coefficients of an infinite system sum_j a(i,j) x_j = b(i).
/// Indices are 1-based. Implementations must be deterministic and safe for concurrent reads.
struct CoefficientOracle {
  std::function<double(int, int)> a;
  std::function<double(int)> b;
  /// Optional upper bound on sum_{j > cutoff} |a(i,j)|, called as tail_row_bound(i, cutoff).
  std::function<double(int, int)> tail_row_bound;
  /// Optional closed-form sufficient condition for strict dominance of the whole infinite
  /// matrix (rows beyond any probe included).
  std::optional<bool> certified;
  std::string certificate;
  std::string name = "oracle";
};

/// Row-major dense square matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(int n) : n_(n), data_(static_cast<std::size_t>(n) * n, 0.0) {}

  int size() const noexcept { return n_; }
  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * n_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * n_ + c]; }

 private:
  int n_ = 0;
  std::vector<double> data_;
};

struct TruncatedSystem {
  int order = 0;
  DenseMatrix matrix;
  std::vector<double> rhs;
};

inline TruncatedSystem truncate(const CoefficientOracle& oracle, int n) {
  if (n < 1) throw std::invalid_argument("truncation order must be >= 1");
  TruncatedSystem sys{n, DenseMatrix(n), std::vector<double>(static_cast<std::size_t>(n))};
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      const double v = oracle.a(i, j);
      if (!std::isfinite(v)) throw assembly_error(i, j, oracle.name);
      sys.matrix(i - 1, j - 1) = v;
    }
    const double v = oracle.b(i);
    if (!std::isfinite(v)) throw assembly_error(i, 0, oracle.name + " (rhs)");
    sys.rhs[static_cast<std::size_t>(i - 1)] = v;
  }
  return sys;
}

struct Solution {
  std::vector<double> x;
  /// max_i |Ax - b|_i
  double residual = 0.0;
  /// max_i |Ax - b|_i / (sum_j |a_ij x_j| + |b_i|), a backward-error measure independent of
  /// row scaling
  double relative_residual = 0.0;
  double min_pivot_ratio = 0.0;
};

inline void compute_residual(const TruncatedSystem& sys, Solution& s) {
  const int n = sys.order;
  s.residual = 0.0;
  s.relative_residual = 0.0;
  for (int i = 0; i < n; ++i) {
    detail::CompensatedSum r;
    double mag = std::abs(sys.rhs[static_cast<std::size_t>(i)]);
    for (int j = 0; j < n; ++j) {
      const double t = sys.matrix(i, j) * s.x[static_cast<std::size_t>(j)];
      r += t;
      mag += std::abs(t);
    }
    r += -sys.rhs[static_cast<std::size_t>(i)];
    const double ri = std::abs(r.value());
    s.residual = std::max(s.residual, ri);
    if (mag > 0.0) s.relative_residual = std::max(s.relative_residual, ri / mag);
  }
}

/// Dense LU with partial pivoting. A pivot is singular when it is below 1e-13 of the largest
/// entry of its original row.
inline Solution solve(const TruncatedSystem& sys) {
  const int n = sys.order;
  DenseMatrix lu = sys.matrix;
  std::vector<double> rhs = sys.rhs;
  std::vector<double> row_scale(static_cast<std::size_t>(n), 0.0);
  std::vector<int> origin(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    origin[static_cast<std::size_t>(i)] = i;
    for (int j = 0; j < n; ++j) {
      row_scale[static_cast<std::size_t>(i)] =
          std::max(row_scale[static_cast<std::size_t>(i)], std::abs(lu(i, j)));
    }
  }
  Solution out;
  out.min_pivot_ratio = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n; ++k) {
    int p = k;
    for (int i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > std::abs(lu(p, k))) p = i;
    }
    const double pivot = lu(p, k);
    const double scale = row_scale[static_cast<std::size_t>(origin[static_cast<std::size_t>(p)])];
    const double ratio = scale > 0.0 ? std::abs(pivot) / scale : 0.0;
    if (!std::isfinite(pivot) || !(ratio > 1e-13)) throw singular_system_error(k + 1, std::abs(pivot));
    out.min_pivot_ratio = std::min(out.min_pivot_ratio, ratio);
    if (p != k) {
      for (int j = 0; j < n; ++j) std::swap(lu(p, j), lu(k, j));
      std::swap(rhs[static_cast<std::size_t>(p)], rhs[static_cast<std::size_t>(k)]);
      std::swap(origin[static_cast<std::size_t>(p)], origin[static_cast<std::size_t>(k)]);
    }
    for (int i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / pivot;
      if (f == 0.0) continue;
      lu(i, k) = 0.0;
      for (int j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      rhs[static_cast<std::size_t>(i)] -= f * rhs[static_cast<std::size_t>(k)];
    }
  }
  out.x.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = n - 1; i >= 0; --i) {
    double s = rhs[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) s -= lu(i, j) * out.x[static_cast<std::size_t>(j)];
    out.x[static_cast<std::size_t>(i)] = s / lu(i, i);
  }
  compute_residual(sys, out);
  return out;
}

struct DominanceReport {
  int order = 0;
  int tail_cutoff = 0;
  /// sigma_i = sum_{j != i} |a_ij| / |a_ii|, for i = 1..order
  std::vector<double> sigma;
  std::vector<double> off_diagonal;
  bool analytic_tail = false;
  bool strictly_dominant = false;
  bool condition_inverse_diagonal = false;  // sum_i 1/|a_ii| < inf (probed)
  bool condition_row_bound = false;         // sup_i sum_{j != i} |a_ij| < inf (probed)
  bool condition_column_sums = false;       // sum_i |a_ij| < inf for each j (probed)
  double inverse_diagonal_ratio = 0.0;
  double max_row_sum = 0.0;
  /// |b_i| over i <= 10 order does not grow from the first half to the second
  bool rhs_bounded = false;
  double rhs_max = 0.0;
  int worst_row = 0;
  double worst_sigma = 0.0;
  bool satisfied = false;
  std::optional<bool> certified;
  std::string certificate;
  std::vector<std::string> warnings;
};

namespace detail {

/// Tail increments of a convergent partial-sum sequence must shrink: the sum over (2n, 4n]
/// is at most 0.99 of the sum over (n, 2n], or negligible against the total.
inline bool cauchy_probe(double inc_first, double inc_second, double total, double* ratio) {
  *ratio = inc_first > 0.0 ? inc_second / inc_first : 0.0;
  if (inc_second <= 1e-15 * std::abs(total)) return true;
  return inc_second <= 0.99 * inc_first;
}

}  // namespace detail

inline DominanceReport dominance_report(const CoefficientOracle& oracle, int n, int tail_cutoff) {
  if (n < 1) throw std::invalid_argument("dominance order must be >= 1");
  if (tail_cutoff < n) throw std::invalid_argument("tail_cutoff must be >= order");
  DominanceReport r;
  r.order = n;
  r.tail_cutoff = tail_cutoff;
  r.analytic_tail = static_cast<bool>(oracle.tail_row_bound);
  r.certified = oracle.certified;
  r.certificate = oracle.certificate;
  if (!r.analytic_tail) {
    r.warnings.push_back("no analytic tail bound: sigma_i is a lower estimate from columns <= " +
                         std::to_string(tail_cutoff));
  }
  r.sigma.resize(static_cast<std::size_t>(n));
  r.off_diagonal.resize(static_cast<std::size_t>(n));
  bool all_below = true;
  for (int i = 1; i <= n; ++i) {
    const double diag = std::abs(oracle.a(i, i));
    if (diag == 0.0) throw zero_diagonal_error(i);
    gated::detail::CompensatedSum off;
    for (int j = 1; j <= tail_cutoff; ++j) {
      if (j != i) off += std::abs(oracle.a(i, j));
    }
    if (r.analytic_tail) off += oracle.tail_row_bound(i, tail_cutoff);
    const double sigma = off.value() / diag;
    r.sigma[static_cast<std::size_t>(i - 1)] = sigma;
    r.off_diagonal[static_cast<std::size_t>(i - 1)] = off.value();
    if (!(sigma < 1.0)) all_below = false;
    if (i == 1 || sigma > r.worst_sigma) {
      r.worst_sigma = sigma;
      r.worst_row = i;
    }
  }
  r.strictly_dominant = all_below;

  // sum 1/|a_ii| probed over i <= 4n
  {
    gated::detail::CompensatedSum s1, s2, s4;
    bool finite = true;
    for (int i = 1; i <= 4 * n; ++i) {
      const double d = std::abs(oracle.a(i, i));
      if (d == 0.0 || !std::isfinite(d)) {
        finite = false;
        break;
      }
      const double t = 1.0 / d;
      if (i <= n) s1 += t;
      if (i <= 2 * n) s2 += t;
      s4 += t;
    }
    double ratio = 0.0;
    r.condition_inverse_diagonal =
        finite && detail::cauchy_probe(s2.value() - s1.value(), s4.value() - s2.value(),
                                       s4.value(), &ratio);
    r.inverse_diagonal_ratio = ratio;
  }

  // bounded off-diagonal row sums: the second half of the probed rows may not exceed the first
  {
    double first = 0.0;
    double second = 0.0;
    bool finite = true;
    for (int i = 1; i <= n; ++i) {
      const double v = r.off_diagonal[static_cast<std::size_t>(i - 1)];
      if (!std::isfinite(v)) finite = false;
      if (2 * i <= n || n == 1) {
        first = std::max(first, v);
      } else {
        second = std::max(second, v);
      }
    }
    r.max_row_sum = std::max(first, second);
    r.condition_row_bound = finite && second <= first * (1.0 + 1e-12) + 1e-300;
  }

  // column sums over rows <= tail_cutoff
  {
    bool ok = true;
    const int quarter = std::max(1, tail_cutoff / 4);
    const int half = std::max(quarter, tail_cutoff / 2);
    for (int j = 1; j <= n && ok; ++j) {
      gated::detail::CompensatedSum c1, c2, c4;
      for (int i = 1; i <= tail_cutoff; ++i) {
        const double v = std::abs(oracle.a(i, j));
        if (!std::isfinite(v)) {
          ok = false;
          break;
        }
        if (i <= quarter) c1 += v;
        if (i <= half) c2 += v;
        c4 += v;
      }
      double ratio = 0.0;
      if (ok && tail_cutoff >= 4) {
        ok = detail::cauchy_probe(c2.value() - c1.value(), c4.value() - c2.value(), c4.value(),
                                  &ratio);
      }
    }
    r.condition_column_sums = ok;
  }

  {
    double first = 0.0;
    double second = 0.0;
    for (int i = 1; i <= 10 * n; ++i) {
      const double v = std::abs(oracle.b(i));
      if (2 * i <= 10 * n) {
        first = std::max(first, v);
      } else {
        second = std::max(second, v);
      }
    }
    r.rhs_max = std::max(first, second);
    r.rhs_bounded = std::isfinite(r.rhs_max) && second <= first * (1.0 + 1e-12) + 1e-300;
    if (!r.rhs_bounded) r.warnings.push_back("right-hand side grows over the probed rows");
  }

  r.satisfied = r.strictly_dominant && r.condition_inverse_diagonal && r.condition_row_bound &&
                r.condition_column_sums;
  return r;
}

struct LadderStep {
  int order = 0;
  double max_gap = 0.0;
  double residual = 0.0;
};

struct ConvergedSolution {
  std::vector<double> x;
  int n_used = 0;
  /// |x_j^(N) - x_j^(N/2)| over the shared indices of the last two rungs
  std::vector<double> gaps;
  bool converged = false;
  double tolerance = 0.0;
  double residual = 0.0;
  double relative_residual = 0.0;
  std::vector<LadderStep> ladder;

  double max_gap() const {
    double g = 0.0;
    for (double v : gaps) g = std::max(g, v);
    return g;
  }
};

/// Solves truncations on the doubling ladder n_start, 2 n_start, ... until consecutive rungs
/// agree to `tol` on their shared indices, or the ladder passes n_max (converged = false).
inline ConvergedSolution converge(const CoefficientOracle& oracle, int n_start, int n_max,
                                  double tol) {
  if (n_start < 2) throw std::invalid_argument("n_start must be >= 2");
  if (n_max < 2 * n_start) throw std::invalid_argument("n_max must be >= 2 * n_start");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  ConvergedSolution out;
  out.tolerance = tol;
  Solution prev = solve(truncate(oracle, n_start));
  out.ladder.push_back({n_start, std::numeric_limits<double>::infinity(), prev.residual});
  int n = n_start;
  while (2 * n <= n_max) {
    n *= 2;
    Solution cur = solve(truncate(oracle, n));
    std::vector<double> gaps(prev.x.size());
    double worst = 0.0;
    for (std::size_t j = 0; j < prev.x.size(); ++j) {
      gaps[j] = std::abs(cur.x[j] - prev.x[j]);
      worst = std::max(worst, gaps[j]);
    }
    out.ladder.push_back({n, worst, cur.residual});
    out.x = std::move(cur.x);
    out.gaps = std::move(gaps);
    out.n_used = n;
    out.residual = cur.residual;
    out.relative_residual = cur.relative_residual;
    if (worst <= tol) {
      out.converged = true;
      return out;
    }
    prev.x = out.x;
  }
  return out;
}

/// Solves at exactly order n; the rung at 2n only supplies the gaps and the converged flag.
inline ConvergedSolution solve_fixed(const CoefficientOracle& oracle, int n, double tol) {
  if (n < 1) throw std::invalid_argument("order must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  Solution sol = solve(truncate(oracle, n));
  const Solution next = solve(truncate(oracle, 2 * n));
  ConvergedSolution out;
  out.tolerance = tol;
  out.n_used = n;
  out.residual = sol.residual;
  out.relative_residual = sol.relative_residual;
  out.gaps.resize(sol.x.size());
  double worst = 0.0;
  for (std::size_t j = 0; j < sol.x.size(); ++j) {
    out.gaps[j] = std::abs(next.x[j] - sol.x[j]);
    worst = std::max(worst, out.gaps[j]);
  }
  out.converged = worst <= tol;
  out.ladder.push_back({n, worst, sol.residual});
  out.x = std::move(sol.x);
  return out;
}

}  // namespace gated::linsys
