#ifndef RISKMIN_PROJECTION_HPP
#define RISKMIN_PROJECTION_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

#include "riskmin/common.hpp"

namespace riskmin {

// min 1/2 sum_i d_i^2 (alpha_i - m_i)^2
// s.t. l_i <= alpha_i <= u_i,  sum_i sigma_i alpha_i = z.
// Coordinates with sigma_i == 0 are solved independently.
struct SeparableQpProblem {
  std::vector<double> d;
  std::vector<double> m;
  std::vector<double> l;
  std::vector<double> u;
  std::vector<double> sigma;
  double z = 0.0;

  std::size_t size() const { return m.size(); }
};

// The problem after beta_i = sigma_i (alpha_i - m_i):
// min 1/2 sum dbar2_i beta_i^2  s.t.  lo_i <= beta_i <= hi_i, sum beta_i = rhs.
struct TransformedQp {
  std::vector<double> lo;     // l'
  std::vector<double> hi;     // u'
  std::vector<double> dbar2;  // d_i^2 / sigma_i^2
  double rhs = 0.0;           // z' = z - sum_i sigma_i m_i

  std::size_t size() const { return lo.size(); }
};

struct ProjectionSolution {
  std::vector<double> alpha;
  double lambda = 0.0;         // multiplier of the equality constraint
  double kkt_residual = 0.0;
  int median_iterations = 0;   // halving steps taken by the root finder
};

enum class MedianStrategy { quickselect, median_of_medians };

struct QpSolveOptions {
  double tol = 1e-10;
  MedianStrategy median = MedianStrategy::quickselect;
  std::uint64_t pivot_seed = 0x5eedbea7ull;
};

struct RootResult {
  double lambda = 0.0;
  int iterations = 0;  // median-halving loop count
};

namespace detail {

inline double median_of_medians_select(std::vector<double> &v, std::size_t lo,
                                       std::size_t hi, std::size_t k);

// k-th smallest (k zero-based) of v[lo, hi); reorders the range.
inline double quickselect(std::vector<double> &v, std::size_t lo, std::size_t hi,
                          std::size_t k, SplitMix64 *rng) {
  while (true) {
    if (hi - lo == 1) return v[lo];
    double pivot = rng ? v[lo + rng->below(hi - lo)]
                       : median_of_medians_select(v, lo, hi, (hi - lo) / 2);
    // three-way partition
    std::size_t lt = lo, i = lo, gt = hi;
    while (i < gt) {
      if (v[i] < pivot)
        std::swap(v[i++], v[lt++]);
      else if (v[i] > pivot)
        std::swap(v[i], v[--gt]);
      else
        ++i;
    }
    std::size_t n_less = lt - lo;
    std::size_t n_leq = gt - lo;
    if (k < n_less) {
      hi = lt;
    } else if (k < n_leq) {
      return pivot;
    } else {
      k -= n_leq;
      lo = gt;
    }
  }
}

inline double median_of_medians_select(std::vector<double> &v, std::size_t lo,
                                       std::size_t hi, std::size_t k) {
  std::size_t n = hi - lo;
  if (n <= 5) {
    std::sort(v.begin() + lo, v.begin() + hi);
    return v[lo + k];
  }
  // move each group-of-5 median to the front of the range, recurse for pivot
  std::size_t n_groups = 0;
  for (std::size_t g = lo; g < hi; g += 5) {
    std::size_t ge = std::min(g + 5, hi);
    std::sort(v.begin() + g, v.begin() + ge);
    std::swap(v[lo + n_groups], v[g + (ge - g) / 2]);
    ++n_groups;
  }
  double pivot =
      median_of_medians_select(v, lo, lo + n_groups, n_groups / 2);
  std::size_t lt = lo, i = lo, gt = hi;
  while (i < gt) {
    if (v[i] < pivot)
      std::swap(v[i++], v[lt++]);
    else if (v[i] > pivot)
      std::swap(v[i], v[--gt]);
    else
      ++i;
  }
  std::size_t n_less = lt - lo;
  std::size_t n_leq = gt - lo;
  if (k < n_less) return median_of_medians_select(v, lo, lt, k);
  if (k < n_leq) return pivot;
  return median_of_medians_select(v, gt, hi, k - n_leq);
}

inline double select_kth(std::vector<double> &v, std::size_t k,
                         MedianStrategy strategy, SplitMix64 &rng) {
  if (strategy == MedianStrategy::quickselect)
    return quickselect(v, 0, v.size(), k, &rng);
  return median_of_medians_select(v, 0, v.size(), k);
}

}  // namespace detail

// f(lambda) of the transformed problem: sum_i clamp(lambda / dbar2_i, lo_i,
// hi_i) - rhs. Piecewise linear and nondecreasing; its root is the optimal
// equality multiplier.
inline double eval_f(double lambda, const TransformedQp &tq) {
  double s = -tq.rhs;
  for (std::size_t i = 0; i < tq.size(); ++i)
    s += clamp(lambda / tq.dbar2[i], tq.lo[i], tq.hi[i]);
  return s;
}

// Converts to the beta variables. Requires sigma_i != 0 for every coordinate.
inline TransformedQp transform_qp(const SeparableQpProblem &p) {
  TransformedQp tq;
  std::size_t n = p.size();
  tq.lo.resize(n);
  tq.hi.resize(n);
  tq.dbar2.resize(n);
  double shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = p.sigma[i];
    if (s == 0.0) throw InvalidProblem("transform_qp: sigma == 0");
    if (s > 0.0) {
      tq.lo[i] = s * (p.l[i] - p.m[i]);
      tq.hi[i] = s * (p.u[i] - p.m[i]);
    } else {
      tq.lo[i] = s * (p.u[i] - p.m[i]);
      tq.hi[i] = s * (p.l[i] - p.m[i]);
    }
    tq.dbar2[i] = p.d[i] * p.d[i] / (s * s);
    shift += s * p.m[i];
  }
  tq.rhs = p.z - shift;
  return tq;
}

// Root of f by repeated median selection over the surviving kink set.
// Expected O(n): the kink set halves every iteration and evaluating f costs
// O(|S|) thanks to running slope/offset sums for coordinates whose clamped
// segment is already decided on the current bracket.
inline RootResult find_root_median(const TransformedQp &tq,
                                   const QpSolveOptions &opt = {}) {
  std::size_t n = tq.size();
  if (n == 0) throw InvalidProblem("find_root_median: empty problem");

  struct Coord {
    double inv;  // 1 / dbar2
    double lo, hi;
    double klo, khi;  // kinks dbar2*lo, dbar2*hi
  };
  std::vector<Coord> active(n);
  double sum_lo = 0.0, sum_hi = 0.0;
  double kink_min = 0.0, kink_max = 0.0;
  std::vector<double> kinks;
  kinks.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    Coord c;
    c.inv = 1.0 / tq.dbar2[i];
    c.lo = tq.lo[i];
    c.hi = tq.hi[i];
    if (!(c.lo < c.hi)) throw InvalidProblem("find_root_median: lo >= hi");
    c.klo = tq.dbar2[i] * c.lo;
    c.khi = tq.dbar2[i] * c.hi;
    active[i] = c;
    sum_lo += c.lo;
    sum_hi += c.hi;
    if (i == 0) {
      kink_min = c.klo;
      kink_max = c.khi;
    } else {
      kink_min = std::min(kink_min, c.klo);
      kink_max = std::max(kink_max, c.khi);
    }
    kinks.push_back(c.klo);
    kinks.push_back(c.khi);
  }

  double f_lo = sum_lo - tq.rhs;  // f on (-inf, kink_min]
  double f_hi = sum_hi - tq.rhs;  // f on [kink_max, +inf)
  double slack = opt.tol * std::max(1.0, std::fabs(tq.rhs));
  if (f_lo > slack || f_hi < -slack)
    throw Infeasible("find_root_median: f has no sign change");
  if (f_lo >= 0.0) return {kink_min, 0};
  if (f_hi <= 0.0) return {kink_max, 0};

  double lob = kink_min, hib = kink_max;
  double offset = 0.0, slope = 0.0;

  auto resolve = [&]() {
    std::size_t keep = 0;
    for (std::size_t i = 0; i < active.size(); ++i) {
      const Coord &c = active[i];
      if (c.khi <= lob)
        offset += c.hi;
      else if (c.klo >= hib)
        offset += c.lo;
      else if (c.klo <= lob && c.khi >= hib)
        slope += c.inv;
      else
        active[keep++] = c;
    }
    active.resize(keep);
  };

  auto eval = [&](double x) {
    double s = offset + slope * x - tq.rhs;
    for (const Coord &c : active) s += clamp(x * c.inv, c.lo, c.hi);
    return s;
  };

  std::vector<double> survivors;
  survivors.reserve(2 * n);
  for (double k : kinks)
    if (k > lob && k < hib) survivors.push_back(k);
  resolve();

  SplitMix64 rng(opt.pivot_seed);
  int iterations = 0;
  while (survivors.size() > 2) {
    std::size_t rank = (survivors.size() - 1) / 2;  // lower median
    double med = detail::select_kth(survivors, rank, opt.median, rng);
    double fm = eval(med);
    std::size_t keep = 0;
    if (fm >= 0.0) {
      hib = med;
      f_hi = fm;
      for (double k : survivors)
        if (k < med) survivors[keep++] = k;
    } else {
      lob = med;
      f_lo = fm;
      for (double k : survivors)
        if (k > med) survivors[keep++] = k;
    }
    survivors.resize(keep);
    resolve();
    ++iterations;
  }

  // pin down the at-most-two remaining interior kinks directly
  std::sort(survivors.begin(), survivors.end());
  for (double k : survivors) {
    if (k <= lob || k >= hib) continue;
    double fk = eval(k);
    if (fk >= 0.0) {
      hib = k;
      f_hi = fk;
    } else {
      lob = k;
      f_lo = fk;
    }
    resolve();
  }

  // f is linear on [lob, hib] with f_lo <= 0 <= f_hi
  double denom = f_hi - f_lo;
  double root;
  if (denom <= 0.0)
    root = 0.5 * (lob + hib);  // flat segment of roots
  else
    root = (lob * f_hi - hib * f_lo) / denom;
  return {clamp(root, lob, hib), iterations};
}

namespace detail {

// Root by full kink sort and linear scan; O(n log n + n^2) and deliberately
// naive. This is the independent reference path for find_root_median.
inline double find_root_sorted(const TransformedQp &tq) {
  std::size_t n = tq.size();
  std::vector<double> kinks;
  kinks.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    kinks.push_back(tq.dbar2[i] * tq.lo[i]);
    kinks.push_back(tq.dbar2[i] * tq.hi[i]);
  }
  std::sort(kinks.begin(), kinks.end());
  double f_first = eval_f(kinks.front(), tq);
  if (f_first > 0.0) {
    if (f_first > 1e-9 * std::max(1.0, std::fabs(tq.rhs)))
      throw Infeasible("find_root_sorted: no sign change");
    return kinks.front();
  }
  if (f_first == 0.0) return kinks.front();
  double prev = kinks.front(), f_prev = f_first;
  for (std::size_t j = 1; j < kinks.size(); ++j) {
    double cur = kinks[j];
    double f_cur = eval_f(cur, tq);
    if (f_cur >= 0.0) {
      double denom = f_cur - f_prev;
      if (denom <= 0.0) return 0.5 * (prev + cur);
      return (prev * f_cur - cur * f_prev) / denom;
    }
    prev = cur;
    f_prev = f_cur;
  }
  throw Infeasible("find_root_sorted: no sign change");
}

struct SplitProblem {
  std::vector<std::size_t> coupled;  // indices with sigma != 0
  TransformedQp tq;
};

inline void validate_problem(const SeparableQpProblem &p) {
  std::size_t n = p.size();
  if (n == 0) throw InvalidProblem("empty problem");
  if (p.d.size() != n || p.l.size() != n || p.u.size() != n ||
      p.sigma.size() != n)
    throw InvalidProblem("field length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (p.d[i] == 0.0) throw InvalidProblem("d == 0");
    if (!(p.l[i] < p.u[i])) throw InvalidProblem("l >= u");
  }
}

// Handles sigma == 0 coordinates and the feasibility window; fills `alpha`
// for the independent coordinates and returns the coupled subproblem.
inline SplitProblem split_and_transform(const SeparableQpProblem &p,
                                        std::vector<double> &alpha,
                                        double tol) {
  std::size_t n = p.size();
  alpha.assign(n, 0.0);
  SplitProblem sp;
  double window_lo = 0.0, window_hi = 0.0, shift = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.sigma[i] == 0.0) {
      alpha[i] = clamp(p.m[i], p.l[i], p.u[i]);
      continue;
    }
    sp.coupled.push_back(i);
    if (p.sigma[i] > 0.0) {
      window_lo += p.sigma[i] * p.l[i];
      window_hi += p.sigma[i] * p.u[i];
    } else {
      window_lo += p.sigma[i] * p.u[i];
      window_hi += p.sigma[i] * p.l[i];
    }
    shift += p.sigma[i] * p.m[i];
  }
  double slack =
      tol * std::max({1.0, std::fabs(p.z), std::fabs(window_lo),
                      std::fabs(window_hi)});
  if (p.z < window_lo - slack || p.z > window_hi + slack)
    throw Infeasible("z outside the feasibility window");
  if (sp.coupled.empty()) return sp;

  double z_eff = clamp(p.z, window_lo, window_hi);
  std::size_t k = sp.coupled.size();
  sp.tq.lo.resize(k);
  sp.tq.hi.resize(k);
  sp.tq.dbar2.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t i = sp.coupled[j];
    double s = p.sigma[i];
    if (s > 0.0) {
      sp.tq.lo[j] = s * (p.l[i] - p.m[i]);
      sp.tq.hi[j] = s * (p.u[i] - p.m[i]);
    } else {
      sp.tq.lo[j] = s * (p.u[i] - p.m[i]);
      sp.tq.hi[j] = s * (p.l[i] - p.m[i]);
    }
    sp.tq.dbar2[j] = p.d[i] * p.d[i] / (s * s);
  }
  sp.tq.rhs = z_eff - shift;
  return sp;
}

// beta -> alpha, pinning coordinates that sit on a transformed bound exactly
// onto the original bound.
inline void recover_alpha(const SeparableQpProblem &p, const SplitProblem &sp,
                          double lambda, std::vector<double> &alpha) {
  for (std::size_t j = 0; j < sp.coupled.size(); ++j) {
    std::size_t i = sp.coupled[j];
    double beta = clamp(lambda / sp.tq.dbar2[j], sp.tq.lo[j], sp.tq.hi[j]);
    bool pos = p.sigma[i] > 0.0;
    if (beta == sp.tq.lo[j])
      alpha[i] = pos ? p.l[i] : p.u[i];
    else if (beta == sp.tq.hi[j])
      alpha[i] = pos ? p.u[i] : p.l[i];
    else
      alpha[i] = clamp(p.m[i] + beta / p.sigma[i], p.l[i], p.u[i]);
  }
}

inline double kkt_residual(const SeparableQpProblem &p,
                           const std::vector<double> &alpha, double lambda) {
  double r = 0.0;
  double eq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double g = p.d[i] * p.d[i] * (alpha[i] - p.m[i]) - p.sigma[i] * lambda;
    r = std::max(r, std::fabs(alpha[i] - clamp(alpha[i] - g, p.l[i], p.u[i])));
    eq += p.sigma[i] * alpha[i];
  }
  r = std::max(r, std::fabs(eq - p.z) / std::max(1.0, std::fabs(p.z)));
  return r;
}

}  // namespace detail

// Exact solution of the separable box QP with one equality constraint,
// expected O(n) time via find_root_median.
inline ProjectionSolution solve_separable_qp(const SeparableQpProblem &p,
                                             const QpSolveOptions &opt = {}) {
  detail::validate_problem(p);
  ProjectionSolution sol;
  detail::SplitProblem sp = detail::split_and_transform(p, sol.alpha, opt.tol);
  if (!sp.coupled.empty()) {
    RootResult root = find_root_median(sp.tq, opt);
    sol.lambda = root.lambda;
    sol.median_iterations = root.iterations;
    detail::recover_alpha(p, sp, root.lambda, sol.alpha);
  }
  sol.kkt_residual = detail::kkt_residual(p, sol.alpha, sol.lambda);
  return sol;
}

// Same contract as solve_separable_qp, with the root located by sorting all
// kinks and scanning. Kept as the independent cross-check of the median path.
inline ProjectionSolution solve_sorted_oracle(const SeparableQpProblem &p) {
  detail::validate_problem(p);
  ProjectionSolution sol;
  detail::SplitProblem sp =
      detail::split_and_transform(p, sol.alpha, QpSolveOptions{}.tol);
  if (!sp.coupled.empty()) {
    sol.lambda = detail::find_root_sorted(sp.tq);
    detail::recover_alpha(p, sp, sol.lambda, sol.alpha);
  }
  sol.kkt_residual = detail::kkt_residual(p, sol.alpha, sol.lambda);
  return sol;
}

}  // namespace riskmin

#endif  // RISKMIN_PROJECTION_HPP
