// Test-side reference implementations. Everything here is deliberately
// independent of the library's solution paths: naive loops, bisection,
// sorting, dense linear algebra.
#ifndef RISKMIN_TESTS_ORACLES_HPP
#define RISKMIN_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "riskmin/dataio.hpp"
#include "riskmin/projection.hpp"

namespace oracles {

// --- scalar piecewise-linear pieces -------------------------------------

inline double clamp01(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// independent per-coordinate evaluation of f(lambda)
inline double eval_f_naive(double lambda, const riskmin::TransformedQp &tq) {
  double s = -tq.rhs;
  for (std::size_t i = 0; i < tq.size(); ++i) {
    double hi_kink = tq.dbar2[i] * tq.hi[i];
    double lo_kink = tq.dbar2[i] * tq.lo[i];
    double h;
    if (lambda <= lo_kink)
      h = tq.lo[i];
    else if (lambda >= hi_kink)
      h = tq.hi[i];
    else
      h = lambda / tq.dbar2[i];
    s += h;
  }
  return s;
}

// 200 bisection steps on a bracketing interval
inline double bisect_root(const riskmin::TransformedQp &tq) {
  double lo = 1e300, hi = -1e300;
  for (std::size_t i = 0; i < tq.size(); ++i) {
    lo = std::min(lo, tq.dbar2[i] * tq.lo[i]);
    hi = std::max(hi, tq.dbar2[i] * tq.hi[i]);
  }
  lo -= 1.0;
  hi += 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (eval_f_naive(mid, tq) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

// classic sort-based projection onto {x >= 0, sum x = z}
inline std::vector<double> simplex_projection_sorted(std::vector<double> v,
                                                     double z) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    double t = (css - z) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      rho = j + 1;
      theta = t;
    }
  }
  (void)rho;
  for (double &x : v) x = std::max(0.0, x - theta);
  return v;
}

// --- dense linear algebra -------------------------------------------------

// cyclic Jacobi; returns the largest eigenvalue of a symmetric matrix
inline double jacobi_max_eigenvalue(std::vector<std::vector<double>> a) {
  std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  double best = a[0][0];
  for (std::size_t i = 1; i < n; ++i) best = std::max(best, a[i][i]);
  return best;
}

// Gaussian elimination with partial pivoting; returns false when singular.
inline bool solve_dense(std::vector<std::vector<double>> a,
                        std::vector<double> b, std::vector<double> &x) {
  std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-12) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri][c] * x[c];
    x[ri] = s / a[ri][ri];
  }
  return true;
}

// --- random instances -----------------------------------------------------

inline riskmin::SeparableQpProblem random_qp(std::mt19937 &gen, std::size_t n,
                                             bool allow_zero_sigma = true) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-2.0, 2.0);
  riskmin::SeparableQpProblem p;
  p.d.resize(n);
  p.m.resize(n);
  p.l.resize(n);
  p.u.resize(n);
  p.sigma.resize(n);
  bool any_coupled = false;
  for (std::size_t i = 0; i < n; ++i) {
    double mag = 0.3 + 1.7 * unit(gen);
    p.d[i] = unit(gen) < 0.5 ? -mag : mag;
    p.m[i] = sym(gen);
    p.l[i] = sym(gen);
    p.u[i] = p.l[i] + 0.1 + 1.9 * unit(gen);
    if (allow_zero_sigma && unit(gen) < 0.1) {
      p.sigma[i] = 0.0;
    } else {
      double s = 0.3 + 1.7 * unit(gen);
      p.sigma[i] = unit(gen) < 0.5 ? -s : s;
      any_coupled = true;
    }
  }
  if (!any_coupled) {
    double s = 0.3 + 1.7 * unit(gen);
    p.sigma[0] = unit(gen) < 0.5 ? -s : s;
  }
  double wlo = 0.0, whi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (p.sigma[i] > 0.0) {
      wlo += p.sigma[i] * p.l[i];
      whi += p.sigma[i] * p.u[i];
    } else if (p.sigma[i] < 0.0) {
      wlo += p.sigma[i] * p.u[i];
      whi += p.sigma[i] * p.l[i];
    }
  }
  double theta = 0.05 + 0.9 * unit(gen);
  p.z = wlo + theta * (whi - wlo);
  return p;
}

// exact feasible point of a transformed problem via capacity repair
inline std::vector<double> random_feasible_beta(std::mt19937 &gen,
                                                const riskmin::TransformedQp &tq) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t n = tq.size();
  std::vector<double> beta(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    beta[i] = tq.lo[i] + unit(gen) * (tq.hi[i] - tq.lo[i]);
    s += beta[i];
  }
  double deficit = tq.rhs - s;
  if (deficit > 0.0) {
    double cap = 0.0;
    for (std::size_t i = 0; i < n; ++i) cap += tq.hi[i] - beta[i];
    if (cap > 0.0)
      for (std::size_t i = 0; i < n; ++i)
        beta[i] += deficit * (tq.hi[i] - beta[i]) / cap;
  } else if (deficit < 0.0) {
    double cap = 0.0;
    for (std::size_t i = 0; i < n; ++i) cap += beta[i] - tq.lo[i];
    if (cap > 0.0)
      for (std::size_t i = 0; i < n; ++i)
        beta[i] += deficit * (beta[i] - tq.lo[i]) / cap;
  }
  return beta;
}

inline riskmin::SparseDataset random_dataset(std::mt19937 &gen, std::size_t n,
                                             std::size_t dim,
                                             double density = 0.7) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  riskmin::SparseDataset ds;
  ds.n = n;
  ds.dim = dim;
  ds.rows.resize(n);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j <= dim; ++j)
      if (unit(gen) < density)
        ds.rows[i].push_back({static_cast<int>(j), val(gen)});
    if (ds.rows[i].empty())
      ds.rows[i].push_back({1, val(gen)});
    ds.labels[i] = unit(gen) < 0.5 ? 1 : -1;
  }
  ds.r_max = riskmin::max_row_norm(ds);
  return ds;
}

inline riskmin::SparseDataset dense_dataset(
    const std::vector<std::vector<double>> &x, const std::vector<int> &y) {
  riskmin::SparseDataset ds;
  ds.n = x.size();
  ds.dim = x.empty() ? 0 : x[0].size();
  ds.rows.resize(ds.n);
  ds.labels = y;
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t j = 0; j < x[i].size(); ++j)
      if (x[i][j] != 0.0)
        ds.rows[i].push_back({static_cast<int>(j + 1), x[i][j]});
  ds.r_max = riskmin::max_row_norm(ds);
  return ds;
}

// dense Gram-style matrix Y X^T X Y of a dataset
inline std::vector<std::vector<double>> dense_yxxy(const riskmin::SparseDataset &ds) {
  std::vector<std::vector<double>> m(ds.n, std::vector<double>(ds.n, 0.0));
  for (std::size_t i = 0; i < ds.n; ++i)
    for (std::size_t j = 0; j < ds.n; ++j) {
      double s = 0.0;
      for (const riskmin::Feature &fi : ds.rows[i])
        for (const riskmin::Feature &fj : ds.rows[j])
          if (fi.index == fj.index) s += fi.value * fj.value;
      m[i][j] = ds.labels[i] * ds.labels[j] * s;
    }
  return m;
}

// --- model QP reference ----------------------------------------------------

// maximize -(1/2 lambda) a^T K a + b^T a over the simplex by enumerating every
// support pattern and solving the equality-constrained stationarity system
inline double support_enumeration_max(const std::vector<std::vector<double>> &k,
                                      const std::vector<double> &b,
                                      double lambda) {
  std::size_t t = b.size();
  double best = -1e300;
  for (unsigned mask = 1; mask < (1u << t); ++mask) {
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < t; ++i)
      if (mask & (1u << i)) support.push_back(i);
    std::size_t s = support.size();
    std::vector<std::vector<double>> a(s + 1, std::vector<double>(s + 1, 0.0));
    std::vector<double> rhs(s + 1, 0.0);
    for (std::size_t r = 0; r < s; ++r) {
      for (std::size_t c = 0; c < s; ++c)
        a[r][c] = k[support[r]][support[c]] / lambda;
      a[r][s] = 1.0;
      rhs[r] = b[support[r]];
    }
    for (std::size_t c = 0; c < s; ++c) a[s][c] = 1.0;
    rhs[s] = 1.0;
    std::vector<double> sol;
    if (!solve_dense(a, rhs, sol)) continue;
    bool feasible = true;
    for (std::size_t r = 0; r < s; ++r)
      if (sol[r] < -1e-9) feasible = false;
    if (!feasible) continue;
    double quad = 0.0, lin = 0.0;
    for (std::size_t r = 0; r < s; ++r) {
      lin += b[support[r]] * sol[r];
      for (std::size_t c = 0; c < s; ++c)
        quad += sol[r] * k[support[r]][support[c]] * sol[c];
    }
    best = std::max(best, -quad / (2.0 * lambda) + lin);
  }
  return best;
}

// --- graphical projection reference -----------------------------------------

// Projects clique targets onto the marginal polytope of a tree-structured
// model by running accelerated projected gradient over the joint
// distribution (for trees, the locally consistent polytope is exactly the
// image of the joint simplex). clique_index[c][cfg] maps a joint
// configuration to the clique's table entry.
inline std::vector<std::vector<double>> graph_marginals_oracle(
    std::size_t joint, const std::vector<std::vector<std::size_t>> &clique_index,
    const std::vector<double> &weights,
    const std::vector<std::vector<double>> &targets) {
  std::size_t cliques = targets.size();

  auto marginals_of = [&](const std::vector<double> &p) {
    std::vector<std::vector<double>> m(cliques);
    for (std::size_t c = 0; c < cliques; ++c) {
      m[c].assign(targets[c].size(), 0.0);
      for (std::size_t cfg = 0; cfg < joint; ++cfg)
        m[c][clique_index[c][cfg]] += p[cfg];
    }
    return m;
  };
  auto gradient = [&](const std::vector<double> &p) {
    auto m = marginals_of(p);
    std::vector<double> g(joint, 0.0);
    for (std::size_t c = 0; c < cliques; ++c) {
      double d2 = weights[c] * weights[c];
      for (std::size_t cfg = 0; cfg < joint; ++cfg) {
        std::size_t e = clique_index[c][cfg];
        g[cfg] += d2 * (m[c][e] - targets[c][e]);
      }
    }
    return g;
  };

  // dense Hessian of the joint-space objective for an exact step size
  std::vector<std::vector<double>> hess(joint, std::vector<double>(joint, 0.0));
  for (std::size_t c = 0; c < cliques; ++c) {
    double d2 = weights[c] * weights[c];
    for (std::size_t a = 0; a < joint; ++a)
      for (std::size_t b = 0; b < joint; ++b)
        if (clique_index[c][a] == clique_index[c][b]) hess[a][b] += d2;
  }
  double lip = jacobi_max_eigenvalue(hess) * (1.0 + 1e-9) + 1e-12;

  std::vector<double> p(joint, 1.0 / static_cast<double>(joint));
  std::vector<double> x = p, y = p;
  auto value = [&](const std::vector<double> &q) {
    auto m = marginals_of(q);
    double v = 0.0;
    for (std::size_t c = 0; c < cliques; ++c) {
      double d2 = weights[c] * weights[c];
      for (std::size_t e = 0; e < targets[c].size(); ++e) {
        double diff = m[c][e] - targets[c][e];
        v += 0.5 * d2 * diff * diff;
      }
    }
    return v;
  };
  double vx = value(x);
  double momentum = 1.0;
  for (long it = 0; it < 500000; ++it) {
    std::vector<double> g = gradient(y);
    std::vector<double> step(joint);
    for (std::size_t i = 0; i < joint; ++i) step[i] = y[i] - g[i] / lip;
    std::vector<double> cand = simplex_projection_sorted(step, 1.0);
    double vc = value(cand);
    if (vc > vx) {  // restart from the incumbent
      std::vector<double> gx = gradient(x);
      for (std::size_t i = 0; i < joint; ++i) step[i] = x[i] - gx[i] / lip;
      cand = simplex_projection_sorted(step, 1.0);
      vc = value(cand);
      y = x;
      momentum = 1.0;
    }
    double move = 0.0;
    for (std::size_t i = 0; i < joint; ++i)
      move = std::max(move, std::fabs(cand[i] - x[i]));
    double mom_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    double mix = (momentum - 1.0) / mom_next;
    for (std::size_t i = 0; i < joint; ++i)
      y[i] = cand[i] + mix * (cand[i] - x[i]);
    x = cand;
    vx = vc;
    momentum = mom_next;
    if (move <= 1e-13 && it > 10) break;
  }
  return marginals_of(x);
}

inline std::vector<std::vector<double>> chain_marginals_oracle(
    std::size_t length, std::size_t labels, const std::vector<double> &weights,
    const std::vector<std::vector<double>> &targets) {
  std::size_t edges = length - 1;
  std::size_t joint = 1;
  for (std::size_t i = 0; i < length; ++i) joint *= labels;
  auto node_value = [&](std::size_t cfg, std::size_t t) {
    std::size_t div = 1;
    for (std::size_t i = t + 1; i < length; ++i) div *= labels;
    return (cfg / div) % labels;
  };
  std::vector<std::vector<std::size_t>> idx(edges, std::vector<std::size_t>(joint));
  for (std::size_t t = 0; t < edges; ++t)
    for (std::size_t cfg = 0; cfg < joint; ++cfg)
      idx[t][cfg] = node_value(cfg, t) * labels + node_value(cfg, t + 1);
  return graph_marginals_oracle(joint, idx, weights, targets);
}

// --- linear maximization over Q2 -------------------------------------------

// maximize <c, rho> over {0 <= rho <= 1/n, sum_i y_i rho_i = 0} by
// proximal-point iteration; every step is one separable QP solve and the
// iteration reaches the optimal face exactly after finitely many steps
inline double lp_max_over_q2(const std::vector<double> &c,
                             const std::vector<int> &labels) {
  std::size_t n = labels.size();
  double cap = 1.0 / static_cast<double>(n);
  std::vector<double> rho(n, 0.0);
  for (int it = 0; it < 20000; ++it) {
    riskmin::SeparableQpProblem p;
    p.d.assign(n, 1.0);
    p.m.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.m[i] = rho[i] + c[i];
    p.l.assign(n, 0.0);
    p.u.assign(n, cap);
    p.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.sigma[i] = labels[i];
    p.z = 0.0;
    std::vector<double> next = riskmin::solve_separable_qp(p).alpha;
    double move = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      move = std::max(move, std::fabs(next[i] - rho[i]));
    rho = next;
    if (move <= 1e-14) break;
  }
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) v += c[i] * rho[i];
  return v;
}

}  // namespace oracles

#endif  // RISKMIN_TESTS_ORACLES_HPP
