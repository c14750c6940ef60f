#ifndef RISKMIN_BUNDLE_HPP
#define RISKMIN_BUNDLE_HPP

#include <algorithm>
#include <chrono>
#include <functional>
#include <vector>

#include "riskmin/common.hpp"
#include "riskmin/dataio.hpp"
#include "riskmin/objective.hpp"
#include "riskmin/projection.hpp"
#include "riskmin/trace.hpp"

namespace riskmin {

// Piecewise-linear model of the empirical risk plus the quadratic regularizer,
// together with its simplex dual. Invariants: alpha lies on the simplex over
// the planes and w = -(1/lambda) sum_i alpha_i a_i.
struct CuttingPlaneModel {
  double lambda = 1.0;
  std::size_t dim = 0;
  std::vector<CuttingPlane> planes;
  std::vector<double> alpha;
  std::vector<double> w;
  double dual_value = 0.0;    // certified lower bound on min_w J_t(w)
  double primal_value = 0.0;  // J_t at the stored w
  std::vector<double> gram;   // row-major t x t Gram matrix of plane slopes

  std::size_t t() const { return planes.size(); }

  double gram_at(std::size_t i, std::size_t j) const {
    return gram[i * t() + j];
  }
};

inline CuttingPlaneModel make_model(std::size_t dim, double lambda) {
  CuttingPlaneModel m;
  m.dim = dim;
  m.lambda = lambda;
  return m;
}

namespace detail {

inline double model_dual_value(const CuttingPlaneModel &m,
                               const std::vector<double> &alpha) {
  double quad = 0.0, lin = 0.0;
  std::size_t t = m.t();
  for (std::size_t i = 0; i < t; ++i) {
    lin += m.planes[i].b * alpha[i];
    double row = 0.0;
    for (std::size_t j = 0; j < t; ++j) row += m.gram_at(i, j) * alpha[j];
    quad += alpha[i] * row;
  }
  return -quad / (2.0 * m.lambda) + lin;
}

inline double model_primal_value(const CuttingPlaneModel &m,
                                 const std::vector<double> &w) {
  double best = m.planes.empty() ? 0.0 : -1e300;
  for (const CuttingPlane &p : m.planes)
    best = std::max(best, dot(p.a, w) + p.b);
  return 0.5 * m.lambda * squared_norm(w) + best;
}

inline std::vector<double> aggregate_w(const CuttingPlaneModel &m,
                                       const std::vector<double> &alpha) {
  std::vector<double> w(m.dim, 0.0);
  for (std::size_t i = 0; i < m.t(); ++i)
    if (alpha[i] != 0.0) axpy(alpha[i], m.planes[i].a, w);
  scale(-1.0 / m.lambda, w);
  return w;
}

inline void refresh_values(CuttingPlaneModel &m) {
  m.dual_value = model_dual_value(m, m.alpha);
  m.primal_value = model_primal_value(m, m.w);
}

// largest eigenvalue of the Gram matrix by power iteration
inline double gram_spectral_norm(const CuttingPlaneModel &m) {
  std::size_t t = m.t();
  SplitMix64 rng(0x9e3779b9ull);
  std::vector<double> v(t);
  for (double &x : v) x = rng.uniform(0.5, 1.5);
  double nv = norm(v);
  if (nv == 0.0) return 0.0;
  scale(1.0 / nv, v);
  double theta = 0.0;
  std::vector<double> kv(t);
  for (int it = 0; it < 20000; ++it) {
    for (std::size_t i = 0; i < t; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < t; ++j) s += m.gram_at(i, j) * v[j];
      kv[i] = s;
    }
    double theta_new = dot(v, kv);
    double nk = norm(kv);
    if (nk == 0.0) return 0.0;
    scale(1.0 / nk, kv);
    v.swap(kv);
    if (it > 0 && std::fabs(theta_new - theta) <= 1e-8 * std::max(theta_new, 1e-300)) {
      theta = theta_new;
      break;
    }
    theta = theta_new;
  }
  return theta;
}

inline std::vector<double> project_simplex(const std::vector<double> &point) {
  SeparableQpProblem p;
  std::size_t t = point.size();
  p.d.assign(t, 1.0);
  p.m = point;
  p.l.assign(t, 0.0);
  p.u.assign(t, 1.0);
  p.sigma.assign(t, 1.0);
  p.z = 1.0;
  return solve_separable_qp(p).alpha;
}

// Gaussian elimination with partial pivoting; false when near-singular.
inline bool solve_linear(std::vector<std::vector<double>> a,
                         std::vector<double> b, std::vector<double> &x) {
  std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-13) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a[r][col] / a[col][col];
      for (std::size_t c2 = col; c2 < n; ++c2) a[r][c2] -= f * a[col][c2];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c2 = ri + 1; c2 < n; ++c2) s -= a[ri][c2] * x[c2];
    x[ri] = s / a[ri][ri];
  }
  return true;
}

// Active-set finisher for the simplex dual: starting from the support of a
// near-optimal point, solves the stationarity system on the support exactly
// and exchanges coordinates until the full optimality conditions hold. The
// accelerated sweep identifies the support; this step removes the tail of
// its linear convergence, which matters once the cuts grow correlated and
// 1/lambda amplifies the curvature spread. Near-singular stationarity
// systems (duplicated cuts) are retried with a small ridge; the caller
// validates the result against the true gradient either way.
inline bool active_set_finish(const CuttingPlaneModel &m,
                              std::vector<double> &x, double tol) {
  std::size_t t = m.t();
  std::vector<char> in_support(t, 0);
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < t; ++i)
    if (x[i] > 1e-12) {
      in_support[i] = 1;
      support.push_back(i);
    }
  if (!in_support[t - 1]) {  // the newest plane is usually active
    in_support[t - 1] = 1;
    support.push_back(t - 1);
  }

  long pivot_cap = std::min<long>(4 * static_cast<long>(t) + 8, 150);
  for (long pivot = 0; pivot < pivot_cap; ++pivot) {
    std::size_t s = support.size();
    std::vector<std::vector<double>> sys(s + 1, std::vector<double>(s + 1, 0.0));
    std::vector<double> rhs(s + 1, 0.0);
    double max_diag = 0.0;
    for (std::size_t r = 0; r < s; ++r) {
      for (std::size_t c2 = 0; c2 < s; ++c2)
        sys[r][c2] = m.gram_at(support[r], support[c2]) / m.lambda;
      max_diag = std::max(max_diag, sys[r][r]);
      sys[r][s] = 1.0;
      rhs[r] = m.planes[support[r]].b;
    }
    for (std::size_t c2 = 0; c2 < s; ++c2) sys[s][c2] = 1.0;
    rhs[s] = 1.0;
    std::vector<double> sol;
    if (!solve_linear(sys, rhs, sol)) {
      double ridge = 1e-9 * (1.0 + max_diag);
      for (std::size_t r = 0; r < s; ++r) sys[r][r] += ridge;
      if (!solve_linear(sys, rhs, sol)) return false;
    }

    // drop the most negative coordinate and re-solve
    std::size_t worst = s;
    double worst_val = -1e-12;
    for (std::size_t r = 0; r < s; ++r)
      if (sol[r] < worst_val) {
        worst_val = sol[r];
        worst = r;
      }
    if (worst != s) {
      if (s == 1) return false;
      in_support[support[worst]] = 0;
      support.erase(support.begin() + static_cast<long>(worst));
      continue;
    }

    std::vector<double> cand(t, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < s; ++r) {
      cand[support[r]] = std::max(sol[r], 0.0);
      total += cand[support[r]];
    }
    if (total <= 0.0) return false;
    for (double &v : cand) v /= total;

    // full optimality check; bring in the most violated coordinate if any
    double nu = sol[s];
    std::size_t enter = t;
    double enter_val = nu + 0.5 * tol;
    for (std::size_t i = 0; i < t; ++i) {
      if (in_support[i]) continue;
      double row = 0.0;
      for (std::size_t j = 0; j < t; ++j) row += m.gram_at(i, j) * cand[j];
      double g = m.planes[i].b - row / m.lambda;
      if (g > enter_val) {
        enter_val = g;
        enter = i;
      }
    }
    if (enter == t) {
      x = cand;
      return true;
    }
    in_support[enter] = 1;
    support.push_back(enter);
  }
  return false;
}

}  // namespace detail

// J_t at an arbitrary point: the regularizer plus the max over planes.
inline double model_objective(const CuttingPlaneModel &m,
                              const std::vector<double> &w) {
  return detail::model_primal_value(m, w);
}

// Appends a plane. An empty model takes the single-plane closed form;
// otherwise the dual is padded with a zero coordinate, which leaves the dual
// value and w unchanged.
inline void add_cut(CuttingPlaneModel &m, const CuttingPlane &plane) {
  if (plane.a.size() != m.dim) throw InvalidProblem("plane dimension mismatch");
  std::size_t t_old = m.t();
  std::vector<double> dots(t_old);
  for (std::size_t i = 0; i < t_old; ++i) dots[i] = dot(m.planes[i].a, plane.a);
  double self = squared_norm(plane.a);

  std::vector<double> gram((t_old + 1) * (t_old + 1));
  for (std::size_t i = 0; i < t_old; ++i) {
    for (std::size_t j = 0; j < t_old; ++j)
      gram[i * (t_old + 1) + j] = m.gram_at(i, j);
    gram[i * (t_old + 1) + t_old] = dots[i];
    gram[t_old * (t_old + 1) + i] = dots[i];
  }
  gram[t_old * (t_old + 1) + t_old] = self;
  m.gram = std::move(gram);
  m.planes.push_back(plane);

  if (t_old == 0) {
    m.alpha = {1.0};
    m.w = plane.a;
    scale(-1.0 / m.lambda, m.w);
  } else {
    m.alpha.push_back(0.0);
  }
  detail::refresh_values(m);
}

// Maximizes -(1/2 lambda) alpha^T K alpha + b^T alpha over the simplex with
// accelerated projected gradient (projection via the separable QP engine),
// warm-started from the current dual. Terminates when the linearized
// optimality gap max_i g_i - <g, alpha> falls below tol; that gap also equals
// the primal-dual residual of the model solve.
inline double solve_model_qp(CuttingPlaneModel &m, double tol = 1e-10) {
  std::size_t t = m.t();
  if (t == 0) throw InvalidProblem("solve_model_qp: empty model");
  if (t == 1) {
    m.alpha = {1.0};
    m.w = detail::aggregate_w(m, m.alpha);
    detail::refresh_values(m);
    return 0.0;
  }

  auto grad = [&](const std::vector<double> &a) {
    std::vector<double> g(t);
    for (std::size_t i = 0; i < t; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < t; ++j) row += m.gram_at(i, j) * a[j];
      g[i] = m.planes[i].b - row / m.lambda;
    }
    return g;
  };
  auto value = [&](const std::vector<double> &a) {
    return detail::model_dual_value(m, a);
  };
  auto wolfe_gap = [&](const std::vector<double> &a,
                       const std::vector<double> &g) {
    double nu = *std::max_element(g.begin(), g.end());
    return nu - dot(g, a);
  };

  double norm_k = detail::gram_spectral_norm(m);
  if (norm_k <= 0.0) {
    // all slopes vanish: the dual is linear, mass goes on the best offset
    std::size_t best = 0;
    for (std::size_t i = 1; i < t; ++i)
      if (m.planes[i].b > m.planes[best].b) best = i;
    m.alpha.assign(t, 0.0);
    m.alpha[best] = 1.0;
    m.w = detail::aggregate_w(m, m.alpha);
    detail::refresh_values(m);
    return 0.0;
  }
  double step = m.lambda / (norm_k * (1.0 + 1e-6));

  std::vector<double> x = m.alpha;
  std::vector<double> y = x;
  double vx = value(x);
  double momentum = 1.0;
  double residual = 0.0;
  const long cap = 200000;
  const long round_budget = 400 + 40 * static_cast<long>(t);
  bool done = false;

  auto try_finish = [&]() {
    std::vector<double> refined = x;
    if (!detail::active_set_finish(m, refined, tol)) return false;
    std::vector<double> gr = grad(refined);
    double r_ref = wolfe_gap(refined, gr);
    if (r_ref > tol || value(refined) < vx - 1e-12) return false;
    x = refined;
    residual = r_ref;
    return true;
  };

  // warm-started support is usually one pivot away from optimal
  done = try_finish();
  for (long it = 0; it < cap && !done; ++it) {
    std::vector<double> gy = grad(y);
    std::vector<double> cand(t);
    for (std::size_t i = 0; i < t; ++i) cand[i] = y[i] + step * gy[i];
    cand = detail::project_simplex(cand);
    double vc = value(cand);
    if (vc < vx) {
      // momentum overshoot: plain ascent step from the incumbent
      std::vector<double> gx = grad(x);
      for (std::size_t i = 0; i < t; ++i) cand[i] = x[i] + step * gx[i];
      cand = detail::project_simplex(cand);
      vc = value(cand);
      y = x;
      momentum = 1.0;
    }
    std::vector<double> gc = grad(cand);
    residual = wolfe_gap(cand, gc);
    if (residual <= tol) {
      x = cand;
      done = true;
      break;
    }
    double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    double mix = (momentum - 1.0) / momentum_next;
    for (std::size_t i = 0; i < t; ++i)
      y[i] = cand[i] + mix * (cand[i] - x[i]);
    x = cand;
    vx = vc;
    momentum = momentum_next;

    // once the accelerated sweep has identified the support, finish exactly
    if ((it + 1) % round_budget == 0) {
      done = try_finish();
      if (!done) {
        y = x;
        momentum = 1.0;
      }
    }
  }
  if (!done)
    throw NoConvergence("solve_model_qp: inner QP iteration cap", residual);

  m.alpha = x;
  m.w = detail::aggregate_w(m, m.alpha);
  detail::refresh_values(m);
  return residual;
}

// Line-search step: append the plane, then move the dual along the segment
// from the padded incumbent towards the new vertex, with the exactly optimal
// eta in [0, 1].
inline void lsbmrm_step(CuttingPlaneModel &m, const CuttingPlane &plane) {
  if (m.t() == 0) {
    add_cut(m, plane);
    return;
  }
  double base_offset = 0.0;
  for (std::size_t i = 0; i < m.t(); ++i)
    base_offset += m.planes[i].b * m.alpha[i];
  std::vector<double> p = m.w;
  scale(-m.lambda, p);  // aggregated slope A alpha

  add_cut(m, plane);

  std::vector<double> diff = plane.a;
  axpy(-1.0, p, diff);  // q - p
  double denom = squared_norm(diff);
  double eta;
  if (denom <= 0.0) {
    eta = plane.b > base_offset ? 1.0 : 0.0;
  } else {
    eta = (m.lambda * (plane.b - base_offset) - dot(p, diff)) / denom;
    eta = clamp(eta, 0.0, 1.0);
  }
  std::size_t t = m.t();
  for (std::size_t i = 0; i + 1 < t; ++i) m.alpha[i] *= (1.0 - eta);
  m.alpha[t - 1] = eta;
  for (std::size_t j = 0; j < m.dim; ++j)
    m.w[j] = (1.0 - eta) * m.w[j] - eta * plane.a[j] / m.lambda;
  detail::refresh_values(m);
}

// eps_t = min over observed J values minus the current model minimum.
inline double epsilon_gap(const std::vector<double> &history,
                          const CuttingPlaneModel &m) {
  if (history.empty()) throw InvalidProblem("epsilon_gap: empty history");
  return *std::min_element(history.begin(), history.end()) - m.dual_value;
}

enum class BundleVariant { line_search, full_qp };

struct BmrmOptions {
  double lambda = 1.0;
  BundleVariant variant = BundleVariant::full_qp;
  double eps = 1e-4;
  long max_iter = 10000;
  double qp_tol = 1e-10;
  std::function<void(const ConvergenceRecord &, const std::vector<double> &w)>
      on_iteration;
};

struct BmrmResult {
  PrimalModel model;  // incumbent (best observed J)
  std::vector<ConvergenceRecord> trace;
  CuttingPlaneModel bundle;
  bool converged = false;
};

// Generic bundle loop over an arbitrary risk oracle: cut_at(w) returns a
// lower-bounding plane of the risk at w, objective(w) evaluates the full
// regularized objective.
inline BmrmResult bmrm_minimize(
    std::size_t dim, const std::function<CuttingPlane(const std::vector<double> &)> &cut_at,
    const std::function<double(const std::vector<double> &)> &objective,
    const BmrmOptions &opt) {
  if (opt.lambda <= 0.0 || opt.eps <= 0.0)
    throw InvalidProblem("lambda and eps must be positive");
  if (opt.max_iter < 1) throw InvalidProblem("max_iter must be at least 1");
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  BmrmResult res;
  res.bundle = make_model(dim, opt.lambda);
  std::vector<double> w(dim, 0.0);
  std::vector<double> history = {objective(w)};
  std::vector<double> w_best = w;
  double j_best = history[0];

  // The model solve only has to certify eps_t to a fraction of the target
  // gap; an absolute 1e-10 at very small lambda sits below the attainable
  // floating-point floor of the amplified quadratic. Capped at 1e-8 so the
  // per-solve strong-duality witness stays intact.
  double inner_tol = std::max(opt.qp_tol, std::min(1e-4 * opt.eps, 1e-8));

  for (long t = 1; t <= opt.max_iter; ++t) {
    CuttingPlane plane = cut_at(w);
    if (opt.variant == BundleVariant::full_qp) {
      add_cut(res.bundle, plane);
      solve_model_qp(res.bundle, inner_tol);
    } else {
      lsbmrm_step(res.bundle, plane);
    }
    w = res.bundle.w;
    double j_now = objective(w);
    history.push_back(j_now);
    if (j_now < j_best) {
      j_best = j_now;
      w_best = w;
    }
    double eps_t = epsilon_gap(history, res.bundle);

    ConvergenceRecord r;
    r.iter = t;
    r.wall_seconds = elapsed();
    r.J = j_now;
    r.eps_t = eps_t;
    res.trace.push_back(r);
    if (opt.on_iteration) opt.on_iteration(r, w);

    if (eps_t <= opt.eps) {
      res.converged = true;
      break;
    }
  }
  res.model.w = w_best;
  res.model.lambda = opt.lambda;
  return res;
}

// BMRM on the binary hinge risk (no intercept).
inline BmrmResult bmrm_train(const SparseDataset &ds, const BmrmOptions &opt) {
  auto cut = [&ds](const std::vector<double> &w) { return hinge_cut(w, ds); };
  auto obj = [&ds, &opt](const std::vector<double> &w) {
    PrimalModel m;
    m.w = w;
    m.lambda = opt.lambda;
    return primal_objective(m, ds);
  };
  return bmrm_minimize(ds.dim, cut, obj, opt);
}

}  // namespace riskmin

#endif  // RISKMIN_BUNDLE_HPP
