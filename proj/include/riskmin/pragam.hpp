#ifndef RISKMIN_PRAGAM_HPP
#define RISKMIN_PRAGAM_HPP

#include <chrono>
#include <functional>
#include <optional>
#include <vector>

#include "riskmin/common.hpp"
#include "riskmin/dataio.hpp"
#include "riskmin/objective.hpp"
#include "riskmin/projection.hpp"
#include "riskmin/trace.hpp"

namespace riskmin {

enum class LipschitzMethod { bound, power };

// Lipschitz constant of grad D. `bound` is n R^2 / lambda; `power` runs power
// iteration on Y X^T X Y and returns sigma_max^2(X Y) / lambda, which never
// exceeds the bound.
inline double estimate_lipschitz(const SparseDataset &ds, double lambda,
                                 LipschitzMethod method) {
  if (ds.n == 0) throw InvalidProblem("empty dataset");
  if (method == LipschitzMethod::bound)
    return static_cast<double>(ds.n) * ds.r_max * ds.r_max / lambda;

  SplitMix64 rng(0xd1cefacell);
  std::vector<double> v(ds.n);
  for (double &x : v) x = rng.uniform(0.5, 1.5);
  double inv = 1.0 / norm(v);
  scale(inv, v);

  double theta = 0.0;
  std::vector<double> mv(ds.n);
  for (int it = 0; it < 100000; ++it) {
    std::vector<double> u(ds.dim, 0.0);
    for (std::size_t i = 0; i < ds.n; ++i)
      add_scaled_row(ds, i, v[i] * ds.labels[i], u);
    for (std::size_t i = 0; i < ds.n; ++i)
      mv[i] = ds.labels[i] * dot_row(ds, i, u);
    double theta_new = dot(v, mv);  // Rayleigh quotient, ||v|| == 1
    double nm = norm(mv);
    if (nm == 0.0) return 0.0;
    scale(1.0 / nm, mv);
    v.swap(mv);
    if (it > 0 && std::fabs(theta_new - theta) <= 1e-6 * std::max(theta_new, 1e-300)) {
      theta = theta_new;
      break;
    }
    theta = theta_new;
  }
  return theta / lambda;
}

// alpha_mu(w): argmin over Q2 of (mu/2)||alpha||^2 + w^T X Y alpha - sum alpha.
// Componentwise clamp without the equality constraint; a separable QP solve
// with it.
inline DualPoint map_alpha_mu(const std::vector<double> &w, double mu,
                              const SparseDataset &ds, bool bias_mode) {
  if (mu <= 0.0) throw InvalidProblem("mu must be positive");
  std::size_t n = ds.n;
  double cap = 1.0 / static_cast<double>(n);
  DualPoint out;
  out.bias_mode = bias_mode;
  out.alpha.resize(n);
  if (!bias_mode) {
    for (std::size_t i = 0; i < n; ++i) {
      double margin = ds.labels[i] * dot_row(ds, i, w);
      out.alpha[i] = clamp((1.0 - margin) / mu, 0.0, cap);
    }
    return out;
  }
  SeparableQpProblem p;
  p.d.assign(n, std::sqrt(mu));
  p.m.resize(n);
  p.l.assign(n, 0.0);
  p.u.assign(n, cap);
  p.sigma.resize(n);
  p.z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double margin = ds.labels[i] * dot_row(ds, i, w);
    p.m[i] = (1.0 - margin) / mu;
    p.sigma[i] = ds.labels[i];
  }
  out.alpha = solve_separable_qp(p).alpha;
  return out;
}

// v(alpha): projection of alpha + grad D(alpha) / L onto Q2.
inline DualPoint map_v(const DualPoint &alpha, double L, const SparseDataset &ds,
                       double lambda) {
  if (L <= 0.0) throw InvalidProblem("L must be positive");
  std::size_t n = ds.n;
  double cap = 1.0 / static_cast<double>(n);
  std::vector<double> g = adjoint_gradient(alpha, ds, lambda);
  DualPoint out;
  out.bias_mode = alpha.bias_mode;
  out.alpha.resize(n);
  if (!alpha.bias_mode) {
    for (std::size_t i = 0; i < n; ++i)
      out.alpha[i] = clamp(alpha.alpha[i] + g[i] / L, 0.0, cap);
    return out;
  }
  SeparableQpProblem p;
  p.d.assign(n, 1.0);
  p.m.resize(n);
  p.l.assign(n, 0.0);
  p.u.assign(n, cap);
  p.sigma.resize(n);
  p.z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p.m[i] = alpha.alpha[i] + g[i] / L;
    p.sigma[i] = ds.labels[i];
  }
  out.alpha = solve_separable_qp(p).alpha;
  return out;
}

struct PragamOptions {
  double lambda = 1.0;
  bool bias_mode = false;
  double eps = 1e-6;
  long max_iter = 100000;
  std::optional<double> lipschitz;  // explicit L; skips estimation
  LipschitzMethod method = LipschitzMethod::power;
  bool adaptive = true;             // double L when the descent test fails
  std::optional<std::uint64_t> init_seed;  // random alpha_{-1}; center if unset
  // called once per recorded iterate with the current weight vector
  std::function<void(const ConvergenceRecord &, const std::vector<double> &w)>
      on_iteration;
};

// Solver iterate. mu shrinks by the factor (1 - tau()) every step; sigma2 and
// prox_diameter are the strong-convexity modulus and the maximum of the prox
// function over the feasible box, the constants of the gap rate
// 4 L prox_diameter / ((k+1)(k+2) sigma2).
struct PragamState {
  long k = 0;
  DualPoint alpha;
  std::vector<double> w;
  double mu = 0.0;
  double lipschitz = 0.0;
  double sigma2 = 1.0;
  double prox_diameter = 0.0;  // 1/(2n)

  double tau() const { return 2.0 / static_cast<double>(k + 3); }
};

struct PragamResult {
  PrimalModel model;
  DualPoint alpha;
  std::vector<ConvergenceRecord> trace;
  bool converged = false;
  bool degenerate = false;  // bias mode with a single label class
  double initial_L = 0.0;
  double final_L = 0.0;
  double mu0 = 0.0;
  std::vector<double> mu_history;  // mu_k at the start of iteration k
};

namespace detail {

inline DualPoint initial_dual_point(const SparseDataset &ds,
                                    const PragamOptions &opt) {
  std::size_t n = ds.n;
  double cap = 1.0 / static_cast<double>(n);
  DualPoint a;
  a.bias_mode = opt.bias_mode;
  a.alpha.resize(n);
  if (opt.init_seed) {
    SplitMix64 rng(*opt.init_seed);
    for (double &x : a.alpha) x = rng.uniform(0.0, cap);
  } else {
    for (double &x : a.alpha) x = 0.5 * cap;
  }
  if (!opt.bias_mode) return a;
  double balance = 0.0;
  for (std::size_t i = 0; i < n; ++i) balance += ds.labels[i] * a.alpha[i];
  if (balance == 0.0) return a;
  SeparableQpProblem p;
  p.d.assign(n, 1.0);
  p.m = a.alpha;
  p.l.assign(n, 0.0);
  p.u.assign(n, cap);
  p.sigma.resize(n);
  p.z = 0.0;
  for (std::size_t i = 0; i < n; ++i) p.sigma[i] = ds.labels[i];
  a.alpha = solve_separable_qp(p).alpha;
  return a;
}

// Local descent inequality behind the 1/k^2 rate; failure means the current
// L underestimates the curvature.
inline bool descent_ok(const DualPoint &from, const DualPoint &to,
                       const std::vector<double> &grad_from, double d_from,
                       double d_to, double L) {
  double inner = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < from.alpha.size(); ++i) {
    double diff = to.alpha[i] - from.alpha[i];
    inner += grad_from[i] * diff;
    sq += diff * diff;
  }
  double required = d_from + inner - 0.5 * L * sq;
  double slack = 1e-12 * std::max({1.0, std::fabs(d_from), std::fabs(d_to)});
  return d_to >= required - slack;
}

}  // namespace detail

// The accelerated primal-adjoint loop. Maintains w_k and alpha_k whose duality
// gap decays at rate 4 L D2 / ((k+1)(k+2)) with D2 = 1/(2n); stops when the
// gap reaches opt.eps or at the iteration cap.
inline PragamResult pragam_run(const SparseDataset &ds,
                               const PragamOptions &opt) {
  if (opt.lambda <= 0.0) throw InvalidProblem("lambda must be positive");
  if (opt.eps <= 0.0) throw InvalidProblem("eps must be positive");
  if (ds.n == 0) throw InvalidProblem("empty dataset");

  const double lambda = opt.lambda;
  PragamResult res;
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  if (opt.bias_mode) {
    bool all_same = true;
    for (std::size_t i = 1; i < ds.n; ++i)
      if (ds.labels[i] != ds.labels[0]) {
        all_same = false;
        break;
      }
    if (all_same) {
      // Q2 degenerates to {0}; w = 0 with the optimal intercept is optimal.
      res.degenerate = true;
      res.converged = true;
      res.model.w.assign(ds.dim, 0.0);
      res.model.lambda = lambda;
      res.model.bias = optimal_bias(res.model.w, ds);
      res.alpha.bias_mode = true;
      res.alpha.alpha.assign(ds.n, 0.0);
      ConvergenceRecord r;
      r.iter = 0;
      r.wall_seconds = elapsed();
      r.J = primal_objective(res.model, ds);
      r.D = 0.0;
      r.gap = *r.J;
      res.trace.push_back(r);
      if (opt.on_iteration) opt.on_iteration(r, res.model.w);
      return res;
    }
  }

  PragamState st;
  st.lipschitz = opt.lipschitz ? *opt.lipschitz
                               : estimate_lipschitz(ds, lambda, opt.method);
  if (st.lipschitz <= 0.0) st.lipschitz = 1e-12;
  st.prox_diameter = 1.0 / (2.0 * static_cast<double>(ds.n));
  res.initial_L = st.lipschitz;

  auto v_step = [&](const DualPoint &beta) {
    DualPoint next = map_v(beta, st.lipschitz, ds, lambda);
    if (opt.adaptive) {
      std::vector<double> g = adjoint_gradient(beta, ds, lambda);
      double d_beta = adjoint_objective(beta, ds, lambda);
      for (int doublings = 0; doublings < 200; ++doublings) {
        double d_next = adjoint_objective(next, ds, lambda);
        if (detail::descent_ok(beta, next, g, d_beta, d_next, st.lipschitz))
          break;
        st.lipschitz *= 2.0;
        next = map_v(beta, st.lipschitz, ds, lambda);
      }
    }
    return next;
  };

  DualPoint alpha_init = detail::initial_dual_point(ds, opt);
  st.mu = 2.0 * st.lipschitz;
  res.mu0 = st.mu;
  st.alpha = v_step(alpha_init);
  st.w = w_from_alpha(alpha_init, ds, lambda);

  PrimalModel model;
  model.lambda = lambda;
  if (opt.bias_mode) model.bias = 0.0;  // re-minimized inside primal_objective

  for (;; ++st.k) {
    res.mu_history.push_back(st.mu);
    model.w = st.w;
    double J = primal_objective(model, ds);
    double D = adjoint_objective(st.alpha, ds, lambda);
    double gap = J - D;
    if (!std::isfinite(J) || !std::isfinite(D))
      throw NumericalError("non-finite objective; Lipschitz estimate diverged");

    ConvergenceRecord r;
    r.iter = st.k;
    r.wall_seconds = elapsed();
    r.J = J;
    r.D = D;
    r.gap = gap;
    res.trace.push_back(r);
    if (opt.on_iteration) opt.on_iteration(r, st.w);

    if (gap <= opt.eps) {
      res.converged = true;
      break;
    }
    if (st.k >= opt.max_iter) break;

    double tau = st.tau();
    DualPoint alpha_mu = map_alpha_mu(st.w, st.mu, ds, opt.bias_mode);
    DualPoint beta;
    beta.bias_mode = opt.bias_mode;
    beta.alpha.resize(ds.n);
    for (std::size_t i = 0; i < ds.n; ++i)
      beta.alpha[i] = (1.0 - tau) * st.alpha.alpha[i] + tau * alpha_mu.alpha[i];

    std::vector<double> w_beta = w_from_alpha(beta, ds, lambda);
    for (std::size_t j = 0; j < st.w.size(); ++j)
      st.w[j] = (1.0 - tau) * st.w[j] + tau * w_beta[j];
    st.alpha = v_step(beta);
    st.mu *= (1.0 - tau);
  }

  res.final_L = st.lipschitz;
  res.model = model;
  if (opt.bias_mode) res.model.bias = optimal_bias(model.w, ds);
  res.alpha = st.alpha;
  return res;
}

}  // namespace riskmin

#endif  // RISKMIN_PRAGAM_HPP
