#ifndef RISKMIN_STRUCTPROJ_HPP
#define RISKMIN_STRUCTPROJ_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

#include "riskmin/common.hpp"

namespace riskmin {

// Weighted Euclidean projection of per-clique targets onto the locally
// consistent marginal polytope: per-clique normalization, nonnegativity, and
// agreement on clique intersections.
struct CliqueProjectionProblem {
  // targets[c][y] over the configurations y of clique c
  std::vector<std::vector<double>> targets;
  std::vector<double> weights;  // d_c > 0

  // Intersection of cliques c1 and c2; map1[y] (resp. map2[y]) sends a
  // configuration of c1 (resp. c2) to the induced configuration of the
  // shared variables.
  struct Intersection {
    std::size_t c1 = 0, c2 = 0;
    std::size_t shared_count = 0;
    std::vector<std::size_t> map1, map2;
  };
  std::vector<Intersection> intersections;

  std::size_t clique_count() const { return targets.size(); }
};

// Multipliers of the projection dual: lambda_c for normalization, xi_c >= 0
// for nonnegativity, mu per intersection for consistency (antisymmetric
// orientation: + on c1, - on c2).
struct StructDualState {
  std::vector<double> lambda_c;
  std::vector<std::vector<double>> xi;
  std::vector<std::vector<double>> mu;
};

struct StructProjectionOptions {
  double tol = 1e-8;
  long max_sweeps = 2000;
  double cg_tol = 1e-10;       // gradient norm target of the inner solve
  std::size_t dense_limit = 200;  // direct solve when multipliers <= this
};

struct StructProjectionResult {
  std::vector<std::vector<double>> marginals;
  StructDualState state;
  long sweeps = 0;
  double normalization_residual = 0.0;
  double consistency_residual = 0.0;
  double min_marginal = 0.0;
  std::vector<double> dual_values;  // one per sweep, nonincreasing
};

namespace detail {

inline void validate_clique_problem(const CliqueProjectionProblem &p) {
  std::size_t nc = p.clique_count();
  if (nc == 0) throw InvalidProblem("no cliques");
  if (p.weights.size() != nc) throw InvalidProblem("weights size mismatch");
  for (std::size_t c = 0; c < nc; ++c) {
    if (p.targets[c].empty()) throw InvalidProblem("empty clique");
    if (!(p.weights[c] > 0.0)) throw InvalidProblem("clique weight <= 0");
  }
  for (const auto &in : p.intersections) {
    if (in.c1 >= nc || in.c2 >= nc || in.c1 == in.c2)
      throw InvalidProblem("bad intersection cliques");
    if (in.map1.size() != p.targets[in.c1].size() ||
        in.map2.size() != p.targets[in.c2].size())
      throw InvalidProblem("intersection map size mismatch");
    for (std::size_t v : in.map1)
      if (v >= in.shared_count) throw InvalidProblem("map1 out of range");
    for (std::size_t v : in.map2)
      if (v >= in.shared_count) throw InvalidProblem("map2 out of range");
  }
}

// lambda_c + sum of oriented mu terms, excluding xi
inline std::vector<std::vector<double>> base_terms(
    const CliqueProjectionProblem &p, const std::vector<double> &lambda_c,
    const std::vector<std::vector<double>> &mu) {
  std::vector<std::vector<double>> base(p.clique_count());
  for (std::size_t c = 0; c < p.clique_count(); ++c)
    base[c].assign(p.targets[c].size(), lambda_c[c]);
  for (std::size_t k = 0; k < p.intersections.size(); ++k) {
    const auto &in = p.intersections[k];
    for (std::size_t y = 0; y < in.map1.size(); ++y)
      base[in.c1][y] += mu[k][in.map1[y]];
    for (std::size_t y = 0; y < in.map2.size(); ++y)
      base[in.c2][y] -= mu[k][in.map2[y]];
  }
  return base;
}

// Flat multiplier vector layout: [lambda_c ...][mu_0 ...][mu_1 ...] ...
struct MultiplierLayout {
  std::size_t n_cliques = 0;
  std::vector<std::size_t> mu_offset;
  std::size_t total = 0;
};

inline MultiplierLayout make_layout(const CliqueProjectionProblem &p) {
  MultiplierLayout lay;
  lay.n_cliques = p.clique_count();
  std::size_t off = lay.n_cliques;
  for (const auto &in : p.intersections) {
    lay.mu_offset.push_back(off);
    off += in.shared_count;
  }
  lay.total = off;
  return lay;
}

// gradient of the dual in (lambda, mu) with xi held fixed
inline std::vector<double> inner_gradient(const CliqueProjectionProblem &p,
                                          const MultiplierLayout &lay,
                                          const std::vector<double> &v,
                                          const std::vector<std::vector<double>> &xi) {
  std::vector<double> lambda_c(v.begin(), v.begin() + lay.n_cliques);
  std::vector<std::vector<double>> mu(p.intersections.size());
  for (std::size_t k = 0; k < p.intersections.size(); ++k)
    mu[k].assign(v.begin() + lay.mu_offset[k],
                 v.begin() + lay.mu_offset[k] + p.intersections[k].shared_count);
  auto base = base_terms(p, lambda_c, mu);

  std::vector<double> g(lay.total, 0.0);
  std::vector<std::vector<double>> marg(p.clique_count());
  for (std::size_t c = 0; c < p.clique_count(); ++c) {
    double inv_d2 = 1.0 / (p.weights[c] * p.weights[c]);
    double s = 0.0;
    marg[c].resize(p.targets[c].size());
    for (std::size_t y = 0; y < p.targets[c].size(); ++y) {
      double a = p.targets[c][y] + inv_d2 * (base[c][y] + xi[c][y]);
      marg[c][y] = a;
      s += a;
    }
    g[c] = s - 1.0;
  }
  for (std::size_t k = 0; k < p.intersections.size(); ++k) {
    const auto &in = p.intersections[k];
    for (std::size_t y = 0; y < in.map1.size(); ++y)
      g[lay.mu_offset[k] + in.map1[y]] += marg[in.c1][y];
    for (std::size_t y = 0; y < in.map2.size(); ++y)
      g[lay.mu_offset[k] + in.map2[y]] -= marg[in.c2][y];
  }
  return g;
}

// Hessian-vector product of the inner quadratic (independent of targets/xi)
inline std::vector<double> inner_hessian_apply(const CliqueProjectionProblem &p,
                                               const MultiplierLayout &lay,
                                               const std::vector<double> &v) {
  std::vector<double> lambda_c(v.begin(), v.begin() + lay.n_cliques);
  std::vector<std::vector<double>> mu(p.intersections.size());
  for (std::size_t k = 0; k < p.intersections.size(); ++k)
    mu[k].assign(v.begin() + lay.mu_offset[k],
                 v.begin() + lay.mu_offset[k] + p.intersections[k].shared_count);
  auto base = base_terms(p, lambda_c, mu);

  std::vector<double> out(lay.total, 0.0);
  for (std::size_t c = 0; c < p.clique_count(); ++c) {
    double inv_d2 = 1.0 / (p.weights[c] * p.weights[c]);
    double s = 0.0;
    for (double t : base[c]) s += t;
    out[c] = inv_d2 * s;
    for (double &t : base[c]) t *= inv_d2;
  }
  for (std::size_t k = 0; k < p.intersections.size(); ++k) {
    const auto &in = p.intersections[k];
    for (std::size_t y = 0; y < in.map1.size(); ++y)
      out[lay.mu_offset[k] + in.map1[y]] += base[in.c1][y];
    for (std::size_t y = 0; y < in.map2.size(); ++y)
      out[lay.mu_offset[k] + in.map2[y]] -= base[in.c2][y];
  }
  return out;
}

// Conjugate gradient on the (possibly singular, consistent) normal system.
inline void inner_cg(const CliqueProjectionProblem &p, const MultiplierLayout &lay,
                     std::vector<double> &v, const std::vector<std::vector<double>> &xi,
                     double grad_tol) {
  long cap = static_cast<long>(lay.total) * 60 + 200;
  for (int restart = 0; restart < 3; ++restart) {
    std::vector<double> g = inner_gradient(p, lay, v, xi);
    std::vector<double> r(lay.total);
    for (std::size_t i = 0; i < lay.total; ++i) r[i] = -g[i];
    double rr = squared_norm(r);
    if (std::sqrt(rr) <= grad_tol) return;
    std::vector<double> dir = r;
    for (long it = 0; it < cap; ++it) {
      std::vector<double> qd = inner_hessian_apply(p, lay, dir);
      double dqd = dot(dir, qd);
      if (dqd <= 1e-14 * squared_norm(dir)) break;  // near-null direction
      double step = rr / dqd;
      axpy(step, dir, v);
      axpy(-step, qd, r);
      double rr_new = squared_norm(r);
      if (std::sqrt(rr_new) <= 0.5 * grad_tol) break;
      double beta = rr_new / rr;
      rr = rr_new;
      for (std::size_t i = 0; i < lay.total; ++i) dir[i] = r[i] + beta * dir[i];
    }
  }
}

// Direct dense solve of the inner quadratic followed by a CG polish.
inline void inner_dense(const CliqueProjectionProblem &p, const MultiplierLayout &lay,
                        std::vector<double> &v, const std::vector<std::vector<double>> &xi,
                        double grad_tol) {
  std::size_t n = lay.total;
  std::vector<std::vector<double>> q(n, std::vector<double>(n, 0.0));
  std::vector<double> e(n, 0.0);
  double max_diag = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    e[j] = 1.0;
    std::vector<double> col = inner_hessian_apply(p, lay, e);
    e[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) q[i][j] = col[i];
    max_diag = std::max(max_diag, std::fabs(col[j]));
  }
  double ridge = 1e-12 * std::max(1.0, max_diag);
  for (std::size_t i = 0; i < n; ++i) q[i][i] += ridge;

  std::vector<double> rhs = inner_gradient(p, lay, std::vector<double>(n, 0.0), xi);
  for (double &x : rhs) x = -x;

  // Cholesky q = L L^T
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = q[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= q[i][k] * q[j][k];
      if (i == j) {
        q[i][i] = std::sqrt(std::max(s, ridge));
      } else {
        q[i][j] = s / q[j][j];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (std::size_t k = 0; k < i; ++k) s -= q[i][k] * rhs[k];
    rhs[i] = s / q[i][i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = rhs[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= q[k][ii] * rhs[k];
    rhs[ii] = s / q[ii][ii];
  }
  v = rhs;
  inner_cg(p, lay, v, xi, grad_tol);
}

}  // namespace detail

// Exact dual value at the given multipliers.
inline double struct_dual_objective(const StructDualState &state,
                                    const CliqueProjectionProblem &p) {
  auto base = detail::base_terms(p, state.lambda_c, state.mu);
  double val = 0.0;
  for (std::size_t c = 0; c < p.clique_count(); ++c) {
    double inv_d2 = 1.0 / (p.weights[c] * p.weights[c]);
    for (std::size_t y = 0; y < p.targets[c].size(); ++y) {
      double t = base[c][y] + state.xi[c][y];
      val += 0.5 * inv_d2 * t * t + p.targets[c][y] * t;
    }
    val -= state.lambda_c[c];
  }
  return val;
}

// Recovered primal point for a dual state.
inline std::vector<std::vector<double>> recover_marginals(
    const StructDualState &state, const CliqueProjectionProblem &p) {
  auto base = detail::base_terms(p, state.lambda_c, state.mu);
  std::vector<std::vector<double>> alpha(p.clique_count());
  for (std::size_t c = 0; c < p.clique_count(); ++c) {
    double inv_d2 = 1.0 / (p.weights[c] * p.weights[c]);
    alpha[c].resize(p.targets[c].size());
    for (std::size_t y = 0; y < p.targets[c].size(); ++y)
      alpha[c][y] = p.targets[c][y] + inv_d2 * (base[c][y] + state.xi[c][y]);
  }
  return alpha;
}

// Block coordinate descent on the projection dual: exact minimization over
// (lambda, mu) with xi fixed, then the closed-form hinge update of xi.
inline StructProjectionResult project_marginals(
    const CliqueProjectionProblem &p, const StructProjectionOptions &opt = {}) {
  detail::validate_clique_problem(p);
  detail::MultiplierLayout lay = detail::make_layout(p);

  StructDualState state;
  state.lambda_c.assign(p.clique_count(), 0.0);
  state.xi.resize(p.clique_count());
  for (std::size_t c = 0; c < p.clique_count(); ++c)
    state.xi[c].assign(p.targets[c].size(), 0.0);
  state.mu.resize(p.intersections.size());
  for (std::size_t k = 0; k < p.intersections.size(); ++k)
    state.mu[k].assign(p.intersections[k].shared_count, 0.0);

  StructProjectionResult res;
  std::vector<double> v(lay.total, 0.0);
  double dual_prev = 0.0;
  bool have_prev = false;

  for (long sweep = 1; sweep <= opt.max_sweeps; ++sweep) {
    if (lay.total <= opt.dense_limit)
      detail::inner_dense(p, lay, v, state.xi, opt.cg_tol);
    else
      detail::inner_cg(p, lay, v, state.xi, opt.cg_tol);
    for (std::size_t c = 0; c < p.clique_count(); ++c) state.lambda_c[c] = v[c];
    for (std::size_t k = 0; k < p.intersections.size(); ++k)
      for (std::size_t s = 0; s < p.intersections[k].shared_count; ++s)
        state.mu[k][s] = v[lay.mu_offset[k] + s];

    res.marginals = recover_marginals(state, p);
    res.sweeps = sweep;

    double norm_res = 0.0, cons_res = 0.0, min_marg = 1e300;
    for (std::size_t c = 0; c < p.clique_count(); ++c) {
      double s = 0.0;
      for (double a : res.marginals[c]) {
        s += a;
        min_marg = std::min(min_marg, a);
      }
      norm_res = std::max(norm_res, std::fabs(s - 1.0));
    }
    for (const auto &in : p.intersections) {
      std::vector<double> s1(in.shared_count, 0.0), s2(in.shared_count, 0.0);
      for (std::size_t y = 0; y < in.map1.size(); ++y)
        s1[in.map1[y]] += res.marginals[in.c1][y];
      for (std::size_t y = 0; y < in.map2.size(); ++y)
        s2[in.map2[y]] += res.marginals[in.c2][y];
      for (std::size_t s = 0; s < in.shared_count; ++s)
        cons_res = std::max(cons_res, std::fabs(s1[s] - s2[s]));
    }
    res.normalization_residual = norm_res;
    res.consistency_residual = cons_res;
    res.min_marginal = min_marg;

    // hinge update of xi; exact block minimizer given (lambda, mu)
    auto base = detail::base_terms(p, state.lambda_c, state.mu);
    for (std::size_t c = 0; c < p.clique_count(); ++c) {
      double d2 = p.weights[c] * p.weights[c];
      for (std::size_t y = 0; y < p.targets[c].size(); ++y)
        state.xi[c][y] = positive_part(-d2 * p.targets[c][y] - base[c][y]);
    }

    double dual = struct_dual_objective(state, p);
    res.dual_values.push_back(dual);

    double feas = std::max({norm_res, cons_res, positive_part(-min_marg)});
    double decrease = have_prev ? dual_prev - dual : 1e300;
    dual_prev = dual;
    have_prev = true;
    if (feas <= opt.tol && std::fabs(decrease) <= opt.tol) {
      res.state = state;
      return res;
    }
  }
  throw NoConvergence(
      "project_marginals: sweep cap reached",
      std::max({res.normalization_residual, res.consistency_residual,
                positive_part(-res.min_marginal)}));
}

// Clamp-and-renormalize presentation of marginals (not part of the solve).
inline std::vector<std::vector<double>> clamped_marginals(
    const std::vector<std::vector<double>> &marginals) {
  std::vector<std::vector<double>> out = marginals;
  for (auto &clique : out) {
    double s = 0.0;
    for (double &v : clique) {
      v = positive_part(v);
      s += v;
    }
    if (s > 0.0)
      for (double &v : clique) v /= s;
  }
  return out;
}

// Chain of length L over an m-letter alphabet; cliques are the L-1 edges with
// m^2 configurations indexed (i, j) -> i * m + j.
struct SequenceProjectionProblem {
  std::size_t length = 0;  // L >= 2
  std::size_t labels = 0;  // m >= 1
  std::vector<double> weights;               // d_t, size L-1
  std::vector<std::vector<double>> targets;  // each of size m*m

  CliqueProjectionProblem to_clique_problem() const {
    if (length < 2) throw InvalidProblem("sequence length must be >= 2");
    if (labels < 1) throw InvalidProblem("alphabet must be nonempty");
    std::size_t edges = length - 1;
    if (weights.size() != edges || targets.size() != edges)
      throw InvalidProblem("sequence field length mismatch");
    CliqueProjectionProblem p;
    p.targets = targets;
    p.weights = weights;
    for (auto &t : p.targets)
      if (t.size() != labels * labels)
        throw InvalidProblem("edge target size must be m^2");
    for (std::size_t t = 0; t + 1 < edges; ++t) {
      CliqueProjectionProblem::Intersection in;
      in.c1 = t;
      in.c2 = t + 1;
      in.shared_count = labels;
      in.map1.resize(labels * labels);
      in.map2.resize(labels * labels);
      for (std::size_t i = 0; i < labels; ++i)
        for (std::size_t j = 0; j < labels; ++j) {
          in.map1[i * labels + j] = j;  // shared node is the edge's second end
          in.map2[i * labels + j] = i;  // and the next edge's first end
        }
      p.intersections.push_back(std::move(in));
    }
    return p;
  }
};

inline StructProjectionResult project_sequence(
    const SequenceProjectionProblem &p, const StructProjectionOptions &opt = {}) {
  return project_marginals(p.to_clique_problem(), opt);
}

}  // namespace riskmin

#endif  // RISKMIN_STRUCTPROJ_HPP
