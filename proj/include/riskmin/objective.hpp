#ifndef RISKMIN_OBJECTIVE_HPP
#define RISKMIN_OBJECTIVE_HPP

#include <algorithm>
#include <optional>
#include <vector>

#include "riskmin/common.hpp"
#include "riskmin/dataio.hpp"

namespace riskmin {

// Primal iterate for J(w) = lambda/2 ||w||^2 + risk. The regularizer is fixed
// to the squared Euclidean norm throughout. `bias` is engaged iff the problem
// is solved in bias mode, where the risk minimizes over the intercept.
struct PrimalModel {
  std::vector<double> w;
  std::optional<double> bias;
  double lambda = 1.0;
};

// Adjoint iterate: alpha in [0, 1/n]^n, additionally sum_i y_i alpha_i = 0
// when bias_mode is set.
struct DualPoint {
  std::vector<double> alpha;
  bool bias_mode = false;
};

// Affine global lower bound <a, w> + b on the empirical risk.
struct CuttingPlane {
  std::vector<double> a;
  double b = 0.0;
};

// (1/n) sum_i [1 - y_i (<w, x_i> + b)]_+ with b = 0 when absent.
inline double empirical_risk(const PrimalModel &model, const SparseDataset &ds) {
  if (model.w.size() != ds.dim) throw InvalidProblem("dimension mismatch");
  double b = model.bias.value_or(0.0);
  double s = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i)
    s += positive_part(1.0 - ds.labels[i] * (dot_row(ds, i, model.w) + b));
  return s / static_cast<double>(ds.n);
}

// Exact minimizer of the piecewise-linear bias objective given fixed
// per-example scores s_i = <w, x_i>. The risk has breakpoints where single
// hinge terms vanish and every breakpoint raises the slope by 1/n, so the
// minimizing segment is delimited by order statistics of the breakpoints.
// Ties resolve to the segment midpoint; a half-infinite minimizing segment
// resolves to its finite endpoint.
inline double optimal_bias(const std::vector<double> &score,
                           const std::vector<int> &labels) {
  std::size_t n = labels.size();
  std::vector<double> bp(n);
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 0) {
      bp[i] = 1.0 - score[i];
      ++n_pos;
    } else {
      bp[i] = -(1.0 + score[i]);
    }
  }
  std::sort(bp.begin(), bp.end());
  if (n_pos == 0) return bp.front();
  if (n_pos == n) return bp.back();
  return 0.5 * (bp[n_pos - 1] + bp[n_pos]);
}

inline double optimal_bias(const std::vector<double> &w,
                           const SparseDataset &ds) {
  if (ds.n == 0) throw InvalidProblem("empty dataset");
  return optimal_bias(scores(ds, w), ds.labels);
}

// J(w). In bias mode the intercept is re-minimized, so the value depends on
// the weights only.
inline double primal_objective(const PrimalModel &model,
                               const SparseDataset &ds) {
  if (model.w.size() != ds.dim) throw InvalidProblem("dimension mismatch");
  PrimalModel eval = model;
  if (model.bias) eval.bias = optimal_bias(model.w, ds);
  return 0.5 * model.lambda * squared_norm(model.w) + empirical_risk(eval, ds);
}

// u = X Y alpha = sum_i alpha_i y_i x_i
inline std::vector<double> weighted_feature_sum(const std::vector<double> &alpha,
                                                const SparseDataset &ds) {
  if (alpha.size() != ds.n) throw InvalidProblem("dimension mismatch");
  std::vector<double> u(ds.dim, 0.0);
  for (std::size_t i = 0; i < ds.n; ++i)
    add_scaled_row(ds, i, alpha[i] * ds.labels[i], u);
  return u;
}

// D(alpha) = sum_i alpha_i - (1 / 2 lambda) ||X Y alpha||^2
inline double adjoint_objective(const DualPoint &alpha, const SparseDataset &ds,
                                double lambda) {
  std::vector<double> u = weighted_feature_sum(alpha.alpha, ds);
  double s = std::accumulate(alpha.alpha.begin(), alpha.alpha.end(), 0.0);
  return s - squared_norm(u) / (2.0 * lambda);
}

// grad D(alpha) = e - (1 / lambda) Y X^T X Y alpha
inline std::vector<double> adjoint_gradient(const DualPoint &alpha,
                                            const SparseDataset &ds,
                                            double lambda) {
  std::vector<double> u = weighted_feature_sum(alpha.alpha, ds);
  std::vector<double> g(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i)
    g[i] = 1.0 - ds.labels[i] * dot_row(ds, i, u) / lambda;
  return g;
}

// w(alpha) = (1 / lambda) X Y alpha
inline std::vector<double> w_from_alpha(const DualPoint &alpha,
                                        const SparseDataset &ds,
                                        double lambda) {
  std::vector<double> u = weighted_feature_sum(alpha.alpha, ds);
  scale(1.0 / lambda, u);
  return u;
}

// Hinge subgradient plane at w (no intercept): a = -(1/n) sum over examples
// with margin strictly below one of y_i x_i; examples at margin exactly one
// contribute nothing.
inline CuttingPlane hinge_cut(const std::vector<double> &w,
                              const SparseDataset &ds) {
  if (w.size() != ds.dim) throw InvalidProblem("dimension mismatch");
  CuttingPlane plane;
  plane.a.assign(ds.dim, 0.0);
  double risk = 0.0;
  double inv_n = 1.0 / static_cast<double>(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) {
    double margin = ds.labels[i] * dot_row(ds, i, w);
    if (margin < 1.0) {
      risk += (1.0 - margin) * inv_n;
      add_scaled_row(ds, i, -inv_n * ds.labels[i], plane.a);
    }
  }
  plane.b = risk - dot(w, plane.a);
  return plane;
}

// J(w) - D(alpha); requires matching modes.
inline double duality_gap(const PrimalModel &model, const DualPoint &alpha,
                          const SparseDataset &ds) {
  if (model.bias.has_value() != alpha.bias_mode)
    throw InvalidProblem("primal/adjoint mode mismatch");
  return primal_objective(model, ds) -
         adjoint_objective(alpha, ds, model.lambda);
}

// Membership check for Q2 (box, plus the label hyperplane in bias mode).
inline bool in_dual_feasible_set(const DualPoint &alpha, const SparseDataset &ds,
                                 double tol = 1e-10) {
  double cap = 1.0 / static_cast<double>(ds.n);
  double balance = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (alpha.alpha[i] < -tol || alpha.alpha[i] > cap + tol) return false;
    balance += ds.labels[i] * alpha.alpha[i];
  }
  return !alpha.bias_mode || std::fabs(balance) <= tol;
}

}  // namespace riskmin

#endif  // RISKMIN_OBJECTIVE_HPP
