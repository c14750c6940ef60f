#ifndef RISKMIN_LOWERBOUND_HPP
#define RISKMIN_LOWERBOUND_HPP

#include <algorithm>
#include <cstddef>
#include <vector>

#include "riskmin/bundle.hpp"
#include "riskmin/common.hpp"

namespace riskmin {

// H_1 = (+1), H_2d = ((H_d, H_d), (H_d, -H_d)); entries stay integral so
// orthogonality is exact. H^T H = d I.
inline std::vector<std::vector<int>> hadamard(std::size_t d) {
  if (d == 0 || (d & (d - 1)) != 0)
    throw InvalidProblem("hadamard: dimension must be a power of two");
  std::vector<std::vector<int>> h = {{1}};
  for (std::size_t size = 1; size < d; size *= 2) {
    std::vector<std::vector<int>> next(2 * size, std::vector<int>(2 * size));
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) {
        int v = h[i][j];
        next[i][j] = v;
        next[i][j + size] = v;
        next[i + size][j] = v;
        next[i + size][j + size] = -v;
      }
    h = std::move(next);
  }
  return h;
}

// The adversarial instance: columns a_i of (1/sqrt(d)) ((H, -H), (-H, H)),
// objective J(w) = max_i <a_i, w> + (lambda/2) ||w||^2. Columns are unit norm;
// columns within one half-block are mutually orthogonal while column i and
// column i + d/2 are antipodal.
struct HadamardInstance {
  std::size_t dim = 0;
  double lambda = 1.0;
  std::vector<std::vector<double>> columns;  // d columns, each length d

  double risk(const std::vector<double> &w) const {
    double best = -1e300;
    for (const auto &col : columns) best = std::max(best, dot(col, w));
    return best;
  }

  double objective(const std::vector<double> &w) const {
    return risk(w) + 0.5 * lambda * squared_norm(w);
  }

  // subgradient of the max term: the best column, lowest index on ties
  std::size_t argmax_column(const std::vector<double> &w) const {
    std::size_t best = 0;
    double best_val = dot(columns[0], w);
    for (std::size_t i = 1; i < columns.size(); ++i) {
      double v = dot(columns[i], w);
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    return best;
  }
};

inline HadamardInstance build_instance(std::size_t d, double lambda) {
  if (d < 4 || (d & (d - 1)) != 0)
    throw InvalidProblem("build_instance: d must be a power of two >= 4");
  if (lambda <= 0.0) throw InvalidProblem("build_instance: lambda <= 0");
  std::size_t half = d / 2;
  auto h = hadamard(half);
  HadamardInstance inst;
  inst.dim = d;
  inst.lambda = lambda;
  inst.columns.assign(d, std::vector<double>(d));
  double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t j = 0; j < half; ++j) {
    for (std::size_t i = 0; i < half; ++i) {
      double v = h[i][j] * inv_sqrt_d;
      inst.columns[j][i] = v;
      inst.columns[j][i + half] = -v;
      inst.columns[j + half][i] = -v;
      inst.columns[j + half][i + half] = v;
    }
  }
  return inst;
}

enum class AdversaryMode { prescribed, faithful };

struct AdversaryRow {
  long t = 0;
  double jt_wt = 0.0;     // model value J_t(w_t)
  double j_wt = 0.0;      // true objective at w_t
  double eps_t = 0.0;     // min_{t' <= t} J(w_{t'}) - J_t(w_t), including w_0
  double delta_t = 0.0;   // min_{1 <= t' <= t} J(w_{t'}) - J(w*), J(w*) = 0
  std::vector<double> w;  // the iterate
};

// Drives the bundle machinery on the Hadamard instance. Prescribed mode
// injects (a_t, 0) with a_t the t-th column of the first half-block; those
// planes are mutually orthonormal global lower bounds, so the model value is
// exactly -1/(2 lambda t). Faithful mode feeds the actual subgradient of the
// max term at the current iterate and only records what happens.
inline std::vector<AdversaryRow> run_adversary(const HadamardInstance &inst,
                                               long t_max, AdversaryMode mode) {
  if (t_max < 1 || static_cast<std::size_t>(t_max) >= inst.dim / 2)
    throw InvalidProblem("run_adversary: require 1 <= t_max < d/2");

  CuttingPlaneModel model = make_model(inst.dim, inst.lambda);
  std::vector<double> w(inst.dim, 0.0);
  double min_j_all = inst.objective(w);  // J(0) = 0
  double min_j_iterates = 1e300;
  std::vector<AdversaryRow> rows;
  rows.reserve(static_cast<std::size_t>(t_max));

  for (long t = 1; t <= t_max; ++t) {
    CuttingPlane plane;
    if (mode == AdversaryMode::prescribed) {
      plane.a = inst.columns[static_cast<std::size_t>(t - 1)];
      plane.b = 0.0;
    } else {
      std::size_t pick = inst.argmax_column(w);
      plane.a = inst.columns[pick];
      plane.b = inst.risk(w) - dot(w, plane.a);
    }
    add_cut(model, plane);
    solve_model_qp(model, 1e-12);
    w = model.w;

    AdversaryRow row;
    row.t = t;
    row.jt_wt = model.primal_value;
    row.j_wt = inst.objective(w);
    min_j_all = std::min(min_j_all, row.j_wt);
    min_j_iterates = std::min(min_j_iterates, row.j_wt);
    row.eps_t = min_j_all - row.jt_wt;
    row.delta_t = min_j_iterates;  // J(w*) = J(0) = 0
    row.w = w;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace riskmin

#endif  // RISKMIN_LOWERBOUND_HPP
