#ifndef RISKMIN_COMMON_HPP
#define RISKMIN_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskmin {

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string &msg) : std::runtime_error(msg) {}
};

// Input data or problem description violates a precondition.
class InvalidProblem : public SolverError {
 public:
  explicit InvalidProblem(const std::string &msg) : SolverError(msg) {}
};

// The constraint set is empty.
class Infeasible : public SolverError {
 public:
  explicit Infeasible(const std::string &msg) : SolverError(msg) {}
};

class ParseError : public SolverError {
 public:
  ParseError(const std::string &msg, std::size_t line)
      : SolverError("line " + std::to_string(line) + ": " + msg),
        line_number(line) {}
  std::size_t line_number;
};

// An iterative solve hit its iteration cap before reaching tolerance.
class NoConvergence : public SolverError {
 public:
  NoConvergence(const std::string &msg, double res)
      : SolverError(msg + " (residual " + std::to_string(res) + ")"),
        residual(res) {}
  double residual;
};

class NumericalError : public SolverError {
 public:
  explicit NumericalError(const std::string &msg) : SolverError(msg) {}
};

inline double dot(const std::vector<double> &a, const std::vector<double> &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(const std::vector<double> &a) { return dot(a, a); }

inline double norm(const std::vector<double> &a) {
  return std::sqrt(squared_norm(a));
}

inline void axpy(double c, const std::vector<double> &x,
                 std::vector<double> &y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline void scale(double c, std::vector<double> &x) {
  for (double &v : x) v *= c;
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

inline double positive_part(double v) { return v > 0.0 ? v : 0.0; }

// splitmix64; used wherever the library needs reproducible pseudo-randomness.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::uint64_t state_;
};

}  // namespace riskmin

#endif  // RISKMIN_COMMON_HPP
