#ifndef RISKMIN_TRACE_HPP
#define RISKMIN_TRACE_HPP

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace riskmin {

// One solver iteration as reported to trace files. Fields that a solver does
// not produce stay empty (the CSV writer emits them as blank columns).
struct ConvergenceRecord {
  long iter = 0;
  double wall_seconds = 0.0;
  std::optional<double> J;
  std::optional<double> D;
  std::optional<double> gap;
  std::optional<double> eps_t;
  std::optional<double> err_t;
  std::optional<double> test_acc;
};

inline const char *trace_csv_header() {
  return "iter,wall_seconds,J,D,gap,eps_t,err_t,test_acc";
}

inline std::string trace_csv_row(const ConvergenceRecord &r) {
  char buf[64];
  std::string out = std::to_string(r.iter);
  std::snprintf(buf, sizeof(buf), ",%.6f", r.wall_seconds);
  out += buf;
  auto field = [&](const std::optional<double> &v) {
    out += ',';
    if (v) {
      std::snprintf(buf, sizeof(buf), "%.17g", *v);
      out += buf;
    }
  };
  field(r.J);
  field(r.D);
  field(r.gap);
  field(r.eps_t);
  field(r.err_t);
  field(r.test_acc);
  return out;
}

}  // namespace riskmin

#endif  // RISKMIN_TRACE_HPP
