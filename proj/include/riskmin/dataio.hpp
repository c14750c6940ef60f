#ifndef RISKMIN_DATAIO_HPP
#define RISKMIN_DATAIO_HPP

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "riskmin/common.hpp"

namespace riskmin {

struct Feature {
  int index;     // 1-based
  double value;

  bool operator==(const Feature &o) const {
    return index == o.index && value == o.value;
  }
};

// Row-sparse design matrix with +/-1 labels. Immutable after construction;
// safe to share across threads.
struct SparseDataset {
  std::size_t n = 0;    // examples
  std::size_t dim = 0;  // features (1-based indices go up to dim)
  std::vector<std::vector<Feature>> rows;
  std::vector<int> labels;  // each exactly +1 or -1
  double r_max = 0.0;       // max_i ||x_i||

  bool operator==(const SparseDataset &o) const {
    return n == o.n && dim == o.dim && rows == o.rows && labels == o.labels;
  }
};

inline double row_squared_norm(const SparseDataset &ds, std::size_t i) {
  double s = 0.0;
  for (const Feature &f : ds.rows[i]) s += f.value * f.value;
  return s;
}

inline double max_row_norm(const SparseDataset &ds) {
  double best = 0.0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    double s = row_squared_norm(ds, i);
    if (s > best) best = s;
  }
  return std::sqrt(best);
}

// <w, x_i>
inline double dot_row(const SparseDataset &ds, std::size_t i,
                      const std::vector<double> &w) {
  double s = 0.0;
  for (const Feature &f : ds.rows[i]) s += w[f.index - 1] * f.value;
  return s;
}

// w += c * x_i
inline void add_scaled_row(const SparseDataset &ds, std::size_t i, double c,
                           std::vector<double> &w) {
  for (const Feature &f : ds.rows[i]) w[f.index - 1] += c * f.value;
}

// per-example scores <w, x_i>
inline std::vector<double> scores(const SparseDataset &ds,
                                  const std::vector<double> &w) {
  std::vector<double> s(ds.n);
  for (std::size_t i = 0; i < ds.n; ++i) s[i] = dot_row(ds, i, w);
  return s;
}

namespace detail {

inline double parse_number(std::string_view tok, std::size_t line,
                           const char *what) {
  std::string_view body = tok;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (body.empty() || ec != std::errc() || ptr != body.data() + body.size())
    throw ParseError(std::string("bad ") + what + " '" + std::string(tok) + "'",
                     line);
  return value;
}

inline int parse_index(std::string_view tok, std::size_t line) {
  std::string_view body = tok;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
  if (body.empty() || ec != std::errc() || ptr != body.data() + body.size())
    throw ParseError("bad feature index '" + std::string(tok) + "'", line);
  return value;
}

}  // namespace detail

// Parses LIBSVM text: one example per line, `<label> <idx>:<val> ...`,
// 1-based strictly increasing indices, `#` starts a comment. Any strictly
// positive label maps to +1, negative to -1; a zero label is rejected.
// When `dim_override` is given it must cover every index seen.
inline SparseDataset parse_libsvm(std::istream &in,
                                  std::optional<std::size_t> dim_override = {}) {
  SparseDataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    if (auto hash = sv.find('#'); hash != std::string_view::npos)
      sv = sv.substr(0, hash);
    while (!sv.empty() && (sv.back() == '\r' || sv.back() == ' ' || sv.back() == '\t'))
      sv.remove_suffix(1);

    std::size_t pos = 0;
    auto next_token = [&]() -> std::string_view {
      while (pos < sv.size() && (sv[pos] == ' ' || sv[pos] == '\t')) ++pos;
      std::size_t start = pos;
      while (pos < sv.size() && sv[pos] != ' ' && sv[pos] != '\t') ++pos;
      return sv.substr(start, pos - start);
    };

    std::string_view label_tok = next_token();
    if (label_tok.empty()) continue;  // blank or comment-only line

    double raw_label = detail::parse_number(label_tok, line_no, "label");
    if (raw_label == 0.0) throw ParseError("zero label", line_no);

    std::vector<Feature> row;
    int prev_index = 0;
    for (std::string_view tok = next_token(); !tok.empty(); tok = next_token()) {
      auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError("expected idx:val, got '" + std::string(tok) + "'",
                         line_no);
      int idx = detail::parse_index(tok.substr(0, colon), line_no);
      double val =
          detail::parse_number(tok.substr(colon + 1), line_no, "feature value");
      if (idx < 1) throw ParseError("feature index < 1", line_no);
      if (idx <= prev_index)
        throw ParseError("feature indices must strictly increase", line_no);
      prev_index = idx;
      row.push_back({idx, val});
    }
    if (prev_index > 0 && static_cast<std::size_t>(prev_index) > max_index)
      max_index = static_cast<std::size_t>(prev_index);
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(raw_label > 0.0 ? +1 : -1);
  }
  if (ds.rows.empty()) throw ParseError("empty input", line_no == 0 ? 1 : line_no);

  ds.n = ds.rows.size();
  if (dim_override) {
    if (*dim_override < max_index)
      throw InvalidProblem("dimension override " + std::to_string(*dim_override) +
                           " smaller than max feature index " +
                           std::to_string(max_index));
    ds.dim = *dim_override;
  } else {
    ds.dim = max_index;
  }
  ds.r_max = max_row_norm(ds);
  return ds;
}

inline SparseDataset parse_libsvm(const std::string &text,
                                  std::optional<std::size_t> dim_override = {}) {
  std::istringstream in(text);
  return parse_libsvm(in, dim_override);
}

inline SparseDataset load_libsvm_file(const std::string &path,
                                      std::optional<std::size_t> dim_override = {}) {
  std::ifstream in(path);
  if (!in) throw SolverError("cannot open '" + path + "'");
  return parse_libsvm(in, dim_override);
}

// Round-trip inverse of parse_libsvm (values printed with full precision).
inline std::string serialize_libsvm(const SparseDataset &ds) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < ds.n; ++i) {
    out += ds.labels[i] > 0 ? "+1" : "-1";
    for (const Feature &f : ds.rows[i]) {
      std::snprintf(buf, sizeof(buf), " %d:%.17g", f.index, f.value);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace riskmin

#endif  // RISKMIN_DATAIO_HPP
