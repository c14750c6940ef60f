// Command-line front end: train / lowerbound / project / project-struct.
// Exit codes: 0 success, 1 bad flags or unreadable input, 2 iteration cap,
// 3 infeasible problem.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "riskmin/bundle.hpp"
#include "riskmin/dataio.hpp"
#include "riskmin/lowerbound.hpp"
#include "riskmin/pragam.hpp"
#include "riskmin/projection.hpp"
#include "riskmin/structproj.hpp"
#include "riskmin/trace.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIterationCap = 2;
constexpr int kExitInfeasible = 3;

double accuracy(const riskmin::SparseDataset &ds, const std::vector<double> &w,
                double bias) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.n; ++i) {
    double s = 0.0;
    for (const riskmin::Feature &f : ds.rows[i])
      if (static_cast<std::size_t>(f.index) <= w.size())
        s += w[f.index - 1] * f.value;
    s += bias;
    int pred = s >= 0.0 ? +1 : -1;
    hits += (pred == ds.labels[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(ds.n);
}

void save_model(const std::string &path, const riskmin::PrimalModel &model) {
  std::ofstream out(path);
  if (!out) throw riskmin::SolverError("cannot write '" + path + "'");
  char buf[64];
  for (double v : model.w) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    out << buf;
  }
  if (model.bias) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", *model.bias);
    out << buf;
  }
}

struct TrainArgs {
  std::string solver;
  std::string data;
  double lambda = 1.0;
  double eps = 1e-4;
  long max_iter = 100000;
  std::string trace_path;
  std::string test_path;
  std::optional<double> ref_opt;
  std::optional<std::uint64_t> seed;
  std::string save_path;
};

int run_train(const TrainArgs &args) {
  riskmin::SparseDataset train = riskmin::load_libsvm_file(args.data);
  std::optional<riskmin::SparseDataset> test;
  if (!args.test_path.empty())
    test = riskmin::load_libsvm_file(args.test_path, train.dim);

  bool bias_mode = args.solver == "pragam-b";
  std::vector<riskmin::ConvergenceRecord> rows;
  std::vector<double> w_best;
  double j_best = 1e300;

  auto observe = [&](const riskmin::ConvergenceRecord &r,
                     const std::vector<double> &w) {
    riskmin::ConvergenceRecord row = r;
    if (row.J && *row.J < j_best) {
      j_best = *row.J;
      w_best = w;
    }
    if (args.ref_opt) row.err_t = j_best - *args.ref_opt;
    if (test) {
      double b = bias_mode ? riskmin::optimal_bias(w_best, train) : 0.0;
      row.test_acc = accuracy(*test, w_best, b);
    }
    rows.push_back(row);
  };

  riskmin::PrimalModel model;
  bool converged = false;
  double final_j = 0.0, final_d = 0.0;
  bool have_d = false;

  if (args.solver == "pragam" || args.solver == "pragam-b") {
    riskmin::PragamOptions opt;
    opt.lambda = args.lambda;
    opt.bias_mode = bias_mode;
    opt.eps = args.eps;
    opt.max_iter = args.max_iter;
    opt.init_seed = args.seed;
    opt.on_iteration = observe;
    riskmin::PragamResult res = riskmin::pragam_run(train, opt);
    model = res.model;
    converged = res.converged;
    final_j = res.trace.back().J.value_or(0.0);
    final_d = res.trace.back().D.value_or(0.0);
    have_d = true;
  } else if (args.solver == "ls-bmrm" || args.solver == "qp-bmrm") {
    riskmin::BmrmOptions opt;
    opt.lambda = args.lambda;
    opt.variant = args.solver == "ls-bmrm" ? riskmin::BundleVariant::line_search
                                           : riskmin::BundleVariant::full_qp;
    opt.eps = args.eps;
    opt.max_iter = args.max_iter;
    opt.on_iteration = observe;
    riskmin::BmrmResult res = riskmin::bmrm_train(train, opt);
    model = res.model;  // incumbent
    converged = res.converged;
    final_j = riskmin::primal_objective(model, train);
  } else {
    std::cerr << "unknown solver '" << args.solver << "'\n";
    return kExitUsage;
  }

  if (!args.trace_path.empty()) {
    std::ofstream out(args.trace_path);
    if (!out) throw riskmin::SolverError("cannot write '" + args.trace_path + "'");
    out << riskmin::trace_csv_header() << '\n';
    for (const auto &r : rows) out << riskmin::trace_csv_row(r) << '\n';
  }
  if (!args.save_path.empty()) save_model(args.save_path, model);

  std::printf("J=%.12g", final_j);
  if (have_d) std::printf(" D=%.12g gap=%.12g", final_d, final_j - final_d);
  if (test) {
    double b = model.bias.value_or(0.0);
    std::printf(" test_acc=%.6f", accuracy(*test, model.w, b));
  }
  std::printf(" %s\n", converged ? "converged" : "iteration-cap");
  return converged ? kExitOk : kExitIterationCap;
}

int run_lowerbound(std::size_t d, double lambda, long t_max,
                   const std::string &mode_name, const std::string &trace_path) {
  riskmin::AdversaryMode mode;
  if (mode_name == "prescribed")
    mode = riskmin::AdversaryMode::prescribed;
  else if (mode_name == "faithful")
    mode = riskmin::AdversaryMode::faithful;
  else {
    std::cerr << "mode must be prescribed or faithful\n";
    return kExitUsage;
  }
  riskmin::HadamardInstance inst = riskmin::build_instance(d, lambda);
  std::vector<riskmin::AdversaryRow> rows =
      riskmin::run_adversary(inst, t_max, mode);

  if (!trace_path.empty()) {
    std::ofstream out(trace_path);
    if (!out) throw riskmin::SolverError("cannot write '" + trace_path + "'");
    out << "t,Jt_wt,J_wt,eps_t,delta_t\n";
    char buf[160];
    for (const auto &r : rows) {
      std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g\n", r.t,
                    r.jt_wt, r.j_wt, r.eps_t, r.delta_t);
      out << buf;
    }
  }

  if (mode == riskmin::AdversaryMode::prescribed) {
    for (const auto &r : rows) {
      double ref = 1.0 / (2.0 * lambda * static_cast<double>(r.t));
      bool ok = std::fabs(r.jt_wt + ref) <= 1e-10 * ref &&
                r.eps_t >= ref - 1e-10 && r.delta_t >= ref - 1e-10;
      if (!ok) {
        std::fprintf(stderr, "identity check failed at t=%ld\n", r.t);
        return kExitUsage;
      }
    }
    std::printf("prescribed identities hold for t=1..%ld\n",
                rows.empty() ? 0 : rows.back().t);
  } else {
    std::printf("faithful trace recorded for t=1..%ld\n",
                rows.empty() ? 0 : rows.back().t);
  }
  return kExitOk;
}

json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw riskmin::SolverError("cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

void write_output(const json &j, const std::string &path) {
  if (path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out(path);
    if (!out) throw riskmin::SolverError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
  }
}

int run_project(const std::string &input, const std::string &output) {
  json in = read_json_file(input);
  riskmin::SeparableQpProblem p;
  p.d = in.at("d").get<std::vector<double>>();
  p.m = in.at("m").get<std::vector<double>>();
  p.l = in.at("l").get<std::vector<double>>();
  p.u = in.at("u").get<std::vector<double>>();
  p.sigma = in.at("sigma").get<std::vector<double>>();
  p.z = in.at("z").get<double>();
  riskmin::ProjectionSolution sol = riskmin::solve_separable_qp(p);
  json out = {{"alpha", sol.alpha},
              {"lambda", sol.lambda},
              {"kkt_residual", sol.kkt_residual}};
  write_output(out, output);
  return kExitOk;
}

int run_project_struct(const std::string &input, const std::string &output) {
  json in = read_json_file(input);
  riskmin::SequenceProjectionProblem p;
  p.length = in.at("L").get<std::size_t>();
  p.labels = in.at("m").get<std::size_t>();
  p.weights = in.at("d").get<std::vector<double>>();
  p.targets = in.at("targets").get<std::vector<std::vector<double>>>();
  riskmin::StructProjectionResult res = riskmin::project_sequence(p);
  json out = {{"alpha", res.marginals},
              {"sweeps", res.sweeps},
              {"normalization_residual", res.normalization_residual},
              {"consistency_residual", res.consistency_residual},
              {"min_alpha", res.min_marginal}};
  write_output(out, output);
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"linear SVM regularized risk minimization toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  CLI::App *train = app.add_subcommand("train", "train a linear SVM");
  train->add_option("--solver", train_args.solver,
                    "pragam | pragam-b | ls-bmrm | qp-bmrm")
      ->required();
  train->add_option("--data", train_args.data, "LIBSVM training file")->required();
  train->add_option("--lambda", train_args.lambda, "regularization")->required();
  train->add_option("--eps", train_args.eps, "target gap");
  train->add_option("--max-iter", train_args.max_iter, "iteration cap");
  train->add_option("--trace", train_args.trace_path, "CSV trace output");
  train->add_option("--test", train_args.test_path, "LIBSVM held-out file");
  double ref_opt_raw = 0.0;
  train->add_option("--ref-opt", ref_opt_raw, "reference optimal J");
  std::int64_t seed_val = 0;
  train->add_option("--seed", seed_val, "random seed for the initial point");
  train->add_option("--save-model", train_args.save_path,
                    "plain-text weight dump (bias last)");

  std::size_t lb_d = 64;
  double lb_lambda = 1.0;
  long lb_tmax = 1;
  std::string lb_mode = "prescribed";
  std::string lb_trace;
  CLI::App *lb = app.add_subcommand("lowerbound", "Hadamard adversary driver");
  lb->add_option("--d", lb_d, "dimension (power of two)")->required();
  lb->add_option("--lambda", lb_lambda, "regularization")->required();
  lb->add_option("--t-max", lb_tmax, "iterations (must be < d/2)")->required();
  lb->add_option("--mode", lb_mode, "prescribed | faithful");
  lb->add_option("--trace", lb_trace, "CSV trace output");

  std::string proj_in, proj_out;
  CLI::App *proj = app.add_subcommand("project", "separable box QP solve");
  proj->add_option("--input", proj_in, "problem JSON")->required();
  proj->add_option("--output", proj_out, "solution JSON (stdout if omitted)");

  std::string sp_in, sp_out;
  CLI::App *sproj =
      app.add_subcommand("project-struct", "chain marginal polytope projection");
  sproj->add_option("--input", sp_in, "chain JSON")->required();
  sproj->add_option("--output", sp_out, "solution JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) {
      if (train->count("--ref-opt")) train_args.ref_opt = ref_opt_raw;
      if (train->count("--seed"))
        train_args.seed = static_cast<std::uint64_t>(seed_val);
      return run_train(train_args);
    }
    if (lb->parsed()) return run_lowerbound(lb_d, lb_lambda, lb_tmax, lb_mode, lb_trace);
    if (proj->parsed()) return run_project(proj_in, proj_out);
    if (sproj->parsed()) return run_project_struct(sp_in, sp_out);
  } catch (const riskmin::Infeasible &e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const riskmin::NoConvergence &e) {
    std::cerr << "no convergence: " << e.what() << '\n';
    return kExitIterationCap;
  } catch (const json::exception &e) {
    std::cerr << "bad input: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
