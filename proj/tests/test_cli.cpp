#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const char *cli_path() { return RISKMIN_CLI_PATH; }

struct RunResult {
  int exit_code;
  std::string out;
};

RunResult run(const std::string &args) {
  static int counter = 0;
  fs::path out_file =
      fs::temp_directory_path() / ("riskmin_cli_out_" + std::to_string(counter++));
  std::string cmd = std::string(cli_path()) + " " + args + " > " +
                    out_file.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(out_file);
  return r;
}

fs::path temp_file(const std::string &name, const std::string &content) {
  fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << content;
  return p;
}

std::string strip_wall_column(const std::string &csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::string rebuilt;
    int col = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (col != 1) {
          if (!rebuilt.empty()) rebuilt += ',';
          rebuilt += line.substr(start, i - start);
        }
        start = i + 1;
        ++col;
      }
    }
    out += rebuilt;
    out += '\n';
  }
  return out;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kToyData = "+1 1:1\n";
const std::string kSmallData =
    "+1 1:1.0 2:0.5\n-1 1:-0.8 2:0.2\n+1 2:1.1\n-1 1:-0.2 2:-0.7\n"
    "+1 1:0.9 2:0.3\n-1 1:-1.1\n";

}  // namespace

TEST_CASE("train on the toy problem reaches the closed-form optimum") {
  fs::path data = temp_file("riskmin_toy.libsvm", kToyData);
  fs::path trace = fs::temp_directory_path() / "riskmin_toy_trace.csv";
  RunResult r = run("train --solver pragam --data " + data.string() +
                    " --lambda 1 --eps 1e-6 --trace " + trace.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("converged") != std::string::npos);
  std::string csv = slurp(trace);
  CHECK(csv.rfind("iter,wall_seconds,J,D,gap,eps_t,err_t,test_acc", 0) == 0);
  // final row carries J close to 0.5
  CHECK(r.out.find("J=0.5") != std::string::npos);
  fs::remove(data);
  fs::remove(trace);
}

TEST_CASE("every solver flag value is accepted") {
  fs::path data = temp_file("riskmin_small.libsvm", kSmallData);
  for (const char *solver : {"pragam", "pragam-b", "ls-bmrm", "qp-bmrm"}) {
    RunResult r = run("train --solver " + std::string(solver) + " --data " +
                      data.string() + " --lambda 0.5 --eps 1e-3 --max-iter 4000");
    CHECK(r.exit_code == 0);
  }
  fs::remove(data);
}

TEST_CASE("tiny lambda is parsed exactly") {
  fs::path data = temp_file("riskmin_small2.libsvm", kSmallData);
  RunResult r = run("train --solver qp-bmrm --data " + data.string() +
                    " --lambda 0.0000152587890625 --eps 1e-2 --max-iter 20000");
  CHECK(r.exit_code == 0);
  fs::remove(data);
}

TEST_CASE("missing data file exits 1") {
  RunResult r = run("train --solver pragam --data /nonexistent.libsvm --lambda 1");
  CHECK(r.exit_code == 1);
}

TEST_CASE("iteration cap exits 2") {
  fs::path data = temp_file("riskmin_small3.libsvm", kSmallData);
  RunResult r = run("train --solver pragam --data " + data.string() +
                    " --lambda 0.01 --eps 1e-12 --max-iter 3");
  CHECK(r.exit_code == 2);
  fs::remove(data);
}

TEST_CASE("same seed gives byte-identical traces modulo timing") {
  fs::path data = temp_file("riskmin_small4.libsvm", kSmallData);
  fs::path t1 = fs::temp_directory_path() / "riskmin_trace_a.csv";
  fs::path t2 = fs::temp_directory_path() / "riskmin_trace_b.csv";
  std::string base = "train --solver pragam --data " + data.string() +
                     " --lambda 0.5 --eps 1e-5 --seed 7 --trace ";
  CHECK(run(base + t1.string()).exit_code == 0);
  CHECK(run(base + t2.string()).exit_code == 0);
  std::string a = strip_wall_column(slurp(t1));
  std::string b = strip_wall_column(slurp(t2));
  CHECK(a == b);
  CHECK(!a.empty());
  fs::remove(data);
  fs::remove(t1);
  fs::remove(t2);
}

TEST_CASE("test accuracy and reference error columns are emitted") {
  fs::path data = temp_file("riskmin_small5.libsvm", kSmallData);
  fs::path trace = fs::temp_directory_path() / "riskmin_trace_acc.csv";
  RunResult r = run("train --solver pragam --data " + data.string() +
                    " --test " + data.string() +
                    " --lambda 0.5 --eps 1e-4 --ref-opt 0.1 --trace " +
                    trace.string());
  CHECK(r.exit_code == 0);
  std::string csv = slurp(trace);
  std::istringstream in(csv);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  std::vector<std::string> fields;
  std::stringstream row(first);
  std::string cell;
  while (std::getline(row, cell, ',')) fields.push_back(cell);
  REQUIRE(fields.size() == 8);
  CHECK(fields[5].empty());   // eps_t is a bundle-only column
  CHECK(!fields[6].empty());  // err_t
  CHECK(!fields[7].empty());  // test_acc
  CHECK(r.out.find("test_acc=") != std::string::npos);
  // err_t tracks the best objective seen, so it never increases
  double prev_err = 1e300;
  std::string line = first;
  do {
    std::stringstream cells(line);
    std::vector<std::string> f;
    while (std::getline(cells, cell, ',')) f.push_back(cell);
    double err = std::stod(f[6]);
    CHECK(err <= prev_err + 1e-15);
    prev_err = err;
  } while (std::getline(in, line) && !line.empty());
  fs::remove(data);
  fs::remove(trace);
}

TEST_CASE("save-model writes one weight per line, bias last") {
  fs::path data = temp_file("riskmin_small6.libsvm", kSmallData);
  fs::path model = fs::temp_directory_path() / "riskmin_model.txt";
  RunResult r = run("train --solver pragam-b --data " + data.string() +
                    " --lambda 0.5 --eps 1e-3 --save-model " + model.string());
  CHECK(r.exit_code == 0);
  std::istringstream in(slurp(model));
  std::string line;
  int lines = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++lines;
  CHECK(lines == 3);  // two weights plus the bias
  fs::remove(data);
  fs::remove(model);
}

TEST_CASE("lowerbound prescribed mode verifies the identities") {
  fs::path trace = fs::temp_directory_path() / "riskmin_lb.csv";
  RunResult r = run("lowerbound --d 64 --lambda 1 --t-max 31 --mode prescribed --trace " +
                    trace.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("identities hold") != std::string::npos);
  std::string csv = slurp(trace);
  CHECK(csv.rfind("t,Jt_wt,J_wt,eps_t,delta_t", 0) == 0);
  fs::remove(trace);
}

TEST_CASE("lowerbound rejects t_max >= d/2") {
  RunResult r = run("lowerbound --d 8 --lambda 1 --t-max 4 --mode prescribed");
  CHECK(r.exit_code != 0);
}

TEST_CASE("lowerbound faithful mode writes a trace without asserting") {
  fs::path trace = fs::temp_directory_path() / "riskmin_lb_faithful.csv";
  RunResult r = run("lowerbound --d 16 --lambda 1 --t-max 7 --mode faithful --trace " +
                    trace.string());
  CHECK(r.exit_code == 0);
  CHECK(slurp(trace).find('\n') != std::string::npos);
  fs::remove(trace);
}

TEST_CASE("project solves the simplex instance from JSON") {
  fs::path in = temp_file("riskmin_proj.json",
                          R"({"d":[1,1,1],"m":[0.9,0.3,0.0],"l":[0,0,0],)"
                          R"("u":[1,1,1],"sigma":[1,1,1],"z":1.0})");
  RunResult r = run("project --input " + in.string());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"alpha\"") != std::string::npos);
  CHECK(r.out.find("0.8") != std::string::npos);
  CHECK(r.out.find("0.2") != std::string::npos);
  fs::remove(in);
}

TEST_CASE("project exits 3 on infeasible problems") {
  fs::path in = temp_file("riskmin_proj_bad.json",
                          R"({"d":[1,1],"m":[0,0],"l":[0,0],"u":[1,1],)"
                          R"("sigma":[1,1],"z":5.0})");
  RunResult r = run("project --input " + in.string());
  CHECK(r.exit_code == 3);
  fs::remove(in);
}

TEST_CASE("project-struct solves a chain and reports residuals") {
  fs::path in = temp_file(
      "riskmin_chain.json",
      R"({"L":3,"m":2,"d":[1.0,1.0],)"
      R"("targets":[[0.4,0.1,0.3,0.2],[0.25,0.3,0.05,0.4]]})");
  fs::path out = fs::temp_directory_path() / "riskmin_chain_out.json";
  RunResult r = run("project-struct --input " + in.string() + " --output " +
                    out.string());
  CHECK(r.exit_code == 0);
  std::string body = slurp(out);
  CHECK(body.find("normalization_residual") != std::string::npos);
  CHECK(body.find("consistency_residual") != std::string::npos);
  fs::remove(in);
  fs::remove(out);
}

TEST_CASE("unknown flags exit 1") {
  CHECK(run("train --bogus").exit_code == 1);
  CHECK(run("").exit_code == 1);
}
