// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Criterion 8 trains the shipped ring config and takes minutes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "bas/analysis.hpp"
#include "bas/nnet.hpp"
#include "bas/quadrature.hpp"
#include "bas/sidenet.hpp"
#include "bas/solvers.hpp"
#include "cli/commands.hpp"

namespace {

namespace fs = std::filesystem;
using bas::Rng;
using bas::TensorBuffer;
using bas::flow::AnalyticField;
using bas::flow::CountedField;
using bas::flow::TimeProfile;
using bas::quadrature::QuadratureKind;
using bas::solvers::SamplerConfig;
using bas::solvers::SolverKind;
using Json = nlohmann::json;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bas_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

int run_cli(const std::string& cmd, const std::optional<fs::path>& config, const fs::path& out,
            std::string& errors) {
  bas::cli::CommandOptions o;
  o.config = config;
  o.out = out;
  o.out_given = true;
  std::ostringstream log, err;
  const int code = bas::cli::run_command(cmd, o, log, err);
  errors += err.str();
  return code;
}

Outcome quadrature_exactness() {
  struct Case {
    QuadratureKind kind;
    int degree;
  };
  double worst = 0.0;
  bool ok = true;
  for (const auto& c : {Case{QuadratureKind::GaussLobatto4, 5}, Case{QuadratureKind::GaussLegendre3, 5},
                        Case{QuadratureKind::Simpson3, 3}}) {
    const auto rule = bas::quadrature::make_rule(c.kind);
    for (int d = 0; d <= c.degree; ++d) {
      double s = 0.0;
      for (std::size_t i = 0; i < rule.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], d);
      const double err = std::abs(s - 1.0 / (d + 1));
      worst = std::max(worst, err);
      ok = ok && err <= 1e-12;
    }
  }
  return {ok, "max monomial error " + num(worst, 3)};
}

Outcome order_suite() {
  const auto f = AnalyticField::time_only(TimeProfile::cosine());
  const bas::analysis::OracleSideNet oracle(f);
  const std::vector<std::size_t> fine{4, 8, 16, 32, 64};
  const std::vector<std::size_t> coarse{2, 3, 4, 6, 8};
  SamplerConfig euler, heun, ba;
  euler.solver = SolverKind::Euler;
  heun.solver = SolverKind::Heun;
  ba.solver = SolverKind::BiAnchor;
  ba.rule = QuadratureKind::GaussLobatto4;
  const auto e = bas::analysis::fit_order(euler, f, nullptr, fine);
  const auto h = bas::analysis::fit_order(heun, f, nullptr, fine);
  const auto b = bas::analysis::fit_order(ba, f, &oracle, coarse);
  const bool ok = e.slope >= 0.85 && e.slope <= 1.15 && h.slope >= 1.85 && h.slope <= 2.15 &&
                  b.slope >= 5.5 && e.r_squared >= 0.98 && h.r_squared >= 0.98 &&
                  b.r_squared >= 0.98;
  return {ok, "euler " + num(e.slope) + " (R2 " + num(e.r_squared) + "), heun " + num(h.slope) +
                  " (R2 " + num(h.r_squared) + "), bi-anchor " + num(b.slope) + " (R2 " +
                  num(b.r_squared) + ")"};
}

const std::vector<double> kStepGrid{0.025, 0.05, 0.1, 0.2};

Outcome local_error_slope() {
  const auto f = AnalyticField::linear_state({-1.0}, {1.0});
  const bas::analysis::DriftSideNet drift(f);
  const auto scan =
      bas::analysis::single_anchor_lte_scan(f, drift, kStepGrid, std::vector<double>{0.0}, 0.6);
  return {scan.slope >= 1.8 && scan.slope <= 2.2,
          "slope " + num(scan.slope) + " (R2 " + num(scan.r_squared) + ")"};
}

Outcome anchor_ratio() {
  const auto f = AnalyticField::linear_state({-1.0}, {1.0});
  const bas::analysis::DriftSideNet drift(f);
  const auto points =
      bas::analysis::anchor_error_ratio(f, drift, kStepGrid, std::vector<double>{0.0}, 0.6);
  bool ok = !points.empty();
  std::string detail = "ratios";
  for (const auto& p : points) {
    ok = ok && p.ratio && *p.ratio >= 1.6 && *p.ratio <= 2.4;
    detail += " " + (p.ratio ? num(*p.ratio) : std::string("undefined"));
  }
  return {ok, detail};
}

// Counts backbone calls independently of the solvers' own bookkeeping.
class CallCounter final : public bas::flow::VelocityField {
 public:
  explicit CallCounter(const bas::flow::VelocityField& inner) : inner_(inner) {}
  std::size_t dim() const override { return inner_.dim(); }
  bas::flow::FieldKind kind() const override { return inner_.kind(); }
  TensorBuffer evaluate(const TensorBuffer& x, double t) const override {
    ++calls;
    return inner_.evaluate(x, t);
  }
  mutable std::size_t calls = 0;

 private:
  const bas::flow::VelocityField& inner_;
};

Outcome nfe_accounting() {
  const auto f = AnalyticField::time_only(TimeProfile::cosine(), 2);
  const bas::analysis::OracleSideNet oracle(f);
  Rng rng(1);
  const auto x1 = bas::flow::sample_noise(16, 2, rng);
  bool ok = true;
  std::string detail;
  for (std::size_t n : {3, 5, 7, 10, 15}) {
    const CallCounter ba_counter(f), heun_counter(f);
    bas::solvers::ba_solve(ba_counter, oracle, x1, n,
                           bas::quadrature::make_rule(QuadratureKind::GaussLobatto4));
    bas::solvers::heun_solve(heun_counter, x1, n);
    ok = ok && ba_counter.calls == n && heun_counter.calls == 2 * n;
    detail += "N=" + std::to_string(n) + ":" + std::to_string(ba_counter.calls) + "/" +
              std::to_string(heun_counter.calls) + " ";
  }

  bas::sidenet::ChainTrainConfig tc;
  tc.h_max = 0.05;
  const auto side = bas::sidenet::SideNet::create(2, {{8}, 2}, 3);
  Rng data(2);
  const bas::sidenet::TrainBatch batch{bas::flow::sample_noise(8, 2, data),
                                       bas::flow::sample_noise(8, 2, data)};
  std::size_t full = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r(seed);
    CountedField counter(f);
    const auto step = bas::sidenet::chain_train_step(counter, side, batch, tc, r);
    ok = ok && counter.nfe() == step.completed_links + 1;
    if (step.completed_links == 8) {
      ok = ok && counter.nfe() == 9;
      ++full;
    }
  }
  ok = ok && full > 0;
  detail += "(bi-anchor/heun); " + std::to_string(full) + " full chains at 9 calls";
  return {ok, detail};
}

Outcome structural_identities() {
  auto side = bas::sidenet::SideNet::create(2, {{16, 16}, 4}, 21);
  std::mt19937_64 gen(21);
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& w : side.mutable_model().layers.back().weight.values()) w = n(gen);
  Rng rng(22);
  const auto x = bas::flow::sample_noise(32, 2, rng);
  const auto v = bas::flow::sample_noise(32, 2, rng);
  bool identity = true;
  for (double t : {0.1, 0.5, 1.0}) {
    const auto pred = bas::sidenet::sidenet_predict(side, x, v, t, std::vector<double>{0.0});
    identity = identity && pred[0] == v;
  }

  const auto zeros = bas::sidenet::SideNet::zeros(2, {{16, 16}, 4});
  const auto lin = AnalyticField::linear_state({-0.7, 0.3}, {0.2, 1.0});
  bool euler_equal = true;
  for (std::size_t intervals : {1, 4, 9}) {
    const auto sa = bas::solvers::single_anchor_solve(
        lin, zeros, x, intervals, bas::quadrature::make_rule(QuadratureKind::GaussLobatto4));
    const auto eu = bas::solvers::euler_solve(lin, x, intervals);
    euler_equal = euler_equal && sa.final_state == eu.final_state;
  }
  return {identity && euler_equal, std::string("zero offset ") + (identity ? "exact" : "differs") +
                                       ", zero SideNet vs Euler " +
                                       (euler_equal ? "bitwise equal" : "differs")};
}

Outcome gradient_check() {
  std::mt19937_64 gen(7);
  std::uniform_int_distribution<std::size_t> width(1, 5), depth(1, 3), batch(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  std::size_t models = 0;
  while (models < 20) {
    std::vector<std::size_t> dims{width(gen)};
    const std::size_t hidden = depth(gen);
    for (std::size_t i = 0; i < hidden; ++i) dims.push_back(width(gen));
    dims.push_back(width(gen));
    auto m = bas::nnet::mlp_init(dims, gen());
    if (m.parameter_count() > 150) continue;
    ++models;
    const std::size_t b = batch(gen);
    TensorBuffer x = TensorBuffer::matrix(b, dims.front()), y = TensorBuffer::matrix(b, dims.back());
    for (auto& e : x.values()) e = normal(gen);
    for (auto& e : y.values()) e = normal(gen);
    for (auto& layer : m.layers) {
      for (auto& e : layer.bias.values()) e = 0.3 * normal(gen);
    }
    const auto analytic = bas::nnet::grad_mse(m, x, y);
    const double step = 1e-6;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      for (int which = 0; which < 2; ++which) {
        TensorBuffer& p = which == 0 ? m.layers[l].weight : m.layers[l].bias;
        const TensorBuffer& g = which == 0 ? analytic.grads[l].weight : analytic.grads[l].bias;
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double keep = p[i];
          p[i] = keep + step;
          const double up = bas::nnet::grad_mse(m, x, y).loss;
          p[i] = keep - step;
          const double down = bas::nnet::grad_mse(m, x, y).loss;
          p[i] = keep;
          const double fd = (up - down) / (2 * step);
          // Relative 1e-5 with a 1e-8 absolute floor for near-zero entries.
          const double allowed = 1e-5 * std::max(std::abs(fd), std::abs(g[i])) + 1e-8;
          worst = std::max(worst, std::abs(fd - g[i]) / allowed);
        }
      }
    }
  }
  return {worst <= 1.0, std::to_string(models) + " models, worst error at " + num(worst, 3) +
                           " of the allowed 1e-5 relative + 1e-8 absolute"};
}

// Trains the shipped config in a scratch directory and reads the bench grid.
Outcome benchmark_ordering() {
  const fs::path config = fs::path(BAS_SOURCE_DIR) / "configs" / "gaussian_ring8.json";
  const fs::path out = scratch("ring8");
  std::string errors;
  const double cpu0 = cpu_seconds();
  for (const char* cmd : {"train-backbone", "train-sidenet"}) {
    if (run_cli(cmd, config, out, errors) != 0) return {false, std::string(cmd) + ": " + errors};
  }
  const double train_cpu = cpu_seconds() - cpu0;
  if (run_cli("bench", config, out, errors) != 0) return {false, "bench: " + errors};

  double ba5 = -1, euler5 = -1, reference = -1;
  const auto rows = split_lines(slurp(out / "metrics.csv"));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> cell;
    std::istringstream in(rows[i]);
    for (std::string c; std::getline(in, c, ',');) cell.push_back(c);
    if (cell.size() < 4) continue;
    if (cell[1] != "5") continue;
    if (cell[0] == "bi_anchor") ba5 = std::stod(cell[3]);
    if (cell[0] == "euler") euler5 = std::stod(cell[3]);
  }
  for (const auto& row : split_lines(slurp(out / "bench_reference.csv"))) {
    if (row.rfind("reference,", 0) == 0) {
      std::vector<std::string> cell;
      std::istringstream in(row);
      for (std::string c; std::getline(in, c, ',');) cell.push_back(c);
      reference = std::stod(cell.at(4));
    }
  }
  if (ba5 < 0 || euler5 < 0 || reference <= 0) return {false, "missing rows in bench output"};
  const double ratio = ba5 / reference;
  const bool a = ba5 < euler5;
  const bool b = ratio <= 1.5;
  const bool budget = train_cpu <= 600.0;
  fs::remove_all(out);
  return {a && b && budget, "SW bi-anchor N=5 " + num(ba5) + " vs euler N=5 " + num(euler5) +
                                " (" + (a ? "lower" : "not lower") + "), ratio to euler N=100 " +
                                num(ratio, 3) + ", training cpu " + num(train_cpu, 3) + " s"};
}

Json tiny_config() {
  return Json::parse(R"({
    "problem": {"dataset": "checkerboard", "dim": 2},
    "backbone": {"hidden": [16, 16], "n_freq": 2, "batch_size": 32, "iterations": 40,
                 "learning_rate": 0.003, "seed": 11},
    "sidenet": {"hidden": [16], "n_freq": 2, "batch_size": 16, "iterations": 20,
                "learning_rate": 0.001, "seed": 12},
    "sampler": {"solver": "bi_anchor", "intervals": 5, "n_samples": 100,
                "trajectory_runs": 3, "seed": 13},
    "bench": {"intervals": [3, 5, 7], "reference_intervals": 20, "n_samples": 100,
              "n_reference": 100, "projections": 16, "data_seed": 14, "metric_seed": 15},
    "output": {"directory": "unused", "formats": ["csv"]}
  })");
}

// Timing column of metrics.csv is the one non-deterministic field.
std::string without_wall_time(const std::string& text) {
  std::string out;
  for (const auto& line : split_lines(text)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

Outcome reproducibility() {
  const fs::path root = scratch("repro");
  const fs::path first = root / "first", second = root / "second";
  {
    std::ofstream(root / "config.json") << tiny_config().dump(2);
  }
  std::string errors;
  const char* commands[] = {"train-backbone", "train-sidenet", "sample", "bench", "verify"};
  for (const char* cmd : commands) {
    const bool has_config = std::string(cmd) != "verify";
    if (run_cli(cmd, has_config ? std::optional<fs::path>(root / "config.json") : std::nullopt,
                first, errors) != 0) {
      return {false, std::string(cmd) + ": " + errors};
    }
  }
  std::size_t compared = 0;
  std::vector<std::string> mismatched;
  for (const char* cmd : commands) {
    const fs::path manifest_path = first / (std::string("manifest_") + cmd + ".json");
    if (!fs::exists(manifest_path)) return {false, std::string("no manifest for ") + cmd};
    const auto manifest = Json::parse(slurp(manifest_path));
    const bool has_config = manifest.contains("config") && !manifest.at("config").is_null();
    const fs::path rerun_dir = second / cmd;
    if (run_cli(cmd, has_config ? std::optional<fs::path>(manifest_path) : std::nullopt, rerun_dir,
                errors) != 0) {
      return {false, std::string("rerun ") + cmd + ": " + errors};
    }
    const auto rerun_manifest =
        Json::parse(slurp(rerun_dir / (std::string("manifest_") + cmd + ".json")));
    if (manifest.value("config_hash", "") != rerun_manifest.value("config_hash", "")) {
      mismatched.push_back(std::string(cmd) + ":config_hash");
    }
    for (const auto& entry : manifest.at("outputs")) {
      const std::string file = entry.at("file").get<std::string>();
      std::string a = slurp(first / file), b = slurp(rerun_dir / file);
      if (file == "metrics.csv") {
        a = without_wall_time(a);
        b = without_wall_time(b);
      }
      ++compared;
      if (a.empty() || a != b) mismatched.push_back(std::string(cmd) + ":" + file);
    }
  }
  fs::remove_all(root);
  std::string detail = std::to_string(compared) + " output files compared across 5 commands";
  for (const auto& m : mismatched) detail += ", differs " + m;
  return {mismatched.empty() && compared > 0, detail};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double time_limit_s;  // wall clock; 0 means no separate limit
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "quadrature exactness", 1.0, quadrature_exactness},
      {2, "order of convergence", 10.0, order_suite},
      {3, "single-anchor local error slope", 5.0, local_error_slope},
      {4, "single/bi-anchor error ratio", 5.0, anchor_ratio},
      {5, "NFE accounting", 5.0, nfe_accounting},
      {6, "structural identities", 1.0, structural_identities},
      {7, "gradient correctness", 10.0, gradient_check},
      {8, "ring benchmark ordering", 0.0, benchmark_ordering},
      {9, "reproducibility from manifests", 0.0, reproducibility},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0.0 && seconds > c.time_limit_s) {
      outcome.passed = false;
      outcome.detail += ", over time limit";
    }
    if (!outcome.passed) ++failures;
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", outcome.passed ? "PASS" : "FAIL", c.id,
                c.name, outcome.detail.c_str(), seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
