#include "cli/commands.hpp"

#include <zlib.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "bas/analysis.hpp"
#include "bas/nnet.hpp"
#include "bas/quadrature.hpp"
#include "bas/random.hpp"

namespace bas::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::size_t intervals_for_nfe(solvers::SolverKind solver, std::uint64_t nfe) {
  const std::uint64_t per_interval = solvers::expected_nfe(solver, 1);
  if (nfe == 0 || nfe % per_interval != 0) {
    throw ConfigError("--nfe " + std::to_string(nfe) + " is not a multiple of " +
                      std::to_string(per_interval) + " for solver " +
                      std::string(solvers::to_string(solver)));
  }
  return static_cast<std::size_t>(nfe / per_interval);
}

namespace {

std::uint32_t crc_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal(); }

struct Context {
  RunConfig config;
  fs::path out;
};

Context load_context(const CommandOptions& options) {
  if (!options.config) throw ConfigError("--config is required");
  Context ctx{RunConfig::load(*options.config), {}};
  ctx.out = options.out_given ? options.out : ctx.config.output_directory;
  for (const auto& f : ctx.config.output_formats) {
    if (f != "csv") throw ConfigError("config: unsupported output format '" + f + "'");
  }
  fs::create_directories(ctx.out);
  return ctx;
}

fs::path resolve_checkpoint(const std::optional<fs::path>& flag, const std::string& configured,
                            const fs::path& out, const char* default_name) {
  if (flag) return absolute_path(*flag);
  if (!configured.empty()) return absolute_path(configured);
  return absolute_path(out / default_name);
}

nnet::MlpModel load_tagged(const fs::path& path, const std::string& kind) {
  nnet::MlpModel model = nnet::load_checkpoint(path);
  if (model.features.kind != kind) {
    throw nnet::CheckpointError(nnet::CheckpointError::Kind::Invalid,
                                path.string() + ": expected a " + kind + " checkpoint, found '" +
                                    model.features.kind + "'");
  }
  return model;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << '\n';
  }
  CsvWriter& cell(const std::string& s) {
    os_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  CsvWriter& cell(double v) { return cell(format_double(v)); }
  CsvWriter& cell(std::uint64_t v) { return cell(std::to_string(v)); }
  void end_row() {
    os_ << '\n';
    first_ = true;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
  bool first_ = true;
};

std::string loss_csv(const std::vector<double>& curve) {
  CsvWriter csv({"iteration", "loss"});
  for (std::size_t i = 0; i < curve.size(); ++i) {
    csv.cell(static_cast<std::uint64_t>(i)).cell(curve[i]).end_row();
  }
  return csv.str();
}

std::vector<std::string> state_columns(std::size_t dim) {
  std::vector<std::string> cols;
  for (std::size_t k = 0; k < dim; ++k) cols.push_back("x" + std::to_string(k));
  return cols;
}

class Manifest {
 public:
  Manifest(std::string command, const fs::path& out) : command_(std::move(command)), out_(out) {}

  void set_config(const RunConfig& cfg) {
    config_ = cfg.to_json();
    config_hash_ = hex32(crc_of(config_.dump()));
    seeds_ = {{"backbone", cfg.backbone.seed},
              {"sidenet", cfg.sidenet.seed},
              {"sampler", cfg.sampler.config.seed},
              {"bench_data", cfg.bench.data_seed},
              {"bench_metric", cfg.bench.metric_seed}};
  }
  void add_output(const std::string& name, const std::string& bytes) {
    write_file(out_ / name, bytes);
    outputs_.push_back({{"file", name}, {"crc32", hex32(crc_of(bytes))}});
  }
  void add_existing(const std::string& name) { add_output_record(name, read_file(out_ / name)); }
  void add_input(const std::string& role, const fs::path& path) {
    inputs_.push_back(
        {{"role", role}, {"path", path.string()}, {"crc32", hex32(crc_of(read_file(path)))}});
  }
  void set_stat(const std::string& key, Json value) { stats_[key] = std::move(value); }

  void write() const {
    Json doc = {{"manifest_version", kManifestVersion},
                {"command", command_},
                {"tool_version", kToolVersion},
                {"format_version", kOutputFormatVersion},
                {"checkpoint_format_version", nnet::kCheckpointFormatVersion},
                {"config", config_},
                {"config_hash", config_hash_},
                {"seeds", seeds_},
                {"inputs", inputs_},
                {"outputs", outputs_},
                {"stats", stats_}};
    write_file(out_ / ("manifest_" + command_ + ".json"), doc.dump(2) + "\n");
  }

 private:
  void add_output_record(const std::string& name, const std::string& bytes) {
    outputs_.push_back({{"file", name}, {"crc32", hex32(crc_of(bytes))}});
  }

  std::string command_;
  fs::path out_;
  Json config_ = nullptr;
  std::string config_hash_;
  Json seeds_ = Json::object();
  Json inputs_ = Json::array();
  Json outputs_ = Json::array();
  Json stats_ = Json::object();
};

flow::LearnedField load_backbone(const fs::path& path) {
  return flow::LearnedField(load_tagged(path, "backbone"));
}

sidenet::SideNet load_sidenet(const fs::path& path) {
  return sidenet::SideNet(load_tagged(path, "sidenet"));
}

}  // namespace

// --- train-backbone ----------------------------------------------------------

void cmd_train_backbone(const CommandOptions& options, std::ostream& log) {
  Context ctx = load_context(options);
  RunConfig& cfg = ctx.config;
  if (options.seed) cfg.backbone.seed = *options.seed;

  const auto problem = flow::FlowProblem::from_dataset(cfg.dataset);
  const auto result = flow::train_backbone(problem, cfg.backbone);

  Manifest manifest("train-backbone", ctx.out);
  manifest.set_config(cfg);
  nnet::save_checkpoint(result.field.model(), ctx.out / "backbone.json");
  manifest.add_existing("backbone.json");
  manifest.add_output("backbone_loss.csv", loss_csv(result.loss_curve));
  manifest.set_stat("final_loss", result.loss_curve.empty() ? 0.0 : result.loss_curve.back());
  manifest.write();
  log << "train-backbone: " << cfg.backbone.iterations << " iterations, final loss "
      << format_double(result.loss_curve.back()) << " -> " << (ctx.out / "backbone.json").string()
      << '\n';
}

// --- train-sidenet -----------------------------------------------------------

void cmd_train_sidenet(const CommandOptions& options, std::ostream& log) {
  Context ctx = load_context(options);
  RunConfig& cfg = ctx.config;
  if (options.seed) cfg.sidenet.seed = *options.seed;
  const fs::path backbone_path =
      resolve_checkpoint(options.backbone, cfg.backbone_checkpoint, ctx.out, "backbone.json");
  cfg.backbone_checkpoint = backbone_path.string();

  const flow::LearnedField backbone = load_backbone(backbone_path);
  const auto problem = flow::FlowProblem::from_dataset(cfg.dataset);
  const auto result = sidenet::train_sidenet(backbone, problem, cfg.sidenet, cfg.sidenet_arch);

  Manifest manifest("train-sidenet", ctx.out);
  manifest.set_config(cfg);
  manifest.add_input("backbone", backbone_path);
  nnet::save_checkpoint(result.sidenet.model(), ctx.out / "sidenet.json");
  manifest.add_existing("sidenet.json");
  manifest.add_output("sidenet_loss.csv", loss_csv(result.loss_curve));
  manifest.set_stat("backbone_nfe", result.backbone_nfe);
  manifest.set_stat("skipped_chains", result.skipped_chains);
  manifest.write();
  log << "train-sidenet: " << result.loss_curve.size() << " updates ("
      << result.skipped_chains << " chains skipped), " << result.backbone_nfe
      << " backbone calls -> " << (ctx.out / "sidenet.json").string() << '\n';
}

// --- sample ------------------------------------------------------------------

void cmd_sample(const CommandOptions& options, std::ostream& log) {
  Context ctx = load_context(options);
  RunConfig& cfg = ctx.config;
  auto& sc = cfg.sampler.config;
  if (options.seed) sc.seed = *options.seed;
  try {
    if (options.solver) sc.solver = solvers::parse_solver_kind(*options.solver);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (options.nfe) sc.intervals = intervals_for_nfe(sc.solver, *options.nfe);
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.sampler.n_samples == 0) throw ConfigError("config: sampler.n_samples must be positive");

  const fs::path backbone_path =
      resolve_checkpoint(options.backbone, cfg.backbone_checkpoint, ctx.out, "backbone.json");
  cfg.backbone_checkpoint = backbone_path.string();
  std::optional<sidenet::SideNet> side;
  if (sc.uses_sidenet()) {
    const fs::path p =
        resolve_checkpoint(options.sidenet, cfg.sidenet_checkpoint, ctx.out, "sidenet.json");
    cfg.sidenet_checkpoint = p.string();
    side.emplace(load_sidenet(p));
  }
  const flow::LearnedField backbone = load_backbone(backbone_path);

  Rng rng(derive_seed(sc.seed, 0));
  const TensorBuffer noise = flow::sample_noise(cfg.sampler.n_samples, backbone.dim(), rng);
  const auto result = solvers::solve(sc, backbone, side ? &*side : nullptr, noise);

  std::vector<std::string> header{"sample_id"};
  for (auto& c : state_columns(backbone.dim())) header.push_back(c);
  CsvWriter samples(header);
  for (std::size_t r = 0; r < result.final_state.rows(); ++r) {
    samples.cell(static_cast<std::uint64_t>(r));
    for (std::size_t k = 0; k < backbone.dim(); ++k) samples.cell(result.final_state(r, k));
    samples.end_row();
  }

  header = {"run_id", "step", "t"};
  for (auto& c : state_columns(backbone.dim())) header.push_back(c);
  header.push_back("nfe_so_far");
  CsvWriter traj(header);
  const std::size_t runs = std::min(cfg.sampler.trajectory_runs, noise.rows());
  for (std::size_t r = 0; r < runs; ++r) {
    for (std::size_t s = 0; s < result.trajectory.size(); ++s) {
      const auto& pt = result.trajectory[s];
      traj.cell(static_cast<std::uint64_t>(r)).cell(static_cast<std::uint64_t>(s)).cell(pt.t);
      for (std::size_t k = 0; k < backbone.dim(); ++k) traj.cell(pt.states(r, k));
      traj.cell(pt.nfe_so_far).end_row();
    }
  }

  const Json report = {{"solver", std::string(solvers::to_string(sc.solver))},
                       {"intervals", sc.intervals},
                       {"n_samples", cfg.sampler.n_samples},
                       {"nfe_per_sample", result.nfe},
                       {"expected_nfe_per_sample", solvers::expected_nfe(sc.solver, sc.intervals)},
                       {"sidenet_batches", result.sidenet_batches}};

  Manifest manifest("sample", ctx.out);
  manifest.set_config(cfg);
  manifest.add_input("backbone", backbone_path);
  if (side) manifest.add_input("sidenet", cfg.sidenet_checkpoint);
  manifest.add_output("samples.csv", samples.str());
  manifest.add_output("trajectory.csv", traj.str());
  manifest.add_output("nfe_report.json", report.dump(2) + "\n");
  manifest.write();
  log << "sample: " << solvers::to_string(sc.solver) << " N=" << sc.intervals << ", "
      << cfg.sampler.n_samples << " samples, NFE per sample " << result.nfe << '\n';
}

// --- bench -------------------------------------------------------------------

void cmd_bench(const CommandOptions& options, std::ostream& log) {
  Context ctx = load_context(options);
  RunConfig& cfg = ctx.config;
  if (options.seed) cfg.sampler.config.seed = *options.seed;
  if (options.nfe) throw ConfigError("--nfe does not apply to bench; set bench.intervals");
  if (options.solver) {
    try {
      cfg.bench.solvers = {solvers::parse_solver_kind(*options.solver)};
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  const auto& bench = cfg.bench;
  if (bench.n_samples == 0 || bench.n_reference == 0 || bench.projections == 0) {
    throw ConfigError("config: bench sample counts and projections must be positive");
  }
  bool needs_sidenet = false;
  for (auto s : bench.solvers) needs_sidenet |= s == solvers::SolverKind::SingleAnchor ||
                                                s == solvers::SolverKind::BiAnchor;

  const fs::path backbone_path =
      resolve_checkpoint(options.backbone, cfg.backbone_checkpoint, ctx.out, "backbone.json");
  cfg.backbone_checkpoint = backbone_path.string();
  std::optional<sidenet::SideNet> side;
  if (needs_sidenet) {
    const fs::path p =
        resolve_checkpoint(options.sidenet, cfg.sidenet_checkpoint, ctx.out, "sidenet.json");
    cfg.sidenet_checkpoint = p.string();
    side.emplace(load_sidenet(p));
  }
  const flow::LearnedField backbone = load_backbone(backbone_path);

  const TensorBuffer reference =
      data::sample_dataset(cfg.dataset, bench.n_reference, bench.data_seed).points;
  Rng rng(derive_seed(cfg.sampler.config.seed, 1));
  const TensorBuffer noise = flow::sample_noise(bench.n_samples, backbone.dim(), rng);

  auto run = [&](solvers::SolverKind kind, std::size_t n) {
    solvers::SamplerConfig sc = cfg.sampler.config;
    sc.solver = kind;
    sc.intervals = n;
    try {
      sc.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return solvers::solve(sc, backbone, side ? &*side : nullptr, noise);
  };

  CsvWriter metrics({"solver", "N", "nfe", "sliced_w", "energy_dist", "wall_ms"});
  Json summary = Json::array();
  for (auto kind : bench.solvers) {
    for (std::size_t n : bench.intervals) {
      const auto start = std::chrono::steady_clock::now();
      const auto result = run(kind, n);
      const auto stop = std::chrono::steady_clock::now();
      const double sw =
          data::sliced_wasserstein(result.final_state, reference, bench.projections,
                                   bench.metric_seed);
      const double ed = data::energy_distance(result.final_state, reference);
      const double ms = std::chrono::duration<double, std::milli>(stop - start).count();
      metrics.cell(std::string(solvers::to_string(kind)))
          .cell(static_cast<std::uint64_t>(n))
          .cell(result.nfe)
          .cell(sw)
          .cell(ed)
          .cell(std::round(ms * 1000.0) / 1000.0)
          .end_row();
      log << "  " << std::left << std::setw(14) << solvers::to_string(kind) << " N=" << std::setw(3)
          << n << " sliced_w=" << format_double(sw) << '\n';
    }
  }

  CsvWriter ref({"row", "solver", "N", "nfe", "sliced_w", "energy_dist"});
  {
    const auto result = run(solvers::SolverKind::Euler, bench.reference_intervals);
    ref.cell(std::string("reference"))
        .cell(std::string("euler"))
        .cell(static_cast<std::uint64_t>(bench.reference_intervals))
        .cell(result.nfe)
        .cell(data::sliced_wasserstein(result.final_state, reference, bench.projections,
                                       bench.metric_seed))
        .cell(data::energy_distance(result.final_state, reference))
        .end_row();
    // Finite-sample floor: a fresh data draw against the reference set.
    const TensorBuffer fresh =
        data::sample_dataset(cfg.dataset, bench.n_samples, derive_seed(bench.data_seed, 1)).points;
    ref.cell(std::string("data_floor"))
        .cell(std::string("none"))
        .cell(std::uint64_t{0})
        .cell(std::uint64_t{0})
        .cell(data::sliced_wasserstein(fresh, reference, bench.projections, bench.metric_seed))
        .cell(data::energy_distance(fresh, reference))
        .end_row();
  }

  Manifest manifest("bench", ctx.out);
  manifest.set_config(cfg);
  manifest.add_input("backbone", backbone_path);
  if (side) manifest.add_input("sidenet", cfg.sidenet_checkpoint);
  // metrics.csv carries wall-clock timings, so its checksum is informational.
  manifest.add_output("metrics.csv", metrics.str());
  manifest.add_output("bench_reference.csv", ref.str());
  manifest.write();
  log << "bench: " << bench.solvers.size() * bench.intervals.size() << " rows -> "
      << (ctx.out / "metrics.csv").string() << '\n';
}

// --- verify ------------------------------------------------------------------

namespace {

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

VerifyCheck range_check(std::string claim, double value, double lo, double hi) {
  VerifyCheck c;
  c.claim = std::move(claim);
  c.measured = fmt(value);
  c.bound = "[" + fmt(lo) + ", " + fmt(hi) + "]";
  c.passed = std::isfinite(value) && value >= lo && value <= hi;
  return c;
}

double max_relative_gradient_error(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> width(2, 5);
  std::vector<std::size_t> dims{width(rng), width(rng), width(rng), width(rng)};
  nnet::MlpModel model = nnet::mlp_init(dims, derive_seed(seed, 1));
  for (auto& layer : model.layers) {
    for (auto& b : layer.bias.values()) b = 0.2 * standard_normal(rng);
  }
  const std::size_t batch = 3;
  TensorBuffer inputs = TensorBuffer::matrix(batch, dims.front());
  TensorBuffer targets = TensorBuffer::matrix(batch, dims.back());
  for (auto& x : inputs.values()) x = standard_normal(rng);
  for (auto& y : targets.values()) y = standard_normal(rng);

  const auto analytic = nnet::grad_mse(model, inputs, targets);
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    for (int which = 0; which < 2; ++which) {
      auto& param = which == 0 ? model.layers[l].weight : model.layers[l].bias;
      const auto& grad = which == 0 ? analytic.grads[l].weight : analytic.grads[l].bias;
      for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + eps;
        const double up = nnet::grad_mse(model, inputs, targets).loss;
        param[i] = saved - eps;
        const double down = nnet::grad_mse(model, inputs, targets).loss;
        param[i] = saved;
        const double fd = (up - down) / (2 * eps);
        const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
        worst = std::max(worst, std::abs(fd - grad[i]) / scale);
      }
    }
  }
  return worst;
}

}  // namespace

std::vector<VerifyCheck> run_verify_checks(const std::optional<std::string>& fault) {
  using quadrature::QuadratureKind;
  if (fault && *fault != "quadrature-weights") {
    throw ConfigError("unknown fault '" + *fault + "'");
  }
  std::vector<VerifyCheck> checks;

  // Quadrature exactness.
  std::vector<quadrature::QuadratureRule> rules{quadrature::make_rule(QuadratureKind::GaussLobatto4),
                                                quadrature::make_rule(QuadratureKind::GaussLegendre3),
                                                quadrature::make_rule(QuadratureKind::Simpson3)};
  if (fault) {
    for (auto& r : rules) r.weights[1] += 1e-3;
  }
  for (const auto& row : analysis::quadrature_order_table(rules)) {
    VerifyCheck c;
    c.claim = "quadrature " + std::string(quadrature::to_string(row.kind)) +
              " integrates monomials exactly";
    c.measured = "degree " + std::to_string(row.measured_degree);
    c.bound = "degree >= " + std::to_string(row.declared_degree);
    c.passed = row.measured_degree >= row.declared_degree;
    checks.push_back(c);
  }

  // Global order on v = cos t.
  const auto cos_field = flow::AnalyticField::time_only(flow::TimeProfile::cosine());
  const analysis::OracleSideNet oracle(cos_field);
  const std::vector<std::size_t> coarse{4, 8, 16, 32, 64};
  const std::vector<std::size_t> fine{2, 3, 4, 6, 8};
  const struct {
    solvers::SolverKind kind;
    const std::vector<std::size_t>* grid;
    double lo, hi;
  } orders[] = {{solvers::SolverKind::Euler, &coarse, 0.85, 1.15},
                {solvers::SolverKind::Heun, &coarse, 1.85, 2.15},
                {solvers::SolverKind::BiAnchor, &fine, 5.5, 1e9}};
  for (const auto& o : orders) {
    solvers::SamplerConfig sc;
    sc.solver = o.kind;
    const auto report = analysis::fit_order(sc, cos_field, &oracle, *o.grid);
    VerifyCheck c = range_check("global order of " + report.solver + " on cos t", report.slope,
                                o.lo, o.hi);
    if (o.hi > 1e8) c.bound = ">= " + fmt(o.lo);
    c.measured += " (R^2 " + fmt(report.r_squared) + ")";
    c.passed = c.passed && report.fit_ok();
    checks.push_back(c);
  }

  // Local error of one single-anchor interval and the two-anchor ratio.
  const auto linear = flow::AnalyticField::linear_state({-1.0}, {1.0});
  const analysis::DriftSideNet drift(linear);
  const std::vector<double> h_grid{0.025, 0.05, 0.1, 0.2};
  const std::vector<double> x_anchor{0.0};
  const auto lte = analysis::single_anchor_lte_scan(linear, drift, h_grid, x_anchor, 0.6);
  checks.push_back(range_check("single-anchor local error grows quadratically in h", lte.slope,
                               1.8, 2.2));
  const auto ratios = analysis::anchor_error_ratio(linear, drift, h_grid, x_anchor, 0.6);
  for (const auto& p : ratios) {
    checks.push_back(range_check("second anchor halves integrated velocity error (h=" + fmt(p.h) +
                                     ")",
                                 p.ratio.value_or(std::nan("")), 1.6, 2.4));
  }

  // NFE accounting.
  {
    bool ok = true;
    std::string measured;
    const TensorBuffer x1 = TensorBuffer::matrix(4, 1);
    for (std::size_t n : {3, 5, 7, 10, 15}) {
      const auto ba = solvers::ba_solve(cos_field, oracle, x1, n,
                                        quadrature::make_rule(QuadratureKind::GaussLobatto4));
      const auto heun = solvers::heun_solve(cos_field, x1, n);
      ok = ok && ba.nfe == n && heun.nfe == 2 * n;
      measured += (measured.empty() ? "" : " ") + std::to_string(ba.nfe) + "/" +
                  std::to_string(heun.nfe);
    }
    checks.push_back({"bi-anchor uses N backbone calls, Heun 2N (N=3,5,7,10,15)", measured,
                      "N/2N", ok});
  }
  {
    sidenet::ChainTrainConfig tc;
    tc.chain_length = 8;
    tc.h_min = 0.01;
    tc.h_max = 0.04;
    const auto side = sidenet::SideNet::create(1, {{8}, 2}, 7);
    Rng data_rng(11);
    sidenet::TrainBatch batch{flow::sample_noise(16, 1, data_rng),
                              flow::sample_noise(16, 1, data_rng)};
    std::uint64_t seed = 0;
    sidenet::ChainStepResult step;
    std::uint64_t calls = 0;
    do {
      Rng rng(seed++);
      flow::CountedField counted(cos_field);
      step = sidenet::chain_train_step(counted, side, batch, tc, rng);
      calls = counted.nfe();
    } while (step.completed_links < tc.chain_length);
    checks.push_back({"chain of 8 links uses 9 backbone calls", std::to_string(calls), "9",
                      calls == 9});
  }

  // Structural identities.
  {
    auto side = sidenet::SideNet::create(2, {{16, 16}, 4}, 3);
    for (auto& w : side.mutable_model().layers.back().weight.values()) w = 0.5;
    Rng rng(5);
    const TensorBuffer x = flow::sample_noise(6, 2, rng);
    const TensorBuffer v = flow::sample_noise(6, 2, rng);
    const std::vector<double> zero{0.0};
    const auto pred = sidenet::sidenet_predict(side, x, v, 0.4, zero);
    checks.push_back({"zero offset reproduces the anchor velocity", pred[0] == v ? "equal" : "differs",
                      "bitwise", pred[0] == v});

    const auto zeros = sidenet::SideNet::zeros(2, {{16, 16}, 4});
    const auto lin2 = flow::AnalyticField::linear_state({-0.7, 0.3}, {0.2, 1.0});
    const auto sa = solvers::single_anchor_solve(
        lin2, zeros, x, 7, quadrature::make_rule(QuadratureKind::GaussLobatto4));
    const auto eu = solvers::euler_solve(lin2, x, 7);
    const bool same = sa.final_state == eu.final_state;
    checks.push_back({"zero-parameter SideNet single-anchor equals Euler",
                      same ? "equal" : "differs", "bitwise", same});
  }

  // Backpropagation against central differences.
  {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) worst = std::max(worst, max_relative_gradient_error(s));
    VerifyCheck c;
    c.claim = "backprop matches finite differences (20 models)";
    c.measured = fmt(worst, 3);
    c.bound = "<= 1e-05";
    c.passed = worst <= 1e-5;
    checks.push_back(c);
  }
  return checks;
}

bool cmd_verify(const CommandOptions& options, std::ostream& log) {
  const auto checks = run_verify_checks(options.inject_fault);
  bool all = true;
  CsvWriter csv({"claim", "measured", "bound", "status"});
  std::ostringstream text;
  for (const auto& c : checks) {
    all = all && c.passed;
    text << (c.passed ? "PASS" : "FAIL") << "  " << c.claim << ": " << c.measured << " (bound "
         << c.bound << ")\n";
    csv.cell("\"" + c.claim + "\"").cell(c.measured).cell("\"" + c.bound + "\"")
        .cell(std::string(c.passed ? "pass" : "fail"))
        .end_row();
  }
  text << (all ? "verify: all checks passed\n" : "verify: CHECKS FAILED\n");
  log << text.str();
  if (options.out_given) {
    fs::create_directories(options.out);
    Manifest manifest("verify", options.out);
    manifest.add_output("verify_report.txt", text.str());
    manifest.add_output("verify_report.csv", csv.str());
    manifest.write();
  }
  return all;
}

// --- dispatch ----------------------------------------------------------------

int run_command(const std::string& name, const CommandOptions& options, std::ostream& log,
                std::ostream& err) {
  try {
    if (name == "train-backbone") {
      cmd_train_backbone(options, log);
    } else if (name == "train-sidenet") {
      cmd_train_sidenet(options, log);
    } else if (name == "sample") {
      cmd_sample(options, log);
    } else if (name == "bench") {
      cmd_bench(options, log);
    } else if (name == "verify") {
      if (!cmd_verify(options, log)) {
        err << "error: verification failed\n";
        return kExitCheckFailed;
      }
    } else {
      err << "error: unknown command '" << name << "'\n";
      return kExitConfig;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nnet::CheckpointError& e) {
    err << "error: checkpoint: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace bas::cli
