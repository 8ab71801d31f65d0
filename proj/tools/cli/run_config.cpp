#include "cli/run_config.hpp"

#include <fstream>

namespace bas::cli {

namespace {

using Json = nlohmann::json;

const Json& require(const Json& node, const char* key, const std::string& where) {
  if (!node.is_object() || !node.contains(key)) {
    throw ConfigError("config: missing key '" + where + "." + key + "'");
  }
  return node.at(key);
}

const Json& section(const Json& doc, const char* key, bool required) {
  static const Json kEmpty = Json::object();
  if (!doc.contains(key)) {
    if (required) throw ConfigError(std::string("config: missing section '") + key + "'");
    return kEmpty;
  }
  const Json& s = doc.at(key);
  if (!s.is_object()) throw ConfigError(std::string("config: section '") + key + "' is not an object");
  return s;
}

template <class T>
void read_opt(const Json& node, const char* key, T& out) {
  if (node.contains(key)) out = node.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig cfg;
  try {
    const Json& problem = section(doc, "problem", true);
    cfg.dataset = data::parse_dataset_kind(require(problem, "dataset", "problem").get<std::string>());
    read_opt(problem, "dim", cfg.dim);
    if (cfg.dim != 2) throw ConfigError("config: toy datasets are two-dimensional (problem.dim = 2)");

    const Json& bb = section(doc, "backbone", true);
    cfg.backbone.seed = require(bb, "seed", "backbone").get<std::uint64_t>();
    read_opt(bb, "hidden", cfg.backbone.hidden);
    read_opt(bb, "n_freq", cfg.backbone.n_freq);
    read_opt(bb, "batch_size", cfg.backbone.batch_size);
    read_opt(bb, "iterations", cfg.backbone.iterations);
    read_opt(bb, "learning_rate", cfg.backbone.learning_rate);

    const Json& sn = section(doc, "sidenet", true);
    cfg.sidenet.seed = require(sn, "seed", "sidenet").get<std::uint64_t>();
    read_opt(sn, "chain_length", cfg.sidenet.chain_length);
    read_opt(sn, "lambda_trunc", cfg.sidenet.lambda_trunc);
    read_opt(sn, "h_min", cfg.sidenet.h_min);
    read_opt(sn, "h_max", cfg.sidenet.h_max);
    if (sn.contains("rule")) {
      cfg.sidenet.rule = quadrature::parse_quadrature_kind(sn.at("rule").get<std::string>());
    }
    read_opt(sn, "batch_size", cfg.sidenet.batch_size);
    read_opt(sn, "iterations", cfg.sidenet.iterations);
    read_opt(sn, "learning_rate", cfg.sidenet.learning_rate);
    read_opt(sn, "lookback_weight", cfg.sidenet.lookback_weight);
    read_opt(sn, "hidden", cfg.sidenet_arch.hidden);
    read_opt(sn, "n_freq", cfg.sidenet_arch.n_freq);
    cfg.sidenet.validate();

    const Json& sm = section(doc, "sampler", true);
    cfg.sampler.config.seed = require(sm, "seed", "sampler").get<std::uint64_t>();
    if (sm.contains("solver")) {
      cfg.sampler.config.solver = solvers::parse_solver_kind(sm.at("solver").get<std::string>());
    }
    read_opt(sm, "intervals", cfg.sampler.config.intervals);
    if (sm.contains("rule")) {
      cfg.sampler.config.rule = quadrature::parse_quadrature_kind(sm.at("rule").get<std::string>());
    }
    read_opt(sm, "intermediate", cfg.sampler.config.intermediate);
    if (sm.contains("anchor_mode")) {
      const auto mode = solvers::parse_anchor_mode(sm.at("anchor_mode").get<std::string>());
      if (cfg.sampler.config.uses_sidenet() && mode != cfg.sampler.config.anchor_mode()) {
        throw ConfigError("config: sampler.anchor_mode contradicts sampler.solver");
      }
    }
    read_opt(sm, "n_samples", cfg.sampler.n_samples);
    read_opt(sm, "trajectory_runs", cfg.sampler.trajectory_runs);

    const Json& bench = section(doc, "bench", false);
    if (bench.contains("solvers")) {
      cfg.bench.solvers.clear();
      for (const auto& s : bench.at("solvers")) {
        cfg.bench.solvers.push_back(solvers::parse_solver_kind(s.get<std::string>()));
      }
    }
    read_opt(bench, "intervals", cfg.bench.intervals);
    read_opt(bench, "reference_intervals", cfg.bench.reference_intervals);
    read_opt(bench, "n_samples", cfg.bench.n_samples);
    read_opt(bench, "n_reference", cfg.bench.n_reference);
    read_opt(bench, "projections", cfg.bench.projections);
    read_opt(bench, "data_seed", cfg.bench.data_seed);
    read_opt(bench, "metric_seed", cfg.bench.metric_seed);

    const Json& ckpt = section(doc, "checkpoints", false);
    read_opt(ckpt, "backbone", cfg.backbone_checkpoint);
    read_opt(ckpt, "sidenet", cfg.sidenet_checkpoint);

    const Json& out = section(doc, "output", false);
    if (out.contains("directory")) cfg.output_directory = out.at("directory").get<std::string>();
    read_opt(out, "formats", cfg.output_formats);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  // Manifests carry the resolved config under "config".
  if (doc.is_object() && doc.contains("manifest_version") && doc.contains("config")) {
    return from_json(doc.at("config"));
  }
  return from_json(doc);
}

Json RunConfig::to_json() const {
  std::vector<std::string> bench_solvers;
  for (auto s : bench.solvers) bench_solvers.emplace_back(solvers::to_string(s));
  return Json{
      {"problem", {{"dataset", std::string(data::to_string(dataset))}, {"dim", dim}}},
      {"backbone",
       {{"seed", backbone.seed},
        {"hidden", backbone.hidden},
        {"n_freq", backbone.n_freq},
        {"batch_size", backbone.batch_size},
        {"iterations", backbone.iterations},
        {"learning_rate", backbone.learning_rate}}},
      {"sidenet",
       {{"seed", sidenet.seed},
        {"chain_length", sidenet.chain_length},
        {"lambda_trunc", sidenet.lambda_trunc},
        {"h_min", sidenet.h_min},
        {"h_max", sidenet.h_max},
        {"rule", std::string(quadrature::to_string(sidenet.rule))},
        {"batch_size", sidenet.batch_size},
        {"iterations", sidenet.iterations},
        {"learning_rate", sidenet.learning_rate},
        {"lookback_weight", sidenet.lookback_weight},
        {"hidden", sidenet_arch.hidden},
        {"n_freq", sidenet_arch.n_freq}}},
      {"sampler",
       {{"seed", sampler.config.seed},
        {"solver", std::string(solvers::to_string(sampler.config.solver))},
        {"intervals", sampler.config.intervals},
        {"rule", std::string(quadrature::to_string(sampler.config.rule))},
        {"intermediate", sampler.config.intermediate},
        {"anchor_mode", std::string(solvers::to_string(sampler.config.anchor_mode()))},
        {"n_samples", sampler.n_samples},
        {"trajectory_runs", sampler.trajectory_runs}}},
      {"bench",
       {{"solvers", bench_solvers},
        {"intervals", bench.intervals},
        {"reference_intervals", bench.reference_intervals},
        {"n_samples", bench.n_samples},
        {"n_reference", bench.n_reference},
        {"projections", bench.projections},
        {"data_seed", bench.data_seed},
        {"metric_seed", bench.metric_seed}}},
      {"checkpoints", {{"backbone", backbone_checkpoint}, {"sidenet", sidenet_checkpoint}}},
      {"output", {{"formats", output_formats}}},
  };
}

}  // namespace bas::cli
