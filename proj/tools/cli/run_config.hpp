#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bas/data_metrics.hpp"
#include "bas/flow.hpp"
#include "bas/sidenet.hpp"
#include "bas/solvers.hpp"
#include "json.hpp"

namespace bas::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SamplerSection {
  solvers::SamplerConfig config;
  std::size_t n_samples = 2000;
  // Trajectories of the first `trajectory_runs` samples go to trajectory.csv.
  std::size_t trajectory_runs = 8;
};

struct BenchSection {
  std::vector<solvers::SolverKind> solvers = {
      solvers::SolverKind::Euler, solvers::SolverKind::Heun, solvers::SolverKind::SingleAnchor,
      solvers::SolverKind::BiAnchor};
  std::vector<std::size_t> intervals = {3, 5, 7, 10, 15};
  std::size_t reference_intervals = 100;
  std::size_t n_samples = 2000;
  std::size_t n_reference = 2000;
  std::size_t projections = 64;
  std::uint64_t data_seed = 0;
  std::uint64_t metric_seed = 0;
};

/// Fully resolved run configuration. Parsed from JSON; every seed must be
/// present in the file.
struct RunConfig {
  data::DatasetKind dataset = data::DatasetKind::GaussianRing8;
  std::size_t dim = 2;
  flow::BackboneTrainConfig backbone;
  sidenet::ChainTrainConfig sidenet;
  sidenet::SideNetArch sidenet_arch;
  SamplerSection sampler;
  BenchSection bench;
  std::string backbone_checkpoint;  // empty: <out>/backbone.json
  std::string sidenet_checkpoint;   // empty: <out>/sidenet.json
  std::filesystem::path output_directory = ".";
  std::vector<std::string> output_formats = {"csv"};

  static RunConfig from_json(const nlohmann::json& doc);
  /// Reads a config file, or the "config" block of a manifest.
  static RunConfig load(const std::filesystem::path& path);

  /// Canonical form; omits the output directory so manifests of re-runs into
  /// a different directory stay identical.
  nlohmann::json to_json() const;
};

}  // namespace bas::cli
