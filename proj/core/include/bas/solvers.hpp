#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "bas/flow.hpp"
#include "bas/quadrature.hpp"
#include "bas/sidenet.hpp"

namespace bas::solvers {

enum class SolverKind { Euler, Heun, SingleAnchor, BiAnchor };
enum class AnchorMode { Single, Bi };

std::string_view to_string(SolverKind kind);
SolverKind parse_solver_kind(std::string_view name);
std::string_view to_string(AnchorMode mode);
AnchorMode parse_anchor_mode(std::string_view name);

struct SamplerConfig {
  SolverKind solver = SolverKind::BiAnchor;
  std::size_t intervals = 5;
  quadrature::QuadratureKind rule = quadrature::QuadratureKind::GaussLobatto4;
  // Intermediate node count: must equal the rule's interior node count for
  // the anchor solvers. Ignored by Euler and Heun.
  std::size_t intermediate = 2;
  std::uint64_t seed = 0;

  AnchorMode anchor_mode() const;
  bool uses_sidenet() const;
  void validate() const;
};

/// Backbone evaluations per sample predicted for a run.
std::uint64_t expected_nfe(SolverKind solver, std::size_t intervals);

struct TrajectoryPoint {
  double t = 0.0;
  TensorBuffer states;
  std::uint64_t nfe_so_far = 0;
};

struct SamplingResult {
  TensorBuffer final_state;
  std::vector<TrajectoryPoint> trajectory;  // t = 1 first, t = 0 last
  std::uint64_t nfe = 0;
  std::uint64_t sidenet_batches = 0;
};

SamplingResult euler_solve(const flow::VelocityField& field, const TensorBuffer& x1,
                           std::size_t intervals);

SamplingResult heun_solve(const flow::VelocityField& field, const TensorBuffer& x1,
                          std::size_t intervals);

/// Every node velocity is predicted from the start anchor; one backbone call
/// per interval.
SamplingResult single_anchor_solve(const flow::VelocityField& field,
                                   const sidenet::DeviationModel& sidenet, const TensorBuffer& x1,
                                   std::size_t intervals, const quadrature::QuadratureRule& rule);

/// Interior-node indices of an interval split by proximity: a node goes to
/// the backward set iff it is strictly closer to t - h than to t.
struct NodePartition {
  std::vector<std::size_t> forward;
  std::vector<std::size_t> backward;
};

NodePartition partition_nodes(std::span<const double> node_times, double t, double h);

/// Bi-anchor sampling: forward probe from v_t, terminal anchor at the probed
/// state, lookback refinement of terminal-side nodes, fused quadrature update,
/// terminal anchor reused as the next start anchor. Exactly `intervals`
/// backbone calls. Throws std::invalid_argument for rules without endpoints.
SamplingResult ba_solve(const flow::VelocityField& field, const sidenet::DeviationModel& sidenet,
                        const TensorBuffer& x1, std::size_t intervals,
                        const quadrature::QuadratureRule& rule);

/// Dispatches on config.solver. `sidenet` may be null for Euler/Heun.
SamplingResult solve(const SamplerConfig& config, const flow::VelocityField& field,
                     const sidenet::DeviationModel* sidenet, const TensorBuffer& x1);

// Single-interval building blocks (no backbone calls).

/// x - (h v + sum_i w_i (tau_i - t) S(x, v, t, tau_i - t)).
TensorBuffer single_anchor_update(const sidenet::DeviationModel& sidenet, const TensorBuffer& x,
                                  const TensorBuffer& v, double t, double h,
                                  const quadrature::QuadratureRule& rule);

}  // namespace bas::solvers
