#include "bas/solvers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bas::solvers {

std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::Euler: return "euler";
    case SolverKind::Heun: return "heun";
    case SolverKind::SingleAnchor: return "single_anchor";
    case SolverKind::BiAnchor: return "bi_anchor";
  }
  return "unknown";
}

SolverKind parse_solver_kind(std::string_view name) {
  for (auto kind : {SolverKind::Euler, SolverKind::Heun, SolverKind::SingleAnchor,
                    SolverKind::BiAnchor}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown solver '" + std::string(name) + "'");
}

std::string_view to_string(AnchorMode mode) {
  return mode == AnchorMode::Single ? "single" : "bi";
}

AnchorMode parse_anchor_mode(std::string_view name) {
  if (name == "single") return AnchorMode::Single;
  if (name == "bi") return AnchorMode::Bi;
  throw std::invalid_argument("unknown anchor mode '" + std::string(name) + "'");
}

AnchorMode SamplerConfig::anchor_mode() const {
  return solver == SolverKind::SingleAnchor ? AnchorMode::Single : AnchorMode::Bi;
}

bool SamplerConfig::uses_sidenet() const {
  return solver == SolverKind::SingleAnchor || solver == SolverKind::BiAnchor;
}

void SamplerConfig::validate() const {
  if (intervals < 1) throw std::invalid_argument("SamplerConfig: need at least one interval");
  if (!uses_sidenet()) return;
  const auto r = quadrature::make_rule(rule);
  if (r.interior_count() != intermediate) {
    throw std::invalid_argument("SamplerConfig: rule " + std::string(quadrature::to_string(rule)) +
                                " has " + std::to_string(r.interior_count()) +
                                " intermediate nodes, config asks for " +
                                std::to_string(intermediate));
  }
  if (solver == SolverKind::BiAnchor && !r.includes_endpoints) {
    throw std::invalid_argument("SamplerConfig: bi-anchor sampling needs a rule with endpoints");
  }
}

std::uint64_t expected_nfe(SolverKind solver, std::size_t intervals) {
  return solver == SolverKind::Heun ? 2 * intervals : intervals;
}

namespace {

double grid_time(std::size_t step, std::size_t intervals) {
  return static_cast<double>(intervals - step) / static_cast<double>(intervals);
}

void subtract_in_place(TensorBuffer& x, const TensorBuffer& delta) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] -= delta[i];
}

void check_start(const flow::VelocityField& field, const TensorBuffer& x1, std::size_t intervals) {
  if (intervals < 1) throw std::invalid_argument("solver: need at least one interval");
  if (x1.rank() != 2 || x1.cols() != field.dim()) {
    throw std::invalid_argument("solver: initial state width does not match field");
  }
}

}  // namespace

SamplingResult euler_solve(const flow::VelocityField& field, const TensorBuffer& x1,
                           std::size_t intervals) {
  check_start(field, x1, intervals);
  flow::CountedField f(field);
  const double h = 1.0 / static_cast<double>(intervals);
  SamplingResult out;
  TensorBuffer x = x1;
  out.trajectory.push_back({1.0, x, 0});
  for (std::size_t i = 0; i < intervals; ++i) {
    const TensorBuffer v = f(x, grid_time(i, intervals));
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = x[k] - h * v[k];
    out.trajectory.push_back({grid_time(i + 1, intervals), x, f.nfe()});
  }
  out.final_state = std::move(x);
  out.nfe = f.nfe();
  return out;
}

SamplingResult heun_solve(const flow::VelocityField& field, const TensorBuffer& x1,
                          std::size_t intervals) {
  check_start(field, x1, intervals);
  flow::CountedField f(field);
  const double h = 1.0 / static_cast<double>(intervals);
  SamplingResult out;
  TensorBuffer x = x1;
  out.trajectory.push_back({1.0, x, 0});
  for (std::size_t i = 0; i < intervals; ++i) {
    const double t = grid_time(i, intervals);
    const double t_next = grid_time(i + 1, intervals);
    const TensorBuffer v = f(x, t);
    TensorBuffer x_euler(x.shape());
    for (std::size_t k = 0; k < x.size(); ++k) x_euler[k] = x[k] - h * v[k];
    const TensorBuffer v_end = f(x_euler, t_next);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = x[k] - 0.5 * h * (v[k] + v_end[k]);
    out.trajectory.push_back({t_next, x, f.nfe()});
  }
  out.final_state = std::move(x);
  out.nfe = f.nfe();
  return out;
}

TensorBuffer single_anchor_update(const sidenet::DeviationModel& sidenet, const TensorBuffer& x,
                                  const TensorBuffer& v, double t, double h,
                                  const quadrature::QuadratureRule& rule) {
  std::vector<double> offsets;
  offsets.reserve(rule.size());
  for (double u : rule.nodes) offsets.push_back(-h * u);
  const std::vector<TensorBuffer> dev = sidenet.deviation(x, v, t, offsets);

  // Integral of v_t + dt * S over the interval: h v + h sum_i w_i dt_i S_i.
  TensorBuffer correction(x.shape());
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const double coeff = rule.weights[j] * offsets[j];
    for (std::size_t k = 0; k < correction.size(); ++k) correction[k] += coeff * dev[j][k];
  }
  TensorBuffer next(x.shape());
  for (std::size_t k = 0; k < x.size(); ++k) next[k] = x[k] - (h * v[k] + h * correction[k]);
  return next;
}

SamplingResult single_anchor_solve(const flow::VelocityField& field,
                                   const sidenet::DeviationModel& sidenet, const TensorBuffer& x1,
                                   std::size_t intervals, const quadrature::QuadratureRule& rule) {
  check_start(field, x1, intervals);
  flow::CountedField f(field);
  const double h = 1.0 / static_cast<double>(intervals);
  SamplingResult out;
  TensorBuffer x = x1;
  out.trajectory.push_back({1.0, x, 0});
  for (std::size_t i = 0; i < intervals; ++i) {
    const double t = grid_time(i, intervals);
    const TensorBuffer v = f(x, t);
    x = single_anchor_update(sidenet, x, v, t, h, rule);
    ++out.sidenet_batches;
    out.trajectory.push_back({grid_time(i + 1, intervals), x, f.nfe()});
  }
  out.final_state = std::move(x);
  out.nfe = f.nfe();
  return out;
}

NodePartition partition_nodes(std::span<const double> node_times, double t, double h) {
  const double end = t - h;
  const double tol = 1e-14 * std::max(1.0, std::abs(t));
  NodePartition part;
  for (std::size_t i = 0; i < node_times.size(); ++i) {
    const double tau = node_times[i];
    if (std::abs(tau - t) <= tol || std::abs(tau - end) <= tol) continue;  // anchors
    if (std::abs(tau - end) < std::abs(tau - t)) {
      part.backward.push_back(i);
    } else {
      part.forward.push_back(i);
    }
  }
  return part;
}

SamplingResult ba_solve(const flow::VelocityField& field, const sidenet::DeviationModel& sidenet,
                        const TensorBuffer& x1, std::size_t intervals,
                        const quadrature::QuadratureRule& rule) {
  check_start(field, x1, intervals);
  if (!rule.includes_endpoints) {
    throw std::invalid_argument("ba_solve: quadrature rule must include both endpoints");
  }
  const std::size_t n_nodes = rule.size();
  const std::size_t last = n_nodes - 1;
  const double h = 1.0 / static_cast<double>(intervals);

  // Offsets are identical for every interval because h is uniform.
  std::vector<double> probe_offsets;
  for (std::size_t j = 1; j < n_nodes; ++j) probe_offsets.push_back(-h * rule.nodes[j]);
  const NodePartition part = partition_nodes(quadrature::map_nodes(rule, 1.0, h), 1.0, h);
  std::vector<double> lookback_offsets;
  for (std::size_t j : part.backward) lookback_offsets.push_back(h * (1.0 - rule.nodes[j]));

  flow::CountedField f(field);
  SamplingResult out;
  TensorBuffer x = x1;
  TensorBuffer v = f(x, 1.0);
  out.trajectory.push_back({1.0, x, f.nfe()});

  std::vector<TensorBuffer> nodes(n_nodes);
  for (std::size_t i = 0; i < intervals; ++i) {
    const double t = grid_time(i, intervals);
    const double t_next = grid_time(i + 1, intervals);

    // Forward probe from the start anchor; the start node is the anchor itself.
    std::vector<TensorBuffer> probe = sidenet::sidenet_predict(sidenet, x, v, t, probe_offsets);
    ++out.sidenet_batches;
    nodes[0] = v;
    for (std::size_t j = 1; j < n_nodes; ++j) nodes[j] = std::move(probe[j - 1]);
    TensorBuffer x_pred = x;
    subtract_in_place(x_pred, quadrature::apply(rule, nodes, h));

    if (i + 1 == intervals) {
      x = std::move(x_pred);
      out.trajectory.push_back({t_next, x, f.nfe()});
      break;
    }

    // Terminal anchor at the probed state, then lookback for terminal-side nodes.
    TensorBuffer v_end = f(x_pred, t_next);
    if (!lookback_offsets.empty()) {
      std::vector<TensorBuffer> refined =
          sidenet::sidenet_predict(sidenet, x_pred, v_end, t_next, lookback_offsets);
      ++out.sidenet_batches;
      for (std::size_t b = 0; b < part.backward.size(); ++b) {
        nodes[part.backward[b]] = std::move(refined[b]);
      }
    }
    nodes[last] = v_end;
    subtract_in_place(x, quadrature::apply(rule, nodes, h));
    v = std::move(v_end);
    out.trajectory.push_back({t_next, x, f.nfe()});
  }
  out.final_state = std::move(x);
  out.nfe = f.nfe();
  return out;
}

SamplingResult solve(const SamplerConfig& config, const flow::VelocityField& field,
                     const sidenet::DeviationModel* sidenet, const TensorBuffer& x1) {
  config.validate();
  if (config.uses_sidenet() && sidenet == nullptr) {
    throw std::invalid_argument("solve: solver '" + std::string(to_string(config.solver)) +
                                "' needs a SideNet");
  }
  SamplingResult result;
  switch (config.solver) {
    case SolverKind::Euler: result = euler_solve(field, x1, config.intervals); break;
    case SolverKind::Heun: result = heun_solve(field, x1, config.intervals); break;
    case SolverKind::SingleAnchor:
      result = single_anchor_solve(field, *sidenet, x1, config.intervals,
                                   quadrature::make_rule(config.rule));
      break;
    case SolverKind::BiAnchor:
      result = ba_solve(field, *sidenet, x1, config.intervals, quadrature::make_rule(config.rule));
      break;
  }
  if (result.nfe != expected_nfe(config.solver, config.intervals)) {
    throw std::logic_error("solve: NFE accounting mismatch");
  }
  return result;
}

}  // namespace bas::solvers
