#include "bas/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bas::analysis {

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double norm2_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double norm2(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s);
}

}  // namespace

// --- oracle SideNets ---------------------------------------------------------

OracleSideNet::OracleSideNet(const flow::AnalyticField& field) : field_(field) {
  if (!field.is_time_only()) {
    throw std::invalid_argument("OracleSideNet: requires a time-only field");
  }
}

std::vector<TensorBuffer> OracleSideNet::deviation(const TensorBuffer& x, const TensorBuffer&,
                                                   double t,
                                                   std::span<const double> offsets) const {
  const auto& p = field_.profile();
  const double v_t = p.value(t);
  std::vector<TensorBuffer> out;
  out.reserve(offsets.size());
  for (double dt : offsets) {
    const double s = dt == 0.0 ? p.derivative(t) : (p.value(t + dt) - v_t) / dt;
    out.emplace_back(x.shape(), s);
  }
  return out;
}

DriftSideNet::DriftSideNet(const flow::AnalyticField& field) : field_(field) {}

std::vector<TensorBuffer> DriftSideNet::deviation(const TensorBuffer& x, const TensorBuffer& v,
                                                  double t,
                                                  std::span<const double> offsets) const {
  std::vector<TensorBuffer> out;
  out.reserve(offsets.size());
  for (double dt : offsets) {
    if (dt == 0.0) {
      out.emplace_back(x.shape(), field_.profile().derivative(t));
      continue;
    }
    // v(x_anchor, t + dt) with the anchor state held fixed.
    TensorBuffer frozen = field_.evaluate(x, t + dt);
    for (std::size_t i = 0; i < frozen.size(); ++i) frozen[i] = (frozen[i] - v[i]) / dt;
    out.push_back(std::move(frozen));
  }
  return out;
}

// --- fitting -----------------------------------------------------------------

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("fit_loglog: need at least two paired points");
  }
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    const double dy = std::log(y[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

ConvergenceReport fit_order(const solvers::SamplerConfig& config, const flow::AnalyticField& field,
                            const sidenet::DeviationModel* sidenet,
                            std::span<const std::size_t> n_grid, std::span<const double> x1) {
  std::vector<double> start(field.dim(), 0.0);
  if (!x1.empty()) start.assign(x1.begin(), x1.end());
  const std::vector<double> exact = flow::exact_solution(field, start, 0.0);

  ConvergenceReport report;
  report.solver = std::string(solvers::to_string(config.solver));
  if (config.uses_sidenet()) {
    report.solver += "/" + std::string(quadrature::to_string(config.rule));
  }
  report.field = field.describe();

  std::vector<double> hs, errs;
  for (std::size_t n : n_grid) {
    solvers::SamplerConfig run = config;
    run.intervals = n;
    const auto result = solvers::solve(run, field, sidenet, TensorBuffer::row_vector(start));
    GridPoint p;
    p.intervals = n;
    p.h = 1.0 / static_cast<double>(n);
    p.error = max_abs_diff(result.final_state.values(), exact);
    p.used_in_fit = p.error > ConvergenceReport::kErrorFloor;
    if (p.used_in_fit) {
      hs.push_back(p.h);
      errs.push_back(p.error);
    }
    report.grid.push_back(p);
  }
  std::sort(report.grid.begin(), report.grid.end(),
            [](const GridPoint& a, const GridPoint& b) { return a.intervals < b.intervals; });
  if (hs.size() < 3) {
    throw std::runtime_error("fit_order: fewer than three grid points above the error floor for " +
                             report.solver);
  }
  const LogLogFit fit = fit_loglog(hs, errs);
  report.slope = fit.slope;
  report.r_squared = fit.r_squared;
  return report;
}

LteScan single_anchor_lte_scan(const flow::AnalyticField& field,
                               const sidenet::DeviationModel& drift_sidenet,
                               std::span<const double> h_grid, std::span<const double> x_anchor,
                               double t_anchor, const quadrature::QuadratureRule& rule) {
  LteScan scan;
  scan.lipschitz = field.lipschitz();
  const std::vector<double> v = field.velocity(x_anchor, t_anchor);
  scan.speed = norm2(v);
  const TensorBuffer x = TensorBuffer::row_vector(x_anchor);
  const TensorBuffer vt = TensorBuffer::row_vector(v);

  std::vector<double> hs, errs;
  for (double h : h_grid) {
    if (!(h > 0.0) || t_anchor - h < 0.0) {
      throw std::invalid_argument("single_anchor_lte_scan: interval leaves [0, 1]");
    }
    const TensorBuffer approx = solvers::single_anchor_update(drift_sidenet, x, vt, t_anchor, h, rule);
    const std::vector<double> exact = field.solve(x_anchor, t_anchor, t_anchor - h);
    LtePoint p{h, norm2_diff(approx.values(), exact),
               0.5 * scan.lipschitz * scan.speed * h * h};
    if (p.local_error > ConvergenceReport::kErrorFloor) {
      hs.push_back(h);
      errs.push_back(p.local_error);
    }
    scan.points.push_back(p);
  }
  if (hs.size() >= 2) {
    const LogLogFit fit = fit_loglog(hs, errs);
    scan.slope = fit.slope;
    scan.r_squared = fit.r_squared;
  } else {
    scan.slope = std::numeric_limits<double>::quiet_NaN();
    scan.r_squared = std::numeric_limits<double>::quiet_NaN();
  }
  return scan;
}

namespace {

// Integral over [lo, hi] of |v(x(tau), tau) - v_hat(tau)|, where x(tau) is the
// exact trajectory through (x_traj, t_traj) and v_hat is the SideNet
// prediction from the anchor (x_a, t_a). Composite 3-point Gauss-Legendre;
// all offsets go through the SideNet as one batch.
double velocity_error_integral(const flow::AnalyticField& field,
                               const sidenet::DeviationModel& sidenet,
                               std::span<const double> x_traj, double t_traj,
                               std::span<const double> x_a, double t_a, double lo, double hi) {
  constexpr int kPanels = 64;
  const auto rule = quadrature::make_rule(quadrature::QuadratureKind::GaussLegendre3);
  const double width = (hi - lo) / kPanels;
  std::vector<double> taus, weights;
  for (int p = 0; p < kPanels; ++p) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      taus.push_back(lo + width * (p + rule.nodes[q]));
      weights.push_back(width * rule.weights[q]);
    }
  }
  std::vector<double> offsets;
  offsets.reserve(taus.size());
  for (double tau : taus) offsets.push_back(tau - t_a);

  const TensorBuffer x = TensorBuffer::row_vector(x_a);
  const TensorBuffer v = TensorBuffer::row_vector(field.velocity(x_a, t_a));
  const auto predicted = sidenet::sidenet_predict(sidenet, x, v, t_a, offsets);

  double total = 0.0;
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const std::vector<double> x_tau = field.solve(x_traj, t_traj, taus[k]);
    total += weights[k] * norm2_diff(field.velocity(x_tau, taus[k]), predicted[k].values());
  }
  return total;
}

}  // namespace

std::vector<AnchorRatioPoint> anchor_error_ratio(const flow::AnalyticField& field,
                                                 const sidenet::DeviationModel& drift_sidenet,
                                                 std::span<const double> h_grid,
                                                 std::span<const double> x_anchor,
                                                 double t_anchor) {
  constexpr double kFloor = 1e-14;
  std::vector<AnchorRatioPoint> out;
  for (double h : h_grid) {
    if (!(h > 0.0) || t_anchor - h < 0.0) {
      throw std::invalid_argument("anchor_error_ratio: interval leaves [0, 1]");
    }
    const double t_end = t_anchor - h;
    const double t_mid = t_anchor - 0.5 * h;
    const std::vector<double> x_end = field.solve(x_anchor, t_anchor, t_end);

    AnchorRatioPoint p;
    p.h = h;
    p.single_anchor_error = velocity_error_integral(field, drift_sidenet, x_anchor, t_anchor,
                                                    x_anchor, t_anchor, t_end, t_anchor);
    p.bi_anchor_error = velocity_error_integral(field, drift_sidenet, x_anchor, t_anchor,
                                                x_anchor, t_anchor, t_mid, t_anchor) +
                        velocity_error_integral(field, drift_sidenet, x_anchor, t_anchor, x_end,
                                                t_end, t_end, t_mid);
    if (p.single_anchor_error > kFloor && p.bi_anchor_error > kFloor) {
      p.ratio = p.single_anchor_error / p.bi_anchor_error;
    }
    out.push_back(p);
  }
  return out;
}

std::vector<QuadratureOrderRow> quadrature_order_table(
    std::span<const quadrature::QuadratureRule> rules) {
  std::vector<QuadratureOrderRow> rows;
  for (const auto& rule : rules) {
    QuadratureOrderRow row;
    row.kind = rule.kind;
    row.declared_degree = rule.exactness_degree;
    row.measured_degree = quadrature::exactness_check(rule);
    row.first_failing_degree = row.measured_degree + 1;
    double estimate = 0.0;
    for (std::size_t i = 0; i < rule.size(); ++i) {
      estimate += rule.weights[i] * std::pow(rule.nodes[i], row.first_failing_degree);
    }
    row.first_failing_error = std::abs(estimate - 1.0 / (row.first_failing_degree + 1));
    rows.push_back(row);
  }
  return rows;
}

std::vector<QuadratureOrderRow> quadrature_order_table() {
  using quadrature::QuadratureKind;
  const std::vector<quadrature::QuadratureRule> rules{
      quadrature::make_rule(QuadratureKind::GaussLobatto4),
      quadrature::make_rule(QuadratureKind::GaussLegendre3),
      quadrature::make_rule(QuadratureKind::Simpson3)};
  return quadrature_order_table(rules);
}

}  // namespace bas::analysis
