#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bas/flow.hpp"
#include "bas/quadrature.hpp"
#include "bas/sidenet.hpp"
#include "bas/solvers.hpp"

namespace bas::analysis {

/// Perfect SideNet for a time-only field: S = (v(t + dt) - v(t)) / dt, and
/// v'(t) at dt = 0. Isolates scheme error from network error.
class OracleSideNet final : public sidenet::DeviationModel {
 public:
  explicit OracleSideNet(const flow::AnalyticField& field);

  std::size_t dim() const override { return field_.dim(); }
  std::vector<TensorBuffer> deviation(const TensorBuffer& x, const TensorBuffer& v, double t,
                                      std::span<const double> offsets) const override;

 private:
  const flow::AnalyticField& field_;
};

/// SideNet that sees time dependence exactly but freezes the state at the
/// anchor: predicts v(x_anchor, t + dt). Its error at offset dt is the state
/// drift |a| |x(t + dt) - x_anchor|.
class DriftSideNet final : public sidenet::DeviationModel {
 public:
  explicit DriftSideNet(const flow::AnalyticField& field);

  std::size_t dim() const override { return field_.dim(); }
  std::vector<TensorBuffer> deviation(const TensorBuffer& x, const TensorBuffer& v, double t,
                                      std::span<const double> offsets) const override;

 private:
  const flow::AnalyticField& field_;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least-squares line through (log x, log y).
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y);

struct GridPoint {
  std::size_t intervals = 0;
  double h = 0.0;
  double error = 0.0;
  bool used_in_fit = false;
};

struct ConvergenceReport {
  std::string solver;
  std::string field;
  std::vector<GridPoint> grid;
  double slope = 0.0;
  double r_squared = 0.0;

  static constexpr double kErrorFloor = 1e-13;
  static constexpr double kMinRSquared = 0.98;

  bool fit_ok() const { return r_squared >= kMinRSquared; }
};

/// Runs the configured solver on an analytic field for each N, measures
/// |x_0 - exact| (max-norm over rows and dims) and fits the log-log slope of
/// error against h. Errors below kErrorFloor are excluded from the fit.
/// Throws std::runtime_error with fewer than three usable points.
ConvergenceReport fit_order(const solvers::SamplerConfig& config, const flow::AnalyticField& field,
                            const sidenet::DeviationModel* sidenet,
                            std::span<const std::size_t> n_grid,
                            std::span<const double> x1 = {});

struct LtePoint {
  double h = 0.0;
  double local_error = 0.0;
  double closed_form = 0.0;  // 0.5 * L * C * h^2
};

struct LteScan {
  std::vector<LtePoint> points;
  double slope = 0.0;
  double r_squared = 0.0;
  double lipschitz = 0.0;
  double speed = 0.0;  // |v| at the anchor
};

/// One single-anchor interval from (x_anchor, t_anchor) for each h, compared
/// with the closed-form trajectory.
LteScan single_anchor_lte_scan(const flow::AnalyticField& field,
                               const sidenet::DeviationModel& drift_sidenet,
                               std::span<const double> h_grid, std::span<const double> x_anchor,
                               double t_anchor,
                               const quadrature::QuadratureRule& rule =
                                   quadrature::make_rule(quadrature::QuadratureKind::GaussLobatto4));

struct AnchorRatioPoint {
  double h = 0.0;
  double single_anchor_error = 0.0;
  double bi_anchor_error = 0.0;
  std::optional<double> ratio;  // empty when both errors sit at the float floor
};

/// Integrated velocity error over one interval,
///   E = integral over [t - h, t] of |v(x(tau), tau) - v_hat(tau)| dtau,
/// for the single-anchor predictor (all offsets from t) and the bi-anchor
/// predictor (proximity split at the midpoint, terminal anchor on the exact
/// trajectory). Predictions come from `drift_sidenet`.
std::vector<AnchorRatioPoint> anchor_error_ratio(const flow::AnalyticField& field,
                                                 const sidenet::DeviationModel& drift_sidenet,
                                                 std::span<const double> h_grid,
                                                 std::span<const double> x_anchor,
                                                 double t_anchor);

struct QuadratureOrderRow {
  quadrature::QuadratureKind kind{};
  int declared_degree = 0;
  int measured_degree = 0;
  int first_failing_degree = 0;
  double first_failing_error = 0.0;
};

std::vector<QuadratureOrderRow> quadrature_order_table(
    std::span<const quadrature::QuadratureRule> rules);
std::vector<QuadratureOrderRow> quadrature_order_table();

}  // namespace bas::analysis
