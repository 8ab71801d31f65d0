#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bas/data_metrics.hpp"
#include "bas/nnet.hpp"
#include "bas/random.hpp"

namespace bas::flow {

enum class FieldKind { Analytic, Learned };

/// Right-hand side v(x, t) of the sampling ODE. Time runs from t = 1 (noise)
/// down to t = 0 (data). Implementations are pure and safe to share
/// read-only; evaluation counting lives in CountedField.
class VelocityField {
 public:
  virtual ~VelocityField() = default;

  virtual std::size_t dim() const = 0;
  virtual FieldKind kind() const = 0;

  /// Velocity for every row of `states` (n x dim) at the shared time t.
  virtual TensorBuffer evaluate(const TensorBuffer& states, double t) const = 0;
};

/// Per-run wrapper that tallies backbone evaluations. One batched call counts
/// as one function evaluation per sample. Never share an instance between
/// concurrent runs.
class CountedField {
 public:
  explicit CountedField(const VelocityField& field) : field_(&field) {}

  TensorBuffer operator()(const TensorBuffer& states, double t) {
    ++nfe_;
    return field_->evaluate(states, t);
  }

  std::uint64_t nfe() const { return nfe_; }
  const VelocityField& field() const { return *field_; }

 private:
  const VelocityField* field_;
  std::uint64_t nfe_ = 0;
};

/// Scalar function of time with closed-form derivative and antiderivative.
class TimeProfile {
 public:
  struct Polynomial {
    std::vector<double> coeffs;  // c0 + c1 t + c2 t^2 + ...
  };
  struct Cosine {
    double amplitude = 1.0;
    double frequency = 1.0;
    double phase = 0.0;
  };
  struct Exponential {
    double amplitude = 1.0;
    double rate = 1.0;
  };

  static TimeProfile polynomial(std::vector<double> coeffs);
  static TimeProfile cosine(double amplitude = 1.0, double frequency = 1.0, double phase = 0.0);
  static TimeProfile exponential(double amplitude = 1.0, double rate = 1.0);

  double value(double t) const;
  double derivative(double t) const;
  double antiderivative(double t) const;
  std::string describe() const;

  const std::variant<Polynomial, Cosine, Exponential>& form() const { return form_; }

 private:
  explicit TimeProfile(std::variant<Polynomial, Cosine, Exponential> form)
      : form_(std::move(form)) {}
  std::variant<Polynomial, Cosine, Exponential> form_;
};

/// Verification fields whose trajectories are known in closed form.
///
///  * time-only:    v(x, t) = p(t) in every coordinate.
///  * linear-state: v_i(x, t) = a_i x_i + b(t) with b a polynomial.
class AnalyticField final : public VelocityField {
 public:
  static AnalyticField time_only(TimeProfile profile, std::size_t dim = 1);
  static AnalyticField linear_state(std::vector<double> rates,
                                    std::vector<double> forcing_coeffs = {});

  std::size_t dim() const override { return dim_; }
  FieldKind kind() const override { return FieldKind::Analytic; }
  TensorBuffer evaluate(const TensorBuffer& states, double t) const override;

  bool is_time_only() const { return time_only_; }
  /// Time profile (time-only) or forcing polynomial b(t) (linear-state).
  const TimeProfile& profile() const { return profile_; }
  /// Per-dimension state coefficients; all zero for time-only fields.
  std::span<const double> rates() const { return rates_; }
  double lipschitz() const;

  std::vector<double> velocity(std::span<const double> x, double t) const;

  /// Closed-form state at t_end of the trajectory through (x_start, t_start).
  std::vector<double> solve(std::span<const double> x_start, double t_start,
                            double t_end) const;

  std::string describe() const;

 private:
  AnalyticField(bool time_only, std::size_t dim, TimeProfile profile, std::vector<double> rates);

  bool time_only_;
  std::size_t dim_;
  TimeProfile profile_;
  std::vector<double> rates_;
};

/// Closed-form x(t_end) for the trajectory with x(1) = x1. Throws
/// std::invalid_argument when the field is not analytic.
std::vector<double> exact_solution(const VelocityField& field, std::span<const double> x1,
                                   double t_end);

/// Learned backbone: an MLP over [x, sinusoidal(t)].
class LearnedField final : public VelocityField {
 public:
  explicit LearnedField(nnet::MlpModel model);

  std::size_t dim() const override { return model_.features.state_dim; }
  FieldKind kind() const override { return FieldKind::Learned; }
  TensorBuffer evaluate(const TensorBuffer& states, double t) const override;

  const nnet::MlpModel& model() const { return model_; }

  static nnet::FeatureConfig feature_config(std::size_t state_dim, std::size_t n_freq);

 private:
  nnet::MlpModel model_;
};

/// Input rows [x, sinusoidal(t)] shared by training and evaluation.
TensorBuffer backbone_inputs(const TensorBuffer& states, std::span<const double> times,
                             std::size_t n_freq);

/// (1 - t) x_data + t x_noise, row-wise.
TensorBuffer linear_interpolant(const TensorBuffer& x_data, const TensorBuffer& x_noise,
                                double t);
std::vector<double> linear_interpolant(std::span<const double> x_data,
                                       std::span<const double> x_noise, double t);

/// Conditional velocity x_noise - x_data of the straight-line path.
TensorBuffer fm_target(const TensorBuffer& x_data, const TensorBuffer& x_noise);

/// Noise at t = 1 is N(0, I); `sample_data` draws the t = 0 marginal.
struct FlowProblem {
  std::string name;
  std::size_t dim = 2;
  std::function<TensorBuffer(std::size_t, Rng&)> sample_data;

  static FlowProblem from_dataset(data::DatasetKind kind);
  static FlowProblem point_mass(std::vector<double> location);
};

TensorBuffer sample_noise(std::size_t n, std::size_t dim, Rng& rng);

struct BackboneTrainConfig {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t n_freq = 4;
  std::size_t batch_size = 256;
  std::size_t iterations = 4000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

struct BackboneTrainResult {
  LearnedField field;
  std::vector<double> loss_curve;
};

/// Flow-matching regression of the MLP onto fm_target along the linear path.
/// Throws std::runtime_error on a non-finite loss.
BackboneTrainResult train_backbone(const FlowProblem& problem, const BackboneTrainConfig& config);

}  // namespace bas::flow
