#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bas/flow.hpp"
#include "bas/nnet.hpp"
#include "bas/quadrature.hpp"
#include "bas/random.hpp"

namespace bas::sidenet {

/// First-order velocity deviation S(x, v, t, dt). A velocity at t + dt is
/// predicted from the anchor (x, v, t) as v + dt * S.
class DeviationModel {
 public:
  virtual ~DeviationModel() = default;

  virtual std::size_t dim() const = 0;

  /// One result per offset, each n x dim; evaluated as a single batch.
  virtual std::vector<TensorBuffer> deviation(const TensorBuffer& x, const TensorBuffer& v,
                                              double t,
                                              std::span<const double> offsets) const = 0;
};

/// v + dt * S(x, v, t, dt) for every offset. Exactly v at dt = 0 whatever S
/// returns. Throws std::invalid_argument if t + dt leaves [0, 1].
std::vector<TensorBuffer> sidenet_predict(const DeviationModel& model, const TensorBuffer& x,
                                          const TensorBuffer& v, double t,
                                          std::span<const double> offsets);

struct SideNetArch {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t n_freq = 4;
};

/// Learned SideNet: MLP over [x, v, sin/cos(t), sin/cos(dt), dt].
class SideNet final : public DeviationModel {
 public:
  explicit SideNet(nnet::MlpModel model);

  /// Random hidden layers and an all-zero output layer, so the initial
  /// deviation is identically zero.
  static SideNet create(std::size_t state_dim, const SideNetArch& arch, std::uint64_t seed);
  /// Every parameter zero.
  static SideNet zeros(std::size_t state_dim, const SideNetArch& arch);

  static std::size_t input_width(std::size_t state_dim, std::size_t n_freq);
  static nnet::FeatureConfig feature_config(std::size_t state_dim, std::size_t n_freq);

  std::size_t dim() const override { return model_.features.state_dim; }
  std::vector<TensorBuffer> deviation(const TensorBuffer& x, const TensorBuffer& v, double t,
                                      std::span<const double> offsets) const override;

  /// Input rows, offset-major: rows [k*n, (k+1)*n) belong to offsets[k].
  TensorBuffer build_inputs(const TensorBuffer& x, const TensorBuffer& v, double t,
                            std::span<const double> offsets) const;

  const nnet::MlpModel& model() const { return model_; }
  nnet::MlpModel& mutable_model() { return model_; }

 private:
  nnet::MlpModel model_;
};

struct ChainTrainConfig {
  std::size_t chain_length = 8;
  double lambda_trunc = 50.0;
  double h_min = 0.01;
  double h_max = 0.5;
  quadrature::QuadratureKind rule = quadrature::QuadratureKind::GaussLegendre3;
  std::size_t batch_size = 256;
  std::size_t iterations = 2000;
  double learning_rate = 1e-4;
  // Weight of the lookback term (positive offset from the later state).
  double lookback_weight = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Inverse CDF of Exp(lambda) truncated to [lo, hi] evaluated at u in [0, 1).
double truncated_exponential_quantile(double u, double lambda, double lo, double hi);

/// Interval size drawn from Exp(lambda) truncated to [h_min, min(h_max, t)].
/// Throws std::domain_error when t <= h_min (no further link fits).
double sample_interval(Rng& rng, double lambda, double t, double h_min, double h_max);

/// One completed link of a chain; every tensor is a constant (detached).
struct ChainLink {
  double t = 0.0;
  double h = 0.0;
  TensorBuffer x_start;
  TensorBuffer v_start;
  TensorBuffer x_end;
  TensorBuffer v_end;
};

struct TrainBatch {
  TensorBuffer x_data;
  TensorBuffer x_noise;
};

struct ChainStepResult {
  double loss = 0.0;
  nnet::ParameterSet grads;
  std::size_t completed_links = 0;
  double t_start = 0.0;
  std::vector<ChainLink> links;
};

/// Matching loss over fixed links:
///   mean_b sum_k |v_start - h S(x_start, v_start, t, -h) - v_end|^2
/// + w * |v_end + h S(x_end, v_end, t - h, +h) - v_start|^2, divided by the
/// number of links. Targets are constants, so only SideNet parameters receive
/// gradient.
nnet::LossAndGradients chain_link_loss(const SideNet& sidenet, std::span<const ChainLink> links,
                                       double lookback_weight);

/// One chain rollout with stop-gradient targets. Uses exactly
/// completed_links + 1 backbone evaluations.
ChainStepResult chain_train_step(flow::CountedField& backbone, const SideNet& sidenet,
                                 const TrainBatch& batch, const ChainTrainConfig& config,
                                 Rng& rng);

struct SideNetTrainResult {
  SideNet sidenet;
  std::vector<double> loss_curve;
  std::uint64_t backbone_nfe = 0;
  std::size_t skipped_chains = 0;
};

/// Adam over chain_train_step gradients. The backbone is never modified.
SideNetTrainResult train_sidenet(const flow::VelocityField& backbone,
                                 const flow::FlowProblem& problem, const ChainTrainConfig& config,
                                 const SideNetArch& arch = {});

}  // namespace bas::sidenet
