#include "bas/sidenet.hpp"

#include <cmath>
#include <stdexcept>

namespace bas::sidenet {

namespace {

// Slack for t + dt landing a rounding error outside [0, 1].
constexpr double kTimeSlack = 1e-12;

}  // namespace

std::vector<TensorBuffer> sidenet_predict(const DeviationModel& model, const TensorBuffer& x,
                                          const TensorBuffer& v, double t,
                                          std::span<const double> offsets) {
  if (!x.same_shape(v) || x.rank() != 2 || x.cols() != model.dim()) {
    throw std::invalid_argument("sidenet_predict: x/v shape mismatch");
  }
  for (double dt : offsets) {
    const double target = t + dt;
    if (!(t >= -kTimeSlack && t <= 1.0 + kTimeSlack) ||
        !(target >= -kTimeSlack && target <= 1.0 + kTimeSlack)) {
      throw std::invalid_argument("sidenet_predict: t + dt = " + std::to_string(target) +
                                  " outside [0, 1]");
    }
  }
  std::vector<TensorBuffer> dev = model.deviation(x, v, t, offsets);
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    TensorBuffer& out = dev[k];
    const double dt = offsets[k];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] + dt * out[i];
  }
  return dev;
}

// --- SideNet -----------------------------------------------------------------

std::size_t SideNet::input_width(std::size_t state_dim, std::size_t n_freq) {
  return 2 * state_dim + 4 * n_freq + 1;
}

nnet::FeatureConfig SideNet::feature_config(std::size_t state_dim, std::size_t n_freq) {
  return {"sidenet", state_dim, n_freq};
}

SideNet::SideNet(nnet::MlpModel model) : model_(std::move(model)) {
  model_.validate();
  const auto& f = model_.features;
  if (f.kind != "sidenet") {
    throw std::invalid_argument("SideNet: checkpoint kind is '" + f.kind + "', not 'sidenet'");
  }
  if (f.state_dim == 0 || model_.input_dim() != input_width(f.state_dim, f.n_freq) ||
      model_.output_dim() != f.state_dim) {
    throw std::invalid_argument("SideNet: model widths do not match [x, v, t, dt] -> deviation");
  }
}

SideNet SideNet::create(std::size_t state_dim, const SideNetArch& arch, std::uint64_t seed) {
  std::vector<std::size_t> dims{input_width(state_dim, arch.n_freq)};
  dims.insert(dims.end(), arch.hidden.begin(), arch.hidden.end());
  dims.push_back(state_dim);
  nnet::MlpModel model = nnet::mlp_init(dims, seed, feature_config(state_dim, arch.n_freq));
  for (double& w : model.layers.back().weight.values()) w = 0.0;
  return SideNet(std::move(model));
}

SideNet SideNet::zeros(std::size_t state_dim, const SideNetArch& arch) {
  SideNet s = create(state_dim, arch, 0);
  for (auto& layer : s.model_.layers) {
    for (double& w : layer.weight.values()) w = 0.0;
  }
  return s;
}

TensorBuffer SideNet::build_inputs(const TensorBuffer& x, const TensorBuffer& v, double t,
                                   std::span<const double> offsets) const {
  const std::size_t n = x.rows();
  const std::size_t d = dim();
  const std::size_t n_freq = model_.features.n_freq;
  TensorBuffer in = TensorBuffer::matrix(n * offsets.size(), input_width(d, n_freq));
  const std::vector<double> t_feat = nnet::sinusoidal_features(t, n_freq);
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    const double dt = offsets[k];
    const std::vector<double> dt_feat = nnet::sinusoidal_features(dt, n_freq);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = in.row(k * n + r);
      std::size_t c = 0;
      for (std::size_t i = 0; i < d; ++i) row[c++] = x(r, i);
      for (std::size_t i = 0; i < d; ++i) row[c++] = v(r, i);
      for (double f : t_feat) row[c++] = f;
      for (double f : dt_feat) row[c++] = f;
      row[c] = dt;
    }
  }
  return in;
}

std::vector<TensorBuffer> SideNet::deviation(const TensorBuffer& x, const TensorBuffer& v,
                                             double t, std::span<const double> offsets) const {
  const std::size_t n = x.rows();
  const std::size_t d = dim();
  const TensorBuffer out = nnet::mlp_forward(model_, build_inputs(x, v, t, offsets));
  std::vector<TensorBuffer> result;
  result.reserve(offsets.size());
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    TensorBuffer block = TensorBuffer::matrix(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t i = 0; i < d; ++i) block(r, i) = out(k * n + r, i);
    }
    result.push_back(std::move(block));
  }
  return result;
}

// --- chain training ----------------------------------------------------------

void ChainTrainConfig::validate() const {
  if (chain_length < 1) throw std::invalid_argument("ChainTrainConfig: chain_length must be >= 1");
  if (!(h_min > 0.0 && h_min < h_max && h_max <= 1.0)) {
    throw std::invalid_argument("ChainTrainConfig: need 0 < h_min < h_max <= 1");
  }
  if (!(lambda_trunc > 0.0)) throw std::invalid_argument("ChainTrainConfig: lambda must be > 0");
  if (batch_size < 1) throw std::invalid_argument("ChainTrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("ChainTrainConfig: lr must be > 0");
  if (lookback_weight < 0.0) throw std::invalid_argument("ChainTrainConfig: negative lookback weight");
}

double truncated_exponential_quantile(double u, double lambda, double lo, double hi) {
  if (!(lambda > 0.0) || !(hi >= lo)) {
    throw std::invalid_argument("truncated_exponential_quantile: bad parameters");
  }
  // F(h) = (1 - e^{-lambda (h - lo)}) / (1 - e^{-lambda (hi - lo)}) on [lo, hi].
  const double mass = -std::expm1(-lambda * (hi - lo));
  const double h = lo - std::log1p(-u * mass) / lambda;
  return std::min(std::max(h, lo), hi);
}

double sample_interval(Rng& rng, double lambda, double t, double h_min, double h_max) {
  if (t <= h_min) {
    throw std::domain_error("sample_interval: t <= h_min, no interval fits");
  }
  return truncated_exponential_quantile(uniform01(rng), lambda, h_min, std::min(h_max, t));
}

nnet::LossAndGradients chain_link_loss(const SideNet& sidenet, std::span<const ChainLink> links,
                                       double lookback_weight) {
  if (links.empty()) return {0.0, nnet::zeros_like(sidenet.model())};
  const std::size_t n = links.front().x_start.rows();
  const std::size_t d = sidenet.dim();
  const std::size_t width = SideNet::input_width(d, sidenet.model().features.n_freq);
  const bool lookback = lookback_weight > 0.0;
  const std::size_t blocks = links.size() * (lookback ? 2 : 1);

  TensorBuffer inputs = TensorBuffer::matrix(blocks * n, width);
  auto copy_block = [&](std::size_t block, const TensorBuffer& src) {
    for (std::size_t r = 0; r < n; ++r) {
      auto dst = inputs.row(block * n + r);
      auto s = src.row(r);
      std::copy(s.begin(), s.end(), dst.begin());
    }
  };
  std::size_t block = 0;
  for (const ChainLink& link : links) {
    const double back[1] = {-link.h};
    copy_block(block++, sidenet.build_inputs(link.x_start, link.v_start, link.t, back));
    if (lookback) {
      const double ahead[1] = {link.h};
      copy_block(block++, sidenet.build_inputs(link.x_end, link.v_end, link.t - link.h, ahead));
    }
  }

  nnet::ForwardCache cache;
  const TensorBuffer out = nnet::mlp_forward(sidenet.model(), inputs, &cache);
  TensorBuffer grad(out.shape());
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(links.size()));
  double loss = 0.0;
  block = 0;
  for (const ChainLink& link : links) {
    const double h = link.h;
    // Lookahead: v_start - h S(x_start, v_start, t, -h) should match v_end.
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t row = block * n + r;
      for (std::size_t i = 0; i < d; ++i) {
        const double resid = link.v_start(r, i) - h * out(row, i) - link.v_end(r, i);
        loss += scale * resid * resid;
        grad(row, i) = -2.0 * h * resid * scale;
      }
    }
    ++block;
    if (!lookback) continue;
    // Lookback: v_end + h S(x_end, v_end, t - h, +h) should match v_start.
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t row = block * n + r;
      for (std::size_t i = 0; i < d; ++i) {
        const double resid = link.v_end(r, i) + h * out(row, i) - link.v_start(r, i);
        loss += lookback_weight * scale * resid * resid;
        grad(row, i) = 2.0 * lookback_weight * h * resid * scale;
      }
    }
    ++block;
  }
  return {loss, nnet::mlp_backward(sidenet.model(), cache, grad)};
}

ChainStepResult chain_train_step(flow::CountedField& backbone, const SideNet& sidenet,
                                 const TrainBatch& batch, const ChainTrainConfig& config,
                                 Rng& rng) {
  config.validate();
  const quadrature::QuadratureRule rule = quadrature::make_rule(config.rule);

  ChainStepResult result;
  double t = uniform01(rng);
  result.t_start = t;
  TensorBuffer x = flow::linear_interpolant(batch.x_data, batch.x_noise, t);
  TensorBuffer v = backbone(x, t);

  std::vector<double> offsets(rule.size());
  for (std::size_t k = 0; k < config.chain_length; ++k) {
    if (t <= config.h_min) break;
    const double h = sample_interval(rng, config.lambda_trunc, t, config.h_min, config.h_max);
    for (std::size_t i = 0; i < rule.size(); ++i) offsets[i] = -h * rule.nodes[i];

    // Solver simulation with the current SideNet (no gradient path).
    const auto node_v = sidenet_predict(sidenet, x, v, t, offsets);
    const TensorBuffer step = quadrature::apply(rule, node_v, h);
    TensorBuffer x_next(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) x_next[i] = x[i] - step[i];
    const double t_next = std::max(0.0, t - h);

    TensorBuffer v_next = backbone(x_next, t_next);
    result.links.push_back({t, t - t_next, x, v, x_next, v_next});

    x = std::move(x_next);
    v = std::move(v_next);
    t = t_next;
  }

  result.completed_links = result.links.size();
  auto [loss, grads] = chain_link_loss(sidenet, result.links, config.lookback_weight);
  result.loss = loss;
  result.grads = std::move(grads);
  return result;
}

SideNetTrainResult train_sidenet(const flow::VelocityField& backbone,
                                 const flow::FlowProblem& problem, const ChainTrainConfig& config,
                                 const SideNetArch& arch) {
  config.validate();
  if (backbone.dim() != problem.dim) {
    throw std::invalid_argument("train_sidenet: backbone and problem dimensions differ");
  }
  SideNetTrainResult result{SideNet::create(problem.dim, arch, derive_seed(config.seed, 0)), {}, 0, 0};
  Rng rng(derive_seed(config.seed, 1));
  nnet::AdamState adam = nnet::adam_init(result.sidenet.model(), config.learning_rate);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    TrainBatch batch{problem.sample_data(config.batch_size, rng),
                     flow::sample_noise(config.batch_size, problem.dim, rng)};
    flow::CountedField counted(backbone);
    ChainStepResult step = chain_train_step(counted, result.sidenet, batch, config, rng);
    result.backbone_nfe += counted.nfe();
    if (step.completed_links == 0) {
      ++result.skipped_chains;
      continue;
    }
    if (!std::isfinite(step.loss)) {
      throw std::runtime_error("train_sidenet: non-finite loss at iteration " + std::to_string(it));
    }
    result.loss_curve.push_back(step.loss);
    nnet::adam_step(result.sidenet.mutable_model(), step.grads, adam);
  }
  return result;
}

}  // namespace bas::sidenet
