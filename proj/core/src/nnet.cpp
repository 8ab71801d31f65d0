#include "bas/nnet.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace bas {

TensorBuffer::TensorBuffer(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                        std::multiplies<>());
  data_.assign(n, fill);
}

TensorBuffer::TensorBuffer(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                        std::multiplies<>());
  if (n != data_.size()) {
    throw std::invalid_argument("TensorBuffer: shape product does not match data length");
  }
}

TensorBuffer TensorBuffer::matrix(std::size_t rows, std::size_t cols, double fill) {
  return TensorBuffer({rows, cols}, fill);
}

TensorBuffer TensorBuffer::row_vector(std::span<const double> values) {
  return TensorBuffer({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

std::size_t TensorBuffer::rows() const {
  if (rank() != 2) throw std::logic_error("TensorBuffer::rows on non-matrix");
  return shape_[0];
}

std::size_t TensorBuffer::cols() const {
  if (rank() != 2) throw std::logic_error("TensorBuffer::cols on non-matrix");
  return shape_[1];
}

std::span<double> TensorBuffer::row(std::size_t r) {
  return std::span<double>(data_).subspan(r * shape_[1], shape_[1]);
}

std::span<const double> TensorBuffer::row(std::size_t r) const {
  return std::span<const double>(data_).subspan(r * shape_[1], shape_[1]);
}

bool TensorBuffer::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

namespace nnet {

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

void MlpModel::validate() const {
  if (layer_dims.size() < 2) throw std::invalid_argument("MlpModel: need at least two layer dims");
  if (layers.size() + 1 != layer_dims.size()) {
    throw std::invalid_argument("MlpModel: layer count does not match layer_dims");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::vector<std::size_t> w_shape{layer_dims[l + 1], layer_dims[l]};
    const std::vector<std::size_t> b_shape{layer_dims[l + 1]};
    if (layers[l].weight.shape() != w_shape || layers[l].bias.shape() != b_shape) {
      throw std::invalid_argument("MlpModel: layer " + std::to_string(l) +
                                  " shape inconsistent with layer_dims");
    }
  }
}

ParameterSet zeros_like(const MlpModel& model) {
  ParameterSet out;
  out.reserve(model.layers.size());
  for (const auto& layer : model.layers) {
    out.push_back({TensorBuffer(layer.weight.shape()), TensorBuffer(layer.bias.shape())});
  }
  return out;
}

MlpModel mlp_init(std::span<const std::size_t> layer_dims, std::uint64_t seed,
                  FeatureConfig features) {
  if (layer_dims.empty()) throw std::invalid_argument("mlp_init: empty layer list");
  if (layer_dims.size() < 2) {
    throw std::invalid_argument("mlp_init: need input and output widths");
  }
  for (std::size_t d : layer_dims) {
    if (d == 0) throw std::invalid_argument("mlp_init: layer width must be >= 1");
  }

  MlpModel model;
  model.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  model.features = std::move(features);

  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const std::size_t d_in = layer_dims[l];
    const std::size_t d_out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(d_in + d_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{TensorBuffer::matrix(d_out, d_in), TensorBuffer({d_out})};
    for (double& w : layer.weight.values()) w = dist(rng);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void append_sinusoidal_features(double s, std::size_t n_freq, std::vector<double>& out) {
  double scale = std::numbers::pi;
  for (std::size_t k = 0; k < n_freq; ++k) {
    out.push_back(std::sin(scale * s));
    out.push_back(std::cos(scale * s));
    scale *= 2.0;
  }
}

std::vector<double> sinusoidal_features(double s, std::size_t n_freq) {
  std::vector<double> out;
  out.reserve(2 * n_freq);
  append_sinusoidal_features(s, n_freq, out);
  return out;
}

namespace {

// out[r, o] = b[o] + sum_i in[r, i] * W[o, i]; summation order fixed per row.
void affine(const DenseLayer& layer, const TensorBuffer& in, TensorBuffer& out) {
  const std::size_t rows = in.rows();
  const std::size_t d_in = layer.weight.cols();
  const std::size_t d_out = layer.weight.rows();
  out = TensorBuffer::matrix(rows, d_out);
  const double* w = layer.weight.values().data();
  const double* b = layer.bias.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in.row(r).data();
    double* y = out.row(r).data();
    for (std::size_t o = 0; o < d_out; ++o) {
      const double* w_row = w + o * d_in;
      double acc = 0.0;
      for (std::size_t i = 0; i < d_in; ++i) acc += w_row[i] * x[i];
      y[o] = acc + b[o];
    }
  }
}

}  // namespace

TensorBuffer mlp_forward(const MlpModel& model, const TensorBuffer& inputs,
                         ForwardCache* cache) {
  if (inputs.rank() != 2 || inputs.cols() != model.input_dim()) {
    throw std::invalid_argument("mlp_forward: input width " +
                                std::to_string(inputs.rank() == 2 ? inputs.cols() : 0) +
                                " does not match model input " +
                                std::to_string(model.input_dim()));
  }
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.push_back(inputs);
  }
  TensorBuffer current = inputs;
  TensorBuffer next;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    affine(model.layers[l], current, next);
    if (l + 1 < model.layers.size()) {
      for (double& v : next.values()) v = std::tanh(v);
    }
    current = std::move(next);
    if (cache != nullptr) cache->activations.push_back(current);
  }
  return current;
}

ParameterSet mlp_backward(const MlpModel& model, const ForwardCache& cache,
                          const TensorBuffer& output_grad) {
  const std::size_t n_layers = model.layers.size();
  if (cache.activations.size() != n_layers + 1) {
    throw std::invalid_argument("mlp_backward: cache does not match model depth");
  }
  if (!output_grad.same_shape(cache.activations.back())) {
    throw std::invalid_argument("mlp_backward: output gradient shape mismatch");
  }

  ParameterSet grads = zeros_like(model);
  TensorBuffer delta = output_grad;  // dLoss/d(pre-activation) of current layer
  for (std::size_t l = n_layers; l-- > 0;) {
    const DenseLayer& layer = model.layers[l];
    const TensorBuffer& input = cache.activations[l];
    const std::size_t rows = input.rows();
    const std::size_t d_in = layer.weight.cols();
    const std::size_t d_out = layer.weight.rows();
    double* gw = grads[l].weight.values().data();
    double* gb = grads[l].bias.values().data();

    for (std::size_t r = 0; r < rows; ++r) {
      const double* x = input.row(r).data();
      const double* d = delta.row(r).data();
      for (std::size_t o = 0; o < d_out; ++o) {
        const double g = d[o];
        gb[o] += g;
        double* gw_row = gw + o * d_in;
        for (std::size_t i = 0; i < d_in; ++i) gw_row[i] += g * x[i];
      }
    }

    if (l == 0) break;

    TensorBuffer prev = TensorBuffer::matrix(rows, d_in);
    const double* w = layer.weight.values().data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* d = delta.row(r).data();
      double* p = prev.row(r).data();
      for (std::size_t o = 0; o < d_out; ++o) {
        const double g = d[o];
        const double* w_row = w + o * d_in;
        for (std::size_t i = 0; i < d_in; ++i) p[i] += g * w_row[i];
      }
      // tanh'(z) = 1 - tanh(z)^2, with tanh(z) cached as the layer input.
      const double* a = input.row(r).data();
      for (std::size_t i = 0; i < d_in; ++i) p[i] *= 1.0 - a[i] * a[i];
    }
    delta = std::move(prev);
  }
  return grads;
}

LossAndGradients grad_mse(const MlpModel& model, const TensorBuffer& inputs,
                          const TensorBuffer& targets) {
  if (inputs.rank() != 2 || targets.rank() != 2 || inputs.rows() != targets.rows() ||
      targets.cols() != model.output_dim()) {
    throw std::invalid_argument("grad_mse: input/target shape mismatch");
  }
  ForwardCache cache;
  const TensorBuffer out = mlp_forward(model, inputs, &cache);
  const double count = static_cast<double>(out.size());
  TensorBuffer grad(out.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double diff = out[i] - targets[i];
    sum += diff * diff;
    grad[i] = 2.0 * diff / count;
  }
  return {sum / count, mlp_backward(model, cache, grad)};
}

AdamState adam_init(const MlpModel& model, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  state.first_moment = zeros_like(model);
  state.second_moment = zeros_like(model);
  return state;
}

namespace {

void check_mirrors(const MlpModel& model, const ParameterSet& set, const char* what) {
  if (set.size() != model.layers.size()) {
    throw std::invalid_argument(std::string("adam_step: ") + what + " layer count mismatch");
  }
  for (std::size_t l = 0; l < set.size(); ++l) {
    if (!set[l].weight.same_shape(model.layers[l].weight) ||
        !set[l].bias.same_shape(model.layers[l].bias)) {
      throw std::invalid_argument(std::string("adam_step: ") + what + " shape mismatch");
    }
  }
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamState& s, double bc1, double bc2) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grads[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

}  // namespace

void adam_step(MlpModel& model, const ParameterSet& grads, AdamState& state) {
  check_mirrors(model, grads, "gradient");
  check_mirrors(model, state.first_moment, "first moment");
  check_mirrors(model, state.second_moment, "second moment");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    adam_update(model.layers[l].weight.values(), grads[l].weight.values(),
                state.first_moment[l].weight.values(), state.second_moment[l].weight.values(),
                state, bc1, bc2);
    adam_update(model.layers[l].bias.values(), grads[l].bias.values(),
                state.first_moment[l].bias.values(), state.second_moment[l].bias.values(),
                state, bc1, bc2);
  }
}

}  // namespace nnet
}  // namespace bas
