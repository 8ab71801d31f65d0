#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bas {

/// Dense row-major buffer of 64-bit floats. Rank-2 buffers double as batches:
/// one row per sample.
class TensorBuffer {
 public:
  TensorBuffer() = default;
  explicit TensorBuffer(std::vector<std::size_t> shape, double fill = 0.0);
  TensorBuffer(std::vector<std::size_t> shape, std::vector<double> data);

  static TensorBuffer matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static TensorBuffer row_vector(std::span<const double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors.
  std::size_t rows() const;
  std::size_t cols() const;
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const;
  bool same_shape(const TensorBuffer& other) const { return shape_ == other.shape_; }

  bool operator==(const TensorBuffer& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

namespace nnet {

/// Describes how a network's input row is assembled from domain quantities.
/// The tag distinguishes backbone and SideNet checkpoints.
struct FeatureConfig {
  std::string kind = "mlp";
  std::size_t state_dim = 0;
  std::size_t n_freq = 0;

  bool operator==(const FeatureConfig&) const = default;
};

struct DenseLayer {
  TensorBuffer weight;  // [d_out, d_in]
  TensorBuffer bias;    // [d_out]

  bool operator==(const DenseLayer&) const = default;
};

/// Multi-layer perceptron: tanh on hidden layers, identity on the output.
struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<DenseLayer> layers;
  FeatureConfig features;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
  std::size_t parameter_count() const;

  /// Throws std::invalid_argument if layer shapes disagree with layer_dims.
  void validate() const;

  bool operator==(const MlpModel&) const = default;
};

/// Parameter-shaped container; used for gradients and Adam moments.
using ParameterSet = std::vector<DenseLayer>;

ParameterSet zeros_like(const MlpModel& model);

/// Glorot-uniform weights in +-sqrt(6 / (d_in + d_out)), zero biases. The same
/// (dims, seed) pair always yields a bit-identical model.
MlpModel mlp_init(std::span<const std::size_t> layer_dims, std::uint64_t seed,
                  FeatureConfig features = {});

/// [sin(2^k pi s), cos(2^k pi s)] for k = 0 .. n_freq-1, interleaved.
std::vector<double> sinusoidal_features(double s, std::size_t n_freq);
void append_sinusoidal_features(double s, std::size_t n_freq, std::vector<double>& out);

/// Post-activation values of every layer, input first. Filled by mlp_forward
/// when requested and consumed by mlp_backward.
struct ForwardCache {
  std::vector<TensorBuffer> activations;
};

TensorBuffer mlp_forward(const MlpModel& model, const TensorBuffer& inputs,
                         ForwardCache* cache = nullptr);

/// Reverse-mode sweep: given dLoss/dOutput for every row, returns dLoss/dParam.
ParameterSet mlp_backward(const MlpModel& model, const ForwardCache& cache,
                          const TensorBuffer& output_grad);

struct LossAndGradients {
  double loss = 0.0;
  ParameterSet grads;
};

/// Mean over batch and output dims of the squared error, with its gradient.
LossAndGradients grad_mse(const MlpModel& model, const TensorBuffer& inputs,
                          const TensorBuffer& targets);

struct AdamState {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  ParameterSet first_moment;
  ParameterSet second_moment;
};

AdamState adam_init(const MlpModel& model, double learning_rate);

/// One bias-corrected Adam update in place.
void adam_step(MlpModel& model, const ParameterSet& grads, AdamState& state);

// --- checkpoints -----------------------------------------------------------

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { MissingFile, Parse, Version, Checksum, Invalid };

  CheckpointError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// CRC-32 over the little-endian IEEE-754 bytes of every weight then bias,
/// layer by layer.
std::uint32_t parameter_crc32(const MlpModel& model);

std::string serialize_checkpoint(const MlpModel& model);
MlpModel parse_checkpoint(const std::string& text);

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_checkpoint(const std::filesystem::path& path);

}  // namespace nnet
}  // namespace bas
