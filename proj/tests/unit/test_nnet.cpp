#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "bas/nnet.hpp"
#include "bas/random.hpp"

namespace {

using bas::TensorBuffer;
using namespace bas::nnet;

TensorBuffer random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  TensorBuffer m = TensorBuffer::matrix(r, c);
  for (auto& x : m.values()) x = n(rng);
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "bas_test_nnet";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(TensorBuffer, ShapeMustMatchData) {
  EXPECT_THROW(TensorBuffer({2, 3}, std::vector<double>(5)), std::invalid_argument);
  TensorBuffer t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t(1, 0), 4.0);
  EXPECT_TRUE(t.all_finite());
  t(0, 0) = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(MlpInit, SameSeedSameParameters) {
  const std::vector<std::size_t> dims{2, 4, 2};
  EXPECT_EQ(mlp_init(dims, 7), mlp_init(dims, 7));
  EXPECT_NE(mlp_init(dims, 7), mlp_init(dims, 8));
}

TEST(MlpInit, ParameterCount) {
  const std::vector<std::size_t> dims{3, 8, 8, 3};
  EXPECT_EQ(mlp_init(dims, 1).parameter_count(), 131u);
}

TEST(MlpInit, DegenerateDims) {
  EXPECT_THROW(mlp_init(std::vector<std::size_t>{2}, 1), std::invalid_argument);
  EXPECT_THROW(mlp_init(std::vector<std::size_t>{}, 1), std::invalid_argument);
  EXPECT_THROW(mlp_init(std::vector<std::size_t>{2, 0, 1}, 1), std::invalid_argument);
}

TEST(MlpInit, GlorotBoundsAndZeroBias) {
  const std::vector<std::size_t> dims{5, 20, 3};
  const auto m = mlp_init(dims, 99);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (double w : m.layers[l].weight.values()) EXPECT_LE(std::abs(w), bound);
    for (double b : m.layers[l].bias.values()) EXPECT_EQ(b, 0.0);
  }
}

TEST(SinusoidalFeatures, KnownValues) {
  EXPECT_EQ(sinusoidal_features(0.0, 2), (std::vector<double>{0, 1, 0, 1}));
  const auto half = sinusoidal_features(0.5, 1);
  EXPECT_NEAR(half[0], 1.0, 1e-15);
  EXPECT_NEAR(half[1], 0.0, 1e-15);
  const auto quarter = sinusoidal_features(0.25, 2);
  const double pi = std::acos(-1.0);
  const std::vector<double> expect{std::sin(pi / 4), std::cos(pi / 4), std::sin(pi / 2),
                                   std::cos(pi / 2)};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(quarter[i], expect[i], 1e-15);
}

TEST(MlpForward, ZeroWeightsGiveLastBias) {
  auto m = mlp_init(std::vector<std::size_t>{3, 5, 2}, 1);
  for (auto& layer : m.layers) {
    for (auto& w : layer.weight.values()) w = 0.0;
  }
  m.layers.back().bias[0] = 1.5;
  m.layers.back().bias[1] = -2.0;
  std::mt19937_64 rng(3);
  const auto out = mlp_forward(m, random_matrix(4, 3, rng));
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(out(r, 0), 1.5);
    EXPECT_EQ(out(r, 1), -2.0);
  }
}

TEST(MlpForward, IdentityPassthrough) {
  auto m = mlp_init(std::vector<std::size_t>{3, 3}, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) m.layers[0].weight(i, j) = i == j ? 1.0 : 0.0;
  }
  std::mt19937_64 rng(4);
  const auto x = random_matrix(5, 3, rng);
  EXPECT_EQ(mlp_forward(m, x), x);
}

TEST(MlpForward, BatchEqualsStackedRows) {
  const auto m = mlp_init(std::vector<std::size_t>{2, 16, 16, 3}, 11);
  std::mt19937_64 rng(5);
  const auto x = random_matrix(2, 2, rng);
  const auto both = mlp_forward(m, x);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto single = mlp_forward(m, TensorBuffer::row_vector(x.row(r)));
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(single(0, c), both(r, c));
  }
}

TEST(MlpForward, WidthMismatchThrows) {
  const auto m = mlp_init(std::vector<std::size_t>{2, 4, 1}, 1);
  EXPECT_THROW(mlp_forward(m, TensorBuffer::matrix(3, 3)), std::invalid_argument);
}

TEST(GradMse, PerfectFitHasZeroLossAndGradient) {
  const auto m = mlp_init(std::vector<std::size_t>{2, 4, 2}, 2);
  std::mt19937_64 rng(6);
  const auto x = random_matrix(3, 2, rng);
  const auto y = mlp_forward(m, x);
  const auto lg = grad_mse(m, x, y);
  EXPECT_EQ(lg.loss, 0.0);
  for (const auto& g : lg.grads) {
    for (double v : g.weight.values()) EXPECT_EQ(v, 0.0);
    for (double v : g.bias.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(GradMse, ScalarLinearByHand) {
  auto m = mlp_init(std::vector<std::size_t>{1, 1}, 0);
  m.layers[0].weight[0] = 2.0;
  m.layers[0].bias[0] = 0.0;
  const auto lg = grad_mse(m, TensorBuffer::matrix(1, 1, 1.0), TensorBuffer::matrix(1, 1, 0.0));
  EXPECT_DOUBLE_EQ(lg.loss, 4.0);
  EXPECT_DOUBLE_EQ(lg.grads[0].weight[0], 4.0);
  EXPECT_DOUBLE_EQ(lg.grads[0].bias[0], 4.0);
}

TEST(GradMse, ShapeMismatchThrows) {
  const auto m = mlp_init(std::vector<std::size_t>{2, 3}, 0);
  EXPECT_THROW(grad_mse(m, TensorBuffer::matrix(2, 2), TensorBuffer::matrix(2, 2)),
               std::invalid_argument);
}

// Central differences over every parameter of many random small models.
TEST(GradMse, MatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> width(1, 6), depth(1, 3), batch(1, 4);
  int models = 0;
  while (models < 25) {
    std::vector<std::size_t> dims{width(rng)};
    const std::size_t hidden = depth(rng);
    for (std::size_t i = 0; i < hidden; ++i) dims.push_back(width(rng));
    dims.push_back(width(rng));
    auto m = mlp_init(dims, rng());
    if (m.parameter_count() > 200) continue;
    ++models;
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto& layer : m.layers) {
      for (auto& b : layer.bias.values()) b = n(rng);
    }
    const std::size_t b = batch(rng);
    const auto x = random_matrix(b, dims.front(), rng);
    const auto y = random_matrix(b, dims.back(), rng);
    const auto lg = grad_mse(m, x, y);

    const double step = 1e-6;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      for (int which = 0; which < 2; ++which) {
        TensorBuffer& p = which == 0 ? m.layers[l].weight : m.layers[l].bias;
        const TensorBuffer& g = which == 0 ? lg.grads[l].weight : lg.grads[l].bias;
        ASSERT_TRUE(p.same_shape(g));
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double keep = p[i];
          p[i] = keep + step;
          const double up = grad_mse(m, x, y).loss;
          p[i] = keep - step;
          const double down = grad_mse(m, x, y).loss;
          p[i] = keep;
          const double fd = (up - down) / (2 * step);
          EXPECT_LE(std::abs(fd - g[i]), 1e-5 * std::max(std::abs(fd), std::abs(g[i])) + 1e-8)
              << "model " << models << " layer " << l << " entry " << i;
        }
      }
    }
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto m = mlp_init(std::vector<std::size_t>{2, 3, 1}, 4);
  const auto before = m;
  auto state = adam_init(m, 1e-3);
  adam_step(m, zeros_like(m), state);
  EXPECT_EQ(m, before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesBySignTimesRate) {
  auto m = mlp_init(std::vector<std::size_t>{2, 3, 1}, 4);
  const auto before = m;
  auto grads = zeros_like(m);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& g : grads) {
    for (auto& v : g.weight.values()) v = n(rng);
    for (auto& v : g.bias.values()) v = n(rng);
  }
  const double lr = 1e-3;
  auto state = adam_init(m, lr);
  adam_step(m, grads, state);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (std::size_t i = 0; i < m.layers[l].weight.size(); ++i) {
      const double g = grads[l].weight[i];
      // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
      const double expect = -lr * g / (std::abs(g) + 1e-8);
      EXPECT_NEAR(m.layers[l].weight[i] - before.layers[l].weight[i], expect, 1e-15);
    }
  }
}

TEST(Adam, Deterministic) {
  auto a = mlp_init(std::vector<std::size_t>{2, 3, 1}, 4);
  auto b = a;
  auto grads = zeros_like(a);
  for (auto& g : grads) g.weight.values()[0] = 0.7;
  auto sa = adam_init(a, 1e-2), sb = adam_init(b, 1e-2);
  for (int i = 0; i < 3; ++i) {
    adam_step(a, grads, sa);
    adam_step(b, grads, sb);
  }
  EXPECT_EQ(a, b);
}

TEST(Adam, ShapeMismatchThrows) {
  auto m = mlp_init(std::vector<std::size_t>{2, 3, 1}, 4);
  auto state = adam_init(m, 1e-3);
  const auto other = zeros_like(mlp_init(std::vector<std::size_t>{2, 4, 1}, 4));
  EXPECT_THROW(adam_step(m, other, state), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto m = mlp_init(std::vector<std::size_t>{3, 7, 2}, 21, FeatureConfig{"backbone", 2, 1});
  for (auto& b : m.layers[0].bias.values()) b = 1.0 / 3.0;
  const auto path = temp_file("roundtrip.json");
  save_checkpoint(m, path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(loaded, m);
  std::mt19937_64 rng(1);
  const auto x = random_matrix(4, 3, rng);
  EXPECT_EQ(mlp_forward(loaded, x), mlp_forward(m, x));
}

TEST(Checkpoint, MissingFile) {
  try {
    load_checkpoint(temp_file("does_not_exist.json"));
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::MissingFile);
  }
}

TEST(Checkpoint, WrongVersion) {
  const auto m = mlp_init(std::vector<std::size_t>{2, 2}, 1);
  std::string text = serialize_checkpoint(m);
  const auto pos = text.find("\"format_version\": 1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 19, "\"format_version\": 9");
  try {
    parse_checkpoint(text);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::Version);
  }
}

TEST(Checkpoint, TruncatedFile) {
  const auto m = mlp_init(std::vector<std::size_t>{2, 4, 2}, 1);
  const std::string text = serialize_checkpoint(m);
  const auto path = temp_file("truncated.json");
  std::ofstream(path) << text.substr(0, text.size() / 2);
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::Parse);
  }
}

TEST(Checkpoint, TamperedWeightFailsChecksum) {
  auto m = mlp_init(std::vector<std::size_t>{2, 2}, 1);
  m.layers[0].weight[0] = 0.25;
  std::string text = serialize_checkpoint(m);
  const auto pos = text.find("0.25");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 4, "0.5");
  try {
    parse_checkpoint(text);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::Checksum);
  }
}

TEST(Checkpoint, RefusesNonFiniteParameters) {
  auto m = mlp_init(std::vector<std::size_t>{2, 2}, 1);
  m.layers[0].bias[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(save_checkpoint(m, temp_file("inf.json")), CheckpointError);
}

}  // namespace
