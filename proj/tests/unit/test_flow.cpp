#include <gtest/gtest.h>

#include <cmath>

#include "bas/flow.hpp"
#include "bas/solvers.hpp"

namespace {

using namespace bas::flow;
using bas::TensorBuffer;

// Plain explicit Euler on the closed-form field, with Richardson extrapolation
// 2 E(n) - E(n/2) to cancel the first-order term.
std::vector<double> euler_reference(const AnalyticField& f, std::vector<double> x1, double t_end,
                                    std::size_t steps) {
  auto run = [&](std::size_t n) {
    std::vector<double> x = x1;
    const double h = (1.0 - t_end) / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 1.0 - h * static_cast<double>(i);
      const auto v = f.velocity(x, t);
      for (std::size_t k = 0; k < x.size(); ++k) x[k] -= h * v[k];
    }
    return x;
  };
  const auto fine = run(steps);
  const auto coarse = run(steps / 2);
  std::vector<double> out(fine.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = 2.0 * fine[k] - coarse[k];
  return out;
}

// Conditional velocity of a single (data, noise) pair: constant in x and t.
class PairField final : public VelocityField {
 public:
  PairField(TensorBuffer data, TensorBuffer noise)
      : v_(fm_target(data, noise)) {}
  std::size_t dim() const override { return v_.cols(); }
  FieldKind kind() const override { return FieldKind::Analytic; }
  TensorBuffer evaluate(const TensorBuffer&, double) const override { return v_; }

 private:
  TensorBuffer v_;
};

TEST(LinearInterpolant, Endpoints) {
  const std::vector<double> d{0.3, -1.0}, n{2.0, 5.0};
  EXPECT_EQ(linear_interpolant(d, n, 0.0), d);
  EXPECT_EQ(linear_interpolant(d, n, 1.0), n);
  EXPECT_EQ(linear_interpolant(std::vector<double>{0, 0}, std::vector<double>{2, -2}, 0.25),
            (std::vector<double>{0.5, -0.5}));
}

TEST(LinearInterpolant, TimeOutsideUnitInterval) {
  const auto a = TensorBuffer::matrix(1, 2);
  EXPECT_THROW(linear_interpolant(a, a, -0.01), std::invalid_argument);
  EXPECT_THROW(linear_interpolant(a, a, 1.01), std::invalid_argument);
}

TEST(FmTarget, Examples) {
  const auto x = TensorBuffer::row_vector(std::vector<double>{1.0, 1.0});
  EXPECT_EQ(fm_target(x, x), TensorBuffer::matrix(1, 2));
  const auto n = TensorBuffer::row_vector(std::vector<double>{3.0, 0.0});
  EXPECT_EQ(fm_target(x, n), TensorBuffer::row_vector(std::vector<double>{2.0, -1.0}));
  EXPECT_THROW(fm_target(x, TensorBuffer::matrix(1, 3)), std::invalid_argument);
}

TEST(FmTarget, IsTimeDerivativeOfInterpolant) {
  bas::Rng rng(3);
  const auto d = sample_noise(5, 2, rng);
  const auto n = sample_noise(5, 2, rng);
  const auto v = fm_target(d, n);
  for (double t : {0.1, 0.5, 0.9}) {
    const auto a = linear_interpolant(d, n, t);
    const auto b = linear_interpolant(d, n, t + 0.01);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR((b[i] - a[i]) / 0.01, v[i], 1e-12);
  }
}

TEST(FmTarget, EulerLandsOnData) {
  bas::Rng rng(4);
  const auto d = sample_noise(3, 2, rng);
  const auto n = sample_noise(3, 2, rng);
  const PairField field(d, n);
  for (std::size_t steps : {1, 2, 7, 50}) {
    const auto out = bas::solvers::euler_solve(field, n, steps).final_state;
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], d[i], 1e-13);
  }
}

TEST(CountedField, CountsOnePerCall) {
  const auto f = AnalyticField::time_only(TimeProfile::cosine(), 2);
  CountedField counted(f);
  const auto x = TensorBuffer::matrix(64, 2);
  counted(x, 0.5);
  counted(x, 0.4);
  EXPECT_EQ(counted.nfe(), 2u);
}

TEST(ExactSolution, CosineFromZero) {
  const auto f = AnalyticField::time_only(TimeProfile::cosine());
  const auto x = exact_solution(f, std::vector<double>{0.0}, 0.0);
  EXPECT_NEAR(x[0], -std::sin(1.0), 1e-15);
}

TEST(ExactSolution, ZeroFieldIsStationary) {
  const auto f = AnalyticField::time_only(TimeProfile::polynomial({0.0}), 3);
  const std::vector<double> x1{0.5, -2.0, 3.0};
  EXPECT_EQ(exact_solution(f, x1, 0.2), x1);
}

TEST(ExactSolution, LinearStateSignConvention) {
  const auto f = AnalyticField::linear_state({1.0});
  for (double t_end : {0.0, 0.3, 0.75}) {
    const auto x = exact_solution(f, std::vector<double>{1.5}, t_end);
    EXPECT_NEAR(x[0], 1.5 * std::exp(-(1.0 - t_end)), 1e-15);
  }
}

TEST(ExactSolution, RejectsLearnedField) {
  const auto model = bas::nnet::mlp_init(std::vector<std::size_t>{4, 3, 2}, 1,
                                         LearnedField::feature_config(2, 1));
  const LearnedField learned(model);
  EXPECT_THROW(exact_solution(learned, std::vector<double>{0, 0}, 0.0), std::invalid_argument);
}

// Guards the oracle: closed forms agree with a 10^6-step Euler integration.
TEST(ExactSolution, AgreesWithFineEuler) {
  const std::vector<AnalyticField> fields{
      AnalyticField::time_only(TimeProfile::cosine(), 2),
      AnalyticField::time_only(TimeProfile::cosine(1.5, 3.0, 0.4), 1),
      AnalyticField::time_only(TimeProfile::polynomial({1.0, -2.0, 0.5, 3.0}), 1),
      AnalyticField::time_only(TimeProfile::exponential(0.7, -1.3), 1),
      AnalyticField::linear_state({1.0}),
      AnalyticField::linear_state({-1.0, 0.5}, {1.0, 2.0, -0.5}),
  };
  for (const auto& f : fields) {
    std::vector<double> x1(f.dim());
    for (std::size_t k = 0; k < x1.size(); ++k) x1[k] = 0.8 - 0.5 * static_cast<double>(k);
    const auto exact = exact_solution(f, x1, 0.0);
    const auto approx = euler_reference(f, x1, 0.0, 1'000'000);
    for (std::size_t k = 0; k < exact.size(); ++k) {
      EXPECT_LE(std::abs(exact[k] - approx[k]), 1e-8 * std::max(1.0, std::abs(exact[k])))
          << f.describe();
    }
  }
}

TEST(AnalyticField, SolveComposes) {
  const auto f = AnalyticField::linear_state({-0.6, 1.2}, {0.3, -1.0, 2.0});
  const std::vector<double> x{0.4, -0.9};
  const auto mid = f.solve(x, 0.9, 0.5);
  const auto direct = f.solve(x, 0.9, 0.1);
  const auto chained = f.solve(mid, 0.5, 0.1);
  for (std::size_t k = 0; k < 2; ++k) EXPECT_NEAR(direct[k], chained[k], 1e-14);
}

TEST(AnalyticField, TimeProfileDerivatives) {
  const std::vector<TimeProfile> profiles{TimeProfile::cosine(2.0, 1.7, 0.3),
                                          TimeProfile::polynomial({1.0, 2.0, -3.0}),
                                          TimeProfile::exponential(0.5, 2.0)};
  for (const auto& p : profiles) {
    for (double t : {0.1, 0.5, 0.8}) {
      const double e = 1e-5;
      EXPECT_NEAR((p.value(t + e) - p.value(t - e)) / (2 * e), p.derivative(t), 1e-8)
          << p.describe();
      EXPECT_NEAR((p.antiderivative(t + e) - p.antiderivative(t - e)) / (2 * e), p.value(t), 1e-8);
    }
  }
}

TEST(TrainBackbone, ZeroIterationsReturnsInitialisedField) {
  BackboneTrainConfig cfg;
  cfg.iterations = 0;
  cfg.hidden = {8};
  cfg.seed = 5;
  const auto result = train_backbone(FlowProblem::point_mass({1.0, -1.0}), cfg);
  EXPECT_TRUE(result.loss_curve.empty());
  const std::vector<std::size_t> dims{2 + 2 * cfg.n_freq, 8, 2};
  EXPECT_EQ(result.field.model(),
            bas::nnet::mlp_init(dims, bas::derive_seed(5, 0), LearnedField::feature_config(2, 4)));
  CountedField counted(result.field);
  EXPECT_EQ(counted.nfe(), 0u);
}

TEST(TrainBackbone, Deterministic) {
  BackboneTrainConfig cfg;
  cfg.iterations = 20;
  cfg.hidden = {16};
  cfg.batch_size = 32;
  cfg.seed = 77;
  const auto problem = FlowProblem::from_dataset(bas::data::DatasetKind::TwoMoons);
  const auto a = train_backbone(problem, cfg);
  const auto b = train_backbone(problem, cfg);
  EXPECT_EQ(a.field.model(), b.field.model());
  EXPECT_EQ(a.loss_curve, b.loss_curve);
}

// For data at a single point x0 the marginal field is (x - x0) / t, so an
// accurate backbone carries every noise draw to x0.
TEST(TrainBackbone, PointMassConverges) {
  const std::vector<double> x0{1.0, -0.5};
  BackboneTrainConfig cfg;
  cfg.iterations = 1500;
  cfg.hidden = {32, 32};
  cfg.batch_size = 128;
  cfg.learning_rate = 3e-3;
  cfg.seed = 9;
  const auto result = train_backbone(FlowProblem::point_mass(x0), cfg);
  bas::Rng rng(10);
  const auto noise = sample_noise(500, 2, rng);
  const auto samples = bas::solvers::euler_solve(result.field, noise, 100).final_state;
  for (std::size_t k = 0; k < 2; ++k) {
    double mean = 0.0;
    for (std::size_t r = 0; r < samples.rows(); ++r) mean += samples(r, k);
    mean /= static_cast<double>(samples.rows());
    EXPECT_NEAR(mean, x0[k], 0.1);
  }
  EXPECT_LT(result.loss_curve.back(), result.loss_curve.front());
}

}  // namespace
