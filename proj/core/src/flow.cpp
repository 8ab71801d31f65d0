#include "bas/flow.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bas::flow {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double poly_eval(std::span<const double> c, double t) {
  double acc = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) acc = acc * t + c[k];
  return acc;
}

std::vector<double> poly_derivative(std::span<const double> c) {
  std::vector<double> d;
  for (std::size_t k = 1; k < c.size(); ++k) d.push_back(static_cast<double>(k) * c[k]);
  return d;
}

}  // namespace

// --- TimeProfile -------------------------------------------------------------

TimeProfile TimeProfile::polynomial(std::vector<double> coeffs) {
  return TimeProfile(Polynomial{std::move(coeffs)});
}

TimeProfile TimeProfile::cosine(double amplitude, double frequency, double phase) {
  if (frequency == 0.0) throw std::invalid_argument("TimeProfile::cosine: zero frequency");
  return TimeProfile(Cosine{amplitude, frequency, phase});
}

TimeProfile TimeProfile::exponential(double amplitude, double rate) {
  if (rate == 0.0) throw std::invalid_argument("TimeProfile::exponential: zero rate");
  return TimeProfile(Exponential{amplitude, rate});
}

double TimeProfile::value(double t) const {
  return std::visit(Overloaded{
                        [t](const Polynomial& p) { return poly_eval(p.coeffs, t); },
                        [t](const Cosine& c) {
                          return c.amplitude * std::cos(c.frequency * t + c.phase);
                        },
                        [t](const Exponential& e) { return e.amplitude * std::exp(e.rate * t); },
                    },
                    form_);
}

double TimeProfile::derivative(double t) const {
  return std::visit(Overloaded{
                        [t](const Polynomial& p) { return poly_eval(poly_derivative(p.coeffs), t); },
                        [t](const Cosine& c) {
                          return -c.amplitude * c.frequency * std::sin(c.frequency * t + c.phase);
                        },
                        [t](const Exponential& e) {
                          return e.amplitude * e.rate * std::exp(e.rate * t);
                        },
                    },
                    form_);
}

double TimeProfile::antiderivative(double t) const {
  return std::visit(Overloaded{
                        [t](const Polynomial& p) {
                          double acc = 0.0;
                          for (std::size_t k = p.coeffs.size(); k-- > 0;) {
                            acc = acc * t + p.coeffs[k] / static_cast<double>(k + 1);
                          }
                          return acc * t;
                        },
                        [t](const Cosine& c) {
                          return c.amplitude * std::sin(c.frequency * t + c.phase) / c.frequency;
                        },
                        [t](const Exponential& e) {
                          return e.amplitude * std::exp(e.rate * t) / e.rate;
                        },
                    },
                    form_);
}

std::string TimeProfile::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&os](const Polynomial& p) {
                   os << "poly[";
                   for (std::size_t k = 0; k < p.coeffs.size(); ++k) {
                     os << (k ? "," : "") << p.coeffs[k];
                   }
                   os << "]";
                 },
                 [&os](const Cosine& c) {
                   os << c.amplitude << "*cos(" << c.frequency << "t+" << c.phase << ")";
                 },
                 [&os](const Exponential& e) { os << e.amplitude << "*exp(" << e.rate << "t)"; },
             },
             form_);
  return os.str();
}

// --- AnalyticField -----------------------------------------------------------

AnalyticField::AnalyticField(bool time_only, std::size_t dim, TimeProfile profile,
                             std::vector<double> rates)
    : time_only_(time_only), dim_(dim), profile_(std::move(profile)), rates_(std::move(rates)) {}

AnalyticField AnalyticField::time_only(TimeProfile profile, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("AnalyticField: dim must be >= 1");
  return AnalyticField(true, dim, std::move(profile), std::vector<double>(dim, 0.0));
}

AnalyticField AnalyticField::linear_state(std::vector<double> rates,
                                          std::vector<double> forcing_coeffs) {
  if (rates.empty()) throw std::invalid_argument("AnalyticField: need at least one rate");
  const std::size_t dim = rates.size();
  return AnalyticField(false, dim, TimeProfile::polynomial(std::move(forcing_coeffs)),
                       std::move(rates));
}

double AnalyticField::lipschitz() const {
  double l = 0.0;
  for (double a : rates_) l = std::max(l, std::abs(a));
  return l;
}

std::vector<double> AnalyticField::velocity(std::span<const double> x, double t) const {
  if (x.size() != dim_) throw std::invalid_argument("AnalyticField: state dimension mismatch");
  const double b = profile_.value(t);
  std::vector<double> v(dim_);
  for (std::size_t i = 0; i < dim_; ++i) v[i] = rates_[i] * x[i] + b;
  return v;
}

TensorBuffer AnalyticField::evaluate(const TensorBuffer& states, double t) const {
  if (states.rank() != 2 || states.cols() != dim_) {
    throw std::invalid_argument("AnalyticField::evaluate: state width mismatch");
  }
  TensorBuffer out(states.shape());
  const double b = profile_.value(t);
  for (std::size_t r = 0; r < states.rows(); ++r) {
    for (std::size_t i = 0; i < dim_; ++i) out(r, i) = rates_[i] * states(r, i) + b;
  }
  return out;
}

std::vector<double> AnalyticField::solve(std::span<const double> x_start, double t_start,
                                         double t_end) const {
  if (x_start.size() != dim_) throw std::invalid_argument("AnalyticField: state dimension mismatch");
  std::vector<double> x(dim_);
  if (time_only_) {
    const double displacement = profile_.antiderivative(t_end) - profile_.antiderivative(t_start);
    for (std::size_t i = 0; i < dim_; ++i) x[i] = x_start[i] + displacement;
    return x;
  }

  // dx/dt = a x + b(t), b polynomial. With G(s) = sum_j b^(j)(s) / a^(j+1):
  //   x(t_end) = e^{a (t_end - t_start)} (x_start + G(t_start)) - G(t_end).
  const auto& coeffs = std::get<TimeProfile::Polynomial>(profile_.form()).coeffs;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double a = rates_[i];
    if (a == 0.0) {
      x[i] = x_start[i] + profile_.antiderivative(t_end) - profile_.antiderivative(t_start);
      continue;
    }
    auto g = [&](double s) {
      double total = 0.0;
      double a_pow = a;
      std::vector<double> d(coeffs.begin(), coeffs.end());
      while (!d.empty()) {
        total += poly_eval(d, s) / a_pow;
        d = poly_derivative(d);
        a_pow *= a;
      }
      return total;
    };
    x[i] = std::exp(a * (t_end - t_start)) * (x_start[i] + g(t_start)) - g(t_end);
  }
  return x;
}

std::string AnalyticField::describe() const {
  std::ostringstream os;
  if (time_only_) {
    os << "time_only{" << profile_.describe() << "}";
  } else {
    os << "linear_state{a=[";
    for (std::size_t i = 0; i < rates_.size(); ++i) os << (i ? "," : "") << rates_[i];
    os << "], b=" << profile_.describe() << "}";
  }
  return os.str();
}

std::vector<double> exact_solution(const VelocityField& field, std::span<const double> x1,
                                   double t_end) {
  const auto* analytic = dynamic_cast<const AnalyticField*>(&field);
  if (analytic == nullptr) {
    throw std::invalid_argument("exact_solution: field has no closed-form trajectory");
  }
  return analytic->solve(x1, 1.0, t_end);
}

// --- LearnedField -----------------------------------------------------------

LearnedField::LearnedField(nnet::MlpModel model) : model_(std::move(model)) {
  model_.validate();
  const auto& f = model_.features;
  if (f.state_dim == 0 || model_.input_dim() != f.state_dim + 2 * f.n_freq ||
      model_.output_dim() != f.state_dim) {
    throw std::invalid_argument("LearnedField: model widths do not match [x, features(t)] -> x");
  }
}

nnet::FeatureConfig LearnedField::feature_config(std::size_t state_dim, std::size_t n_freq) {
  return {"backbone", state_dim, n_freq};
}

TensorBuffer backbone_inputs(const TensorBuffer& states, std::span<const double> times,
                             std::size_t n_freq) {
  const std::size_t n = states.rows();
  const std::size_t d = states.cols();
  if (times.size() != n && times.size() != 1) {
    throw std::invalid_argument("backbone_inputs: need one time per row or a shared time");
  }
  TensorBuffer in = TensorBuffer::matrix(n, d + 2 * n_freq);
  std::vector<double> feats;
  for (std::size_t r = 0; r < n; ++r) {
    const double t = times.size() == 1 ? times[0] : times[r];
    if (r == 0 || times.size() != 1) {
      feats.clear();
      nnet::append_sinusoidal_features(t, n_freq, feats);
    }
    auto row = in.row(r);
    for (std::size_t k = 0; k < d; ++k) row[k] = states(r, k);
    for (std::size_t k = 0; k < feats.size(); ++k) row[d + k] = feats[k];
  }
  return in;
}

TensorBuffer LearnedField::evaluate(const TensorBuffer& states, double t) const {
  if (states.rank() != 2 || states.cols() != dim()) {
    throw std::invalid_argument("LearnedField::evaluate: state width mismatch");
  }
  const double times[1] = {t};
  return nnet::mlp_forward(model_, backbone_inputs(states, times, model_.features.n_freq));
}

// --- flow-matching construction ---------------------------------------------

TensorBuffer linear_interpolant(const TensorBuffer& x_data, const TensorBuffer& x_noise,
                                double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("linear_interpolant: t outside [0, 1]");
  if (!x_data.same_shape(x_noise)) throw std::invalid_argument("linear_interpolant: shape mismatch");
  TensorBuffer out(x_data.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * x_data[i] + t * x_noise[i];
  return out;
}

std::vector<double> linear_interpolant(std::span<const double> x_data,
                                       std::span<const double> x_noise, double t) {
  const TensorBuffer out =
      linear_interpolant(TensorBuffer::row_vector(x_data), TensorBuffer::row_vector(x_noise), t);
  return {out.values().begin(), out.values().end()};
}

TensorBuffer fm_target(const TensorBuffer& x_data, const TensorBuffer& x_noise) {
  if (!x_data.same_shape(x_noise)) throw std::invalid_argument("fm_target: dimension mismatch");
  TensorBuffer out(x_data.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_noise[i] - x_data[i];
  return out;
}

FlowProblem FlowProblem::from_dataset(data::DatasetKind kind) {
  return {std::string(data::to_string(kind)), 2,
          [kind](std::size_t n, Rng& rng) { return data::draw_points(kind, n, rng); }};
}

FlowProblem FlowProblem::point_mass(std::vector<double> location) {
  const std::size_t d = location.size();
  if (d == 0) throw std::invalid_argument("FlowProblem::point_mass: empty location");
  return {"point_mass", d, [location = std::move(location)](std::size_t n, Rng&) {
            TensorBuffer out = TensorBuffer::matrix(n, location.size());
            for (std::size_t r = 0; r < n; ++r) {
              for (std::size_t k = 0; k < location.size(); ++k) out(r, k) = location[k];
            }
            return out;
          }};
}

TensorBuffer sample_noise(std::size_t n, std::size_t dim, Rng& rng) {
  TensorBuffer out = TensorBuffer::matrix(n, dim);
  for (double& v : out.values()) v = standard_normal(rng);
  return out;
}

BackboneTrainResult train_backbone(const FlowProblem& problem, const BackboneTrainConfig& config) {
  if (config.batch_size == 0) throw std::invalid_argument("train_backbone: batch_size must be >= 1");
  std::vector<std::size_t> dims{problem.dim + 2 * config.n_freq};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(problem.dim);
  nnet::MlpModel model = nnet::mlp_init(dims, derive_seed(config.seed, 0),
                                        LearnedField::feature_config(problem.dim, config.n_freq));

  Rng rng(derive_seed(config.seed, 1));
  nnet::AdamState adam = nnet::adam_init(model, config.learning_rate);
  std::vector<double> losses;
  losses.reserve(config.iterations);
  std::vector<double> times(config.batch_size);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const TensorBuffer x_data = problem.sample_data(config.batch_size, rng);
    const TensorBuffer x_noise = sample_noise(config.batch_size, problem.dim, rng);
    TensorBuffer x_t(x_data.shape());
    for (std::size_t r = 0; r < config.batch_size; ++r) {
      const double t = uniform01(rng);
      times[r] = t;
      for (std::size_t k = 0; k < problem.dim; ++k) {
        x_t(r, k) = (1.0 - t) * x_data(r, k) + t * x_noise(r, k);
      }
    }
    const TensorBuffer inputs = backbone_inputs(x_t, times, config.n_freq);
    const TensorBuffer targets = fm_target(x_data, x_noise);
    auto [loss, grads] = nnet::grad_mse(model, inputs, targets);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("train_backbone: non-finite loss at iteration " +
                               std::to_string(it));
    }
    losses.push_back(loss);
    nnet::adam_step(model, grads, adam);
  }
  return {LearnedField(std::move(model)), std::move(losses)};
}

}  // namespace bas::flow
