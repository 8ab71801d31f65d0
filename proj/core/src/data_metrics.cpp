#include "bas/data_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bas::data {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::TwoMoons: return "two_moons";
    case DatasetKind::GaussianRing8: return "gaussian_ring8";
    case DatasetKind::Checkerboard: return "checkerboard";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  for (auto kind : {DatasetKind::TwoMoons, DatasetKind::GaussianRing8, DatasetKind::Checkerboard}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown dataset '" + std::string(name) + "'");
}

TensorBuffer draw_points(DatasetKind kind, std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("draw_points: n must be >= 1");
  TensorBuffer out = TensorBuffer::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = out.row(i);
    switch (kind) {
      case DatasetKind::TwoMoons: {
        const double a = std::numbers::pi * uniform01(rng);
        const bool upper = uniform01(rng) < 0.5;
        double x = upper ? std::cos(a) : 1.0 - std::cos(a);
        double y = upper ? std::sin(a) : 0.5 - std::sin(a);
        x += 0.05 * standard_normal(rng);
        y += 0.05 * standard_normal(rng);
        p[0] = 2.0 * (x - 0.5);
        p[1] = 2.0 * (y - 0.25);
        break;
      }
      case DatasetKind::GaussianRing8: {
        const auto k = static_cast<int>(std::min(7.0, std::floor(8.0 * uniform01(rng))));
        const double angle = k * std::numbers::pi / 4.0;
        p[0] = 2.0 * std::cos(angle) + 0.1 * standard_normal(rng);
        p[1] = 2.0 * std::sin(angle) + 0.1 * standard_normal(rng);
        break;
      }
      case DatasetKind::Checkerboard: {
        const double x = 4.0 * uniform01(rng) - 2.0;
        const int col = std::clamp(static_cast<int>(std::floor(x + 2.0)), 0, 3);
        const int row = 2 * (uniform01(rng) < 0.5 ? 0 : 1) + (col % 2);
        p[0] = x;
        p[1] = static_cast<double>(row) - 2.0 + uniform01(rng);
        break;
      }
    }
  }
  return out;
}

SampleSet sample_dataset(DatasetKind kind, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_dataset: n must be >= 1");
  Rng rng(seed);
  return {draw_points(kind, n, rng),
          std::string("dataset:") + std::string(to_string(kind)) + ":seed=" +
              std::to_string(seed)};
}

double wasserstein1_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1_1d: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum / static_cast<double>(a.size());
  }
  // Walk the merged quantile grid; both inverse CDFs are piecewise constant.
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double q = 0.0, total = 0.0;
  while (i < a.size() && j < b.size()) {
    const double next_a = static_cast<double>(i + 1) / na;
    const double next_b = static_cast<double>(j + 1) / nb;
    const double next = std::min(next_a, next_b);
    total += (next - q) * std::abs(a[i] - b[j]);
    q = next;
    if (next_a <= next) ++i;
    if (next_b <= next) ++j;
  }
  return total;
}

double sliced_wasserstein(const TensorBuffer& a, const TensorBuffer& b,
                          std::size_t n_projections, std::uint64_t seed) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw std::invalid_argument("sliced_wasserstein: dimension mismatch");
  }
  if (n_projections == 0) throw std::invalid_argument("sliced_wasserstein: no projections");
  const std::size_t d = a.cols();
  Rng rng(seed);
  std::vector<double> theta(d), pa(a.rows()), pb(b.rows());
  double total = 0.0;
  for (std::size_t p = 0; p < n_projections; ++p) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& c : theta) {
        c = standard_normal(rng);
        norm += c * c;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& c : theta) c /= norm;
    auto project = [&](const TensorBuffer& m, std::vector<double>& out) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += theta[k] * m(r, k);
        out[r] = s;
      }
    };
    project(a, pa);
    project(b, pb);
    total += wasserstein1_1d(pa, pb);
  }
  return total / static_cast<double>(n_projections);
}

namespace {

double mean_pairwise(const TensorBuffer& a, const TensorBuffer& b) {
  const std::size_t d = a.cols();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto x = a.row(i);
    double row_sum = 0.0;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto y = b.row(j);
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = x[k] - y[k];
        sq += diff * diff;
      }
      row_sum += std::sqrt(sq);
    }
    sum += row_sum;
  }
  return sum / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double energy_distance(const TensorBuffer& a, const TensorBuffer& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw std::invalid_argument("energy_distance: dimension mismatch");
  }
  return 2.0 * mean_pairwise(a, b) - mean_pairwise(a, a) - mean_pairwise(b, b);
}

}  // namespace bas::data
