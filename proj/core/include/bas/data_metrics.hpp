#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "bas/nnet.hpp"
#include "bas/random.hpp"

namespace bas::data {

/// Two-dimensional toy distributions.
///
///  * two_moons: angle ~ U[0, pi], each moon with probability 1/2; upper moon
///    (cos a, sin a), lower moon (1 - cos a, 0.5 - sin a); N(0, 0.05^2)
///    jitter; then centred by (0.5, 0.25) and scaled by 2.
///  * gaussian_ring8: eight equal-weight components with means
///    2 (cos k pi/4, sin k pi/4) and isotropic std 0.1.
///  * checkerboard: uniform over the eight dark cells of a 4x4 board on
///    [-2, 2]^2, where cell (col, row) is dark iff col + row is even.
enum class DatasetKind { TwoMoons, GaussianRing8, Checkerboard };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view name);

struct SampleSet {
  TensorBuffer points;  // n x d
  std::string provenance;
};

/// Draws n points using the supplied stream.
TensorBuffer draw_points(DatasetKind kind, std::size_t n, Rng& rng);

SampleSet sample_dataset(DatasetKind kind, std::size_t n, std::uint64_t seed);

/// Exact 1-D Wasserstein-1 distance between two empirical measures, via the
/// integral of |F_a^{-1} - F_b^{-1}| over merged quantile breakpoints.
double wasserstein1_1d(std::vector<double> a, std::vector<double> b);

/// Mean of the 1-D W1 distance over random unit projections.
double sliced_wasserstein(const TensorBuffer& a, const TensorBuffer& b,
                          std::size_t n_projections, std::uint64_t seed);

/// V-statistic estimate of 2E|A-B| - E|A-A'| - E|B-B'|.
double energy_distance(const TensorBuffer& a, const TensorBuffer& b);

}  // namespace bas::data
