#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bas/nnet.hpp"

namespace bas::quadrature {

enum class QuadratureKind {
  GaussLegendre3,
  GaussLobatto4,
  Simpson3,
  // Two-point Lobatto (trapezoid): anchors only, no intermediate nodes.
  Trapezoid2,
};

std::string_view to_string(QuadratureKind kind);
QuadratureKind parse_quadrature_kind(std::string_view name);

/// Fixed rule on the reference interval [0, 1]; weights sum to one.
struct QuadratureRule {
  QuadratureKind kind = QuadratureKind::GaussLobatto4;
  std::vector<double> nodes;
  std::vector<double> weights;
  int exactness_degree = 0;
  bool includes_endpoints = false;

  std::size_t size() const { return nodes.size(); }
  /// Nodes strictly inside (0, 1).
  std::size_t interior_count() const;
};

QuadratureRule make_rule(QuadratureKind kind);

/// Reference node u maps to tau = t - h*u, so the returned times descend from
/// t toward t - h.
std::vector<double> map_nodes(const QuadratureRule& rule, double t, double h);

/// h * sum_i w_i * values_i, one batch of velocities per node.
TensorBuffer apply(const QuadratureRule& rule, std::span<const TensorBuffer> node_values,
                   double h);
double apply(const QuadratureRule& rule, std::span<const double> node_values, double h);

/// Largest d such that every monomial u^0..u^d integrates over [0, 1] within
/// 1e-12. Returns -1 if even the constant fails.
int exactness_check(const QuadratureRule& rule);

}  // namespace bas::quadrature
