#include "bas/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace bas::quadrature {

std::string_view to_string(QuadratureKind kind) {
  switch (kind) {
    case QuadratureKind::GaussLegendre3: return "gauss_legendre3";
    case QuadratureKind::GaussLobatto4: return "gauss_lobatto4";
    case QuadratureKind::Simpson3: return "simpson3";
    case QuadratureKind::Trapezoid2: return "trapezoid2";
  }
  return "unknown";
}

QuadratureKind parse_quadrature_kind(std::string_view name) {
  for (auto kind : {QuadratureKind::GaussLegendre3, QuadratureKind::GaussLobatto4,
                    QuadratureKind::Simpson3, QuadratureKind::Trapezoid2}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown quadrature rule '" + std::string(name) + "'");
}

std::size_t QuadratureRule::interior_count() const {
  std::size_t n = 0;
  for (double u : nodes) {
    if (u > 0.0 && u < 1.0) ++n;
  }
  return n;
}

QuadratureRule make_rule(QuadratureKind kind) {
  QuadratureRule rule;
  rule.kind = kind;
  switch (kind) {
    case QuadratureKind::GaussLegendre3: {
      const double r = 0.5 * std::sqrt(3.0 / 5.0);
      rule.nodes = {0.5 - r, 0.5, 0.5 + r};
      rule.weights = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
      rule.exactness_degree = 5;
      rule.includes_endpoints = false;
      break;
    }
    case QuadratureKind::GaussLobatto4: {
      const double r = 0.5 / std::sqrt(5.0);
      rule.nodes = {0.0, 0.5 - r, 0.5 + r, 1.0};
      rule.weights = {1.0 / 12.0, 5.0 / 12.0, 5.0 / 12.0, 1.0 / 12.0};
      rule.exactness_degree = 5;
      rule.includes_endpoints = true;
      break;
    }
    case QuadratureKind::Simpson3:
      rule.nodes = {0.0, 0.5, 1.0};
      rule.weights = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
      rule.exactness_degree = 3;
      rule.includes_endpoints = true;
      break;
    case QuadratureKind::Trapezoid2:
      rule.nodes = {0.0, 1.0};
      rule.weights = {0.5, 0.5};
      rule.exactness_degree = 1;
      rule.includes_endpoints = true;
      break;
  }
  if (exactness_check(rule) != rule.exactness_degree) {
    throw std::logic_error("quadrature rule " + std::string(to_string(kind)) +
                           " failed its exactness self-check");
  }
  return rule;
}

std::vector<double> map_nodes(const QuadratureRule& rule, double t, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("map_nodes: interval size must be positive");
  std::vector<double> times;
  times.reserve(rule.nodes.size());
  for (double u : rule.nodes) times.push_back(t - h * u);
  return times;
}

TensorBuffer apply(const QuadratureRule& rule, std::span<const TensorBuffer> node_values,
                   double h) {
  if (node_values.size() != rule.nodes.size()) {
    throw std::invalid_argument("quadrature::apply: expected " +
                                std::to_string(rule.nodes.size()) + " node values, got " +
                                std::to_string(node_values.size()));
  }
  TensorBuffer sum(node_values.front().shape());
  for (std::size_t i = 0; i < node_values.size(); ++i) {
    if (!node_values[i].same_shape(sum)) {
      throw std::invalid_argument("quadrature::apply: node value shapes differ");
    }
    const double w = rule.weights[i];
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += w * node_values[i][k];
  }
  for (double& v : sum.values()) v *= h;
  return sum;
}

double apply(const QuadratureRule& rule, std::span<const double> node_values, double h) {
  if (node_values.size() != rule.nodes.size()) {
    throw std::invalid_argument("quadrature::apply: node count mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < node_values.size(); ++i) sum += rule.weights[i] * node_values[i];
  return h * sum;
}

int exactness_check(const QuadratureRule& rule) {
  constexpr int kMaxDegree = 16;
  for (int d = 0; d <= kMaxDegree; ++d) {
    double estimate = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      estimate += rule.weights[i] * std::pow(rule.nodes[i], d);
    }
    if (std::abs(estimate - 1.0 / (d + 1)) > 1e-12) return d - 1;
  }
  return kMaxDegree;
}

}  // namespace bas::quadrature
