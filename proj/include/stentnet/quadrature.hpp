// Gauss-Legendre rules on intervals, composite rules over meshes, and
// cumulative (prefix) quadrature for evaluating s -> integral_0^s f.
#pragma once

#include <cassert>
#include <cmath>
#include <functional>
#include <vector>

#include "stentnet/core.hpp"

namespace stentnet {

/// Nodes and weights on an interval. `degree` is the highest polynomial
/// degree integrated exactly.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int degree = -1;

  /// n-point Gauss-Legendre on [a, b]. Nodes via Newton on the Legendre
  /// recurrence, accurate to machine precision for any n.
  static QuadratureRule gauss_legendre(int n, double a, double b) {
    assert(n >= 1);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    rule.degree = 2 * n - 1;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      double w = 2.0 / ((1.0 - x * x) * dp * dp);
      rule.nodes[i] = mid - half * x;
      rule.nodes[n - 1 - i] = mid + half * x;
      rule.weights[i] = half * w;
      rule.weights[n - 1 - i] = half * w;
    }
    return rule;
  }

  /// Composite Gauss rule: `pts` points on each interval of `breaks`.
  static QuadratureRule composite(const std::vector<double>& breaks, int pts) {
    assert(breaks.size() >= 2);
    QuadratureRule rule;
    rule.degree = 2 * pts - 1;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      QuadratureRule panel = gauss_legendre(pts, breaks[k], breaks[k + 1]);
      rule.nodes.insert(rule.nodes.end(), panel.nodes.begin(), panel.nodes.end());
      rule.weights.insert(rule.weights.end(), panel.weights.begin(), panel.weights.end());
    }
    return rule;
  }

  /// Uniform composite rule with `panels` panels on [a, b].
  static QuadratureRule uniform_composite(double a, double b, int panels, int pts) {
    std::vector<double> breaks(panels + 1);
    for (int k = 0; k <= panels; ++k) breaks[k] = a + (b - a) * k / panels;
    return composite(breaks, pts);
  }
};

template <typename F>
auto integrate(const QuadratureRule& rule, F&& f) -> decltype(f(0.0)) {
  auto acc = decltype(f(0.0))(rule.weights[0] * f(rule.nodes[0]));
  for (std::size_t i = 1; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(rule.nodes[i]);
  return acc;
}

/// Quadrature approximation of integral over the rule's support of a
/// matrix-valued integrand.
template <typename F>
MatX integrate_matrix_rule(const QuadratureRule& rule, F&& f) {
  MatX acc = rule.weights[0] * f(rule.nodes[0]);
  for (std::size_t i = 1; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(rule.nodes[i]);
  return acc;
}

/// Prefix quadrature of a vector-valued function on [0, len]: after
/// construction, operator()(x) evaluates integral_0^x f to quadrature accuracy.
/// Panel prefix sums are precomputed; a query integrates only the partial
/// panel containing x.
class CumulativeIntegral {
 public:
  CumulativeIntegral() = default;

  CumulativeIntegral(std::function<VecX(double)> f, double len, int panels = 64, int pts = 12)
      : f_(std::move(f)), len_(len), panels_(panels), pts_(pts) {
    VecX first = f_(0.0);
    dim_ = static_cast<int>(first.size());
    prefix_.resize(panels_ + 1, VecX::Zero(dim_));
    for (int k = 0; k < panels_; ++k) {
      QuadratureRule panel =
          QuadratureRule::gauss_legendre(pts_, x_at(k), x_at(k + 1));
      VecX acc = VecX::Zero(dim_);
      for (std::size_t i = 0; i < panel.nodes.size(); ++i)
        acc += panel.weights[i] * f_(panel.nodes[i]);
      prefix_[k + 1] = prefix_[k] + acc;
    }
  }

  VecX operator()(double x) const {
    if (x <= 0.0) return VecX::Zero(dim_);
    if (x >= len_) return prefix_[panels_];
    int k = std::min(panels_ - 1, static_cast<int>(x / len_ * panels_));
    double a = x_at(k);
    if (x <= a) return prefix_[k];
    QuadratureRule tail = QuadratureRule::gauss_legendre(pts_, a, x);
    VecX acc = prefix_[k];
    for (std::size_t i = 0; i < tail.nodes.size(); ++i)
      acc += tail.weights[i] * f_(tail.nodes[i]);
    return acc;
  }

  VecX total() const { return prefix_[panels_]; }
  double length() const { return len_; }

 private:
  double x_at(int k) const { return len_ * k / panels_; }

  std::function<VecX(double)> f_;
  double len_ = 0.0;
  int panels_ = 0, pts_ = 0, dim_ = 0;
  std::vector<VecX> prefix_;
};

}  // namespace stentnet
