// Arc-length parametrized middle-line curves, orthonormal frames along them,
// and the skew-matrix helper used throughout the graph algebra.
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "stentnet/core.hpp"
#include "stentnet/quadrature.hpp"

namespace stentnet {

/// Skew-symmetric matrix of v: skew(v) * x == v.cross(x).
inline Mat3 skew(const Vec3& v) {
  Mat3 a;
  a << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return a;
}

/// Right-handed orthonormal triple at a point of a curve; b == t.cross(n).
struct Frame {
  Vec3 t, n, b;
};

enum class CurveKind { Straight, Arc, Polyline };

namespace detail {

// Deterministic normal for a given tangent: normalize(e3 x t), falling back
// to e2 x t when t is (nearly) parallel to e3.
inline Frame frame_from_tangent(const Vec3& t) {
  Vec3 n = Vec3::UnitZ().cross(t);
  if (n.norm() < 1e-8) n = Vec3::UnitY().cross(t);
  n.normalize();
  Frame fr;
  fr.t = t;
  fr.n = n;
  fr.b = t.cross(n);
  return fr;
}

struct StraightData {
  Vec3 p0, p1;
  Vec3 t;
  double len;
};

struct ArcData {
  Vec3 center, axis_raw, start_point;
  double sweep;
  // derived
  Vec3 u, v, w;  // radial at s=0, in-plane normal to u, unit axis
  double radius, dir, len;
};

struct PolylineData {
  std::vector<Vec3> points;
  std::vector<double> param;  // cumulative chord parameter
  std::vector<Vec3> deriv;    // dC/dt at the control points
  double len = 0.0;

  // arc-length table at panel boundaries of the spline parameter
  std::vector<double> tgrid, sgrid;

  // rotation-minimizing frames cached on an arc-length grid
  std::vector<double> rmf_s;
  std::vector<Frame> rmf;

  CumulativeIntegral point_prefix;  // s -> integral_0^s C

  std::pair<int, double> segment(double t) const {
    int n = static_cast<int>(points.size()) - 1;
    int k = static_cast<int>(std::upper_bound(param.begin(), param.end(), t) -
                             param.begin()) - 1;
    k = std::clamp(k, 0, n - 1);
    return {k, t};
  }

  Vec3 eval(double t) const {
    auto [k, tt] = segment(t);
    double h = param[k + 1] - param[k];
    double x = (tt - param[k]) / h;
    double h00 = (1 + 2 * x) * (1 - x) * (1 - x);
    double h10 = x * (1 - x) * (1 - x);
    double h01 = x * x * (3 - 2 * x);
    double h11 = x * x * (x - 1);
    return h00 * points[k] + h10 * h * deriv[k] + h01 * points[k + 1] +
           h11 * h * deriv[k + 1];
  }

  Vec3 eval_deriv(double t) const {
    auto [k, tt] = segment(t);
    double h = param[k + 1] - param[k];
    double x = (tt - param[k]) / h;
    double d00 = 6 * x * (x - 1);
    double d10 = (1 - x) * (1 - 3 * x);
    double d01 = 6 * x * (1 - x);
    double d11 = x * (3 * x - 2);
    return (d00 * points[k] + d01 * points[k + 1]) / h + d10 * deriv[k] +
           d11 * deriv[k + 1];
  }

  double speed(double t) const { return eval_deriv(t).norm(); }

  // arc length from tgrid[k] to t, t inside panel k
  double partial_len(int k, double t) const {
    if (t <= tgrid[k]) return 0.0;
    QuadratureRule q = QuadratureRule::gauss_legendre(12, tgrid[k], t);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i)
      acc += q.weights[i] * speed(q.nodes[i]);
    return acc;
  }

  double param_at(double s) const {
    if (s <= 0.0) return param.front();
    if (s >= len) return param.back();
    int k = static_cast<int>(std::upper_bound(sgrid.begin(), sgrid.end(), s) -
                             sgrid.begin()) - 1;
    k = std::clamp(k, 0, static_cast<int>(sgrid.size()) - 2);
    double lo = tgrid[k], hi = tgrid[k + 1];
    double t = lo + (hi - lo) * (s - sgrid[k]) / (sgrid[k + 1] - sgrid[k]);
    for (int it = 0; it < 60; ++it) {
      double g = sgrid[k] + partial_len(k, t) - s;
      if (g > 0)
        hi = t;
      else
        lo = t;
      double sp = speed(t);
      double tn = t - g / sp;
      if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
      if (std::abs(tn - t) < 1e-15 * std::max(1.0, param.back())) {
        t = tn;
        break;
      }
      t = tn;
    }
    return t;
  }
};

}  // namespace detail

/// Arc-length parametrized curve: |Phi'(s)| = 1 on [0, length()].
///
/// Three kinds are supported. Straight segments and circular arcs are exact;
/// polylines are interpolated by a C^1 cubic Hermite spline through the given
/// points and reparametrized by arc length numerically.
class ParamCurve {
 public:
  /// Unit segment along e1; placeholder so curve-holding aggregates are
  /// default-constructible.
  ParamCurve() { *this = straight(Vec3::Zero(), Vec3::UnitX()); }

  static ParamCurve straight(const Vec3& p0, const Vec3& p1) {
    detail::StraightData d;
    d.p0 = p0;
    d.p1 = p1;
    d.len = (p1 - p0).norm();
    if (d.len <= 0.0) throw ValidationError("straight segment endpoints coincide");
    d.t = (p1 - p0) / d.len;
    ParamCurve c{Raw{}};
    c.kind_ = CurveKind::Straight;
    c.straight_ = d;
    return c;
  }

  /// Circular arc of signed sweep angle (right-hand rule about `axis`)
  /// starting at `start_point`; the radius is |start_point - center|.
  static ParamCurve arc(const Vec3& center, const Vec3& axis, const Vec3& start_point,
                        double sweep) {
    detail::ArcData d;
    d.center = center;
    d.axis_raw = axis;
    d.start_point = start_point;
    d.sweep = sweep;
    if (axis.norm() <= 0.0) throw ValidationError("arc axis must be nonzero");
    if (sweep == 0.0) throw ValidationError("arc sweep must be nonzero");
    d.w = axis.normalized();
    Vec3 radial = start_point - center;
    d.radius = radial.norm();
    if (d.radius <= 0.0) throw ValidationError("arc start point coincides with center");
    if (std::abs(radial.dot(d.w)) > 1e-9 * d.radius)
      throw ValidationError("arc start point does not lie in the plane through the center");
    d.u = (radial - radial.dot(d.w) * d.w).normalized();
    d.v = d.w.cross(d.u);
    d.dir = sweep > 0 ? 1.0 : -1.0;
    d.len = d.radius * std::abs(sweep);
    ParamCurve c{Raw{}};
    c.kind_ = CurveKind::Arc;
    c.arc_ = d;
    return c;
  }

  static ParamCurve polyline(std::vector<Vec3> points) {
    if (points.size() < 2) throw ValidationError("polyline needs at least two points");
    auto d = std::make_shared<detail::PolylineData>();
    d->points = std::move(points);
    int n = static_cast<int>(d->points.size());
    d->param.resize(n);
    d->param[0] = 0.0;
    for (int k = 1; k < n; ++k) {
      double chord = (d->points[k] - d->points[k - 1]).norm();
      if (chord <= 0.0) throw ValidationError("polyline has repeated consecutive points");
      d->param[k] = d->param[k - 1] + chord;
    }
    d->deriv.resize(n);
    d->deriv[0] = (d->points[1] - d->points[0]) / (d->param[1] - d->param[0]);
    d->deriv[n - 1] =
        (d->points[n - 1] - d->points[n - 2]) / (d->param[n - 1] - d->param[n - 2]);
    for (int k = 1; k + 1 < n; ++k)
      d->deriv[k] = (d->points[k + 1] - d->points[k - 1]) /
                    (d->param[k + 1] - d->param[k - 1]);

    // arc-length table, 16 panels per spline segment
    const int panels_per_seg = 16;
    d->tgrid.push_back(0.0);
    d->sgrid.push_back(0.0);
    for (int k = 0; k + 1 < n; ++k) {
      for (int p = 1; p <= panels_per_seg; ++p) {
        double t = d->param[k] + (d->param[k + 1] - d->param[k]) * p / panels_per_seg;
        QuadratureRule q =
            QuadratureRule::gauss_legendre(12, d->tgrid.back(), t);
        double acc = 0.0;
        for (std::size_t i = 0; i < q.nodes.size(); ++i)
          acc += q.weights[i] * d->speed(q.nodes[i]);
        d->sgrid.push_back(d->sgrid.back() + acc);
        d->tgrid.push_back(t);
      }
    }
    d->len = d->sgrid.back();

    detail::PolylineData* raw = d.get();
    d->point_prefix = CumulativeIntegral(
        [raw](double s) -> VecX { return raw->eval(raw->param_at(s)); }, d->len,
        16 * (n - 1), 12);

    // rotation-minimizing frames by double reflection on an arc-length grid
    const int rmf_per_seg = 24;
    int grid = rmf_per_seg * (n - 1);
    d->rmf_s.resize(grid + 1);
    d->rmf.resize(grid + 1);
    for (int i = 0; i <= grid; ++i) d->rmf_s[i] = d->len * i / grid;
    Vec3 t0 = raw->eval_deriv(raw->param_at(0.0)).normalized();
    d->rmf[0] = detail::frame_from_tangent(t0);
    for (int i = 1; i <= grid; ++i) {
      Vec3 p0 = raw->eval(raw->param_at(d->rmf_s[i - 1]));
      Vec3 p1 = raw->eval(raw->param_at(d->rmf_s[i]));
      Vec3 t1 = raw->eval_deriv(raw->param_at(d->rmf_s[i])).normalized();
      d->rmf[i] = double_reflect(d->rmf[i - 1], p0, p1, t1);
    }

    ParamCurve c{Raw{}};
    c.kind_ = CurveKind::Polyline;
    c.poly_ = std::move(d);
    return c;
  }

  CurveKind kind() const { return kind_; }
  bool is_affine() const { return kind_ == CurveKind::Straight; }

  double length() const {
    switch (kind_) {
      case CurveKind::Straight: return straight_.len;
      case CurveKind::Arc: return arc_.len;
      default: return poly_->len;
    }
  }

  Vec3 point(double s) const {
    s = check_range(s);
    switch (kind_) {
      case CurveKind::Straight:
        return straight_.p0 + s * straight_.t;
      case CurveKind::Arc: {
        double phi = arc_.dir * s / arc_.radius;
        return arc_.center +
               arc_.radius * (std::cos(phi) * arc_.u + std::sin(phi) * arc_.v);
      }
      default:
        return poly_->eval(poly_->param_at(s));
    }
  }

  Vec3 tangent(double s) const {
    s = check_range(s);
    switch (kind_) {
      case CurveKind::Straight:
        return straight_.t;
      case CurveKind::Arc: {
        double phi = arc_.dir * s / arc_.radius;
        return arc_.dir * (-std::sin(phi) * arc_.u + std::cos(phi) * arc_.v);
      }
      default:
        return poly_->eval_deriv(poly_->param_at(s)).normalized();
    }
  }

  /// Frame rule: fixed normal rule for straight segments, Frenet frame for
  /// arcs (normal towards the center), rotation-minimizing for polylines.
  Frame frame(double s) const {
    s = check_range(s);
    switch (kind_) {
      case CurveKind::Straight:
        return detail::frame_from_tangent(straight_.t);
      case CurveKind::Arc: {
        double phi = arc_.dir * s / arc_.radius;
        Frame fr;
        fr.t = arc_.dir * (-std::sin(phi) * arc_.u + std::cos(phi) * arc_.v);
        fr.n = -(std::cos(phi) * arc_.u + std::sin(phi) * arc_.v);
        fr.b = fr.t.cross(fr.n);
        return fr;
      }
      default: {
        const auto& d = *poly_;
        int i = static_cast<int>(std::upper_bound(d.rmf_s.begin(), d.rmf_s.end(), s) -
                                 d.rmf_s.begin()) - 1;
        i = std::clamp(i, 0, static_cast<int>(d.rmf_s.size()) - 1);
        Vec3 t1 = tangent(s);
        if (s <= d.rmf_s[i] + 1e-15 * std::max(1.0, d.len)) {
          Frame fr = d.rmf[i];
          fr.t = t1;
          fr.n = (fr.n - fr.n.dot(t1) * t1).normalized();
          fr.b = t1.cross(fr.n);
          return fr;
        }
        Vec3 p0 = point(d.rmf_s[i]);
        Vec3 p1 = point(s);
        return double_reflect(d.rmf[i], p0, p1, t1);
      }
    }
  }

  /// integral_0^s Phi(r) dr. Closed form for straight segments and arcs,
  /// cached prefix quadrature for polylines.
  Vec3 point_integral(double s) const {
    s = check_range(s);
    switch (kind_) {
      case CurveKind::Straight:
        return s * straight_.p0 + 0.5 * s * s * straight_.t;
      case CurveKind::Arc: {
        double phi = arc_.dir * s / arc_.radius;
        double r2 = arc_.radius * arc_.radius;
        return s * arc_.center + r2 * arc_.dir * (std::sin(phi) * arc_.u +
                                                  (1.0 - std::cos(phi)) * arc_.v);
      }
      default:
        return Vec3(poly_->point_prefix(s));
    }
  }

  Vec3 start() const { return point(0.0); }
  Vec3 end() const { return point(length()); }

  /// Same trace with the orientation flipped: Phi_rev(s) = Phi(length - s).
  ParamCurve reversed() const {
    switch (kind_) {
      case CurveKind::Straight:
        return straight(straight_.p1, straight_.p0);
      case CurveKind::Arc:
        return arc(arc_.center, arc_.axis_raw, end(), -arc_.sweep);
      default: {
        std::vector<Vec3> pts(poly_->points.rbegin(), poly_->points.rend());
        return polyline(std::move(pts));
      }
    }
  }

  // raw defining data, used by the file format
  const Vec3& straight_p0() const { return straight_.p0; }
  const Vec3& straight_p1() const { return straight_.p1; }
  const Vec3& arc_center() const { return arc_.center; }
  const Vec3& arc_axis() const { return arc_.axis_raw; }
  double arc_sweep() const { return arc_.sweep; }
  double arc_radius() const { return arc_.radius; }
  const std::vector<Vec3>& polyline_points() const { return poly_->points; }

 private:
  struct Raw {};
  explicit ParamCurve(Raw) {}

  double check_range(double s) const {
    double len = length();
    double tol = 1e-9 * std::max(1.0, len);
    if (s < -tol || s > len + tol)
      throw std::out_of_range("curve parameter out of [0, length]");
    return std::clamp(s, 0.0, len);
  }

  static Frame double_reflect(const Frame& f0, const Vec3& p0, const Vec3& p1,
                              const Vec3& t1) {
    Vec3 v1 = p1 - p0;
    double c1 = v1.squaredNorm();
    Vec3 rl = f0.n, tl = f0.t;
    if (c1 > 1e-30) {
      rl -= (2.0 / c1) * v1.dot(f0.n) * v1;
      tl -= (2.0 / c1) * v1.dot(f0.t) * v1;
    }
    Vec3 v2 = t1 - tl;
    double c2 = v2.squaredNorm();
    Vec3 n1 = rl;
    if (c2 > 1e-30) n1 -= (2.0 / c2) * v2.dot(rl) * v2;
    n1 = (n1 - n1.dot(t1) * t1).normalized();
    Frame fr;
    fr.t = t1;
    fr.n = n1;
    fr.b = t1.cross(n1);
    return fr;
  }

  CurveKind kind_ = CurveKind::Straight;
  detail::StraightData straight_{};
  detail::ArcData arc_{};
  std::shared_ptr<const detail::PolylineData> poly_;
};

/// Quadrature approximation of integral over [0, length] of a matrix-valued
/// integrand along the curve.
template <typename F>
MatX integrate_matrix(const ParamCurve& curve, F&& f, const QuadratureRule& rule) {
  (void)curve;
  return integrate_matrix_rule(rule, std::forward<F>(f));
}

}  // namespace stentnet
