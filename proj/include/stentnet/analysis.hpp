// Verification machinery around the graph problem: rigid motions, equilibrium
// functionals and closed-form multipliers, the explicit single-rod 6x6 system,
// the block graph system with its Moore-Penrose lift, and the discrete
// inf-sup / Poincare / ellipticity constants.
#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "stentnet/core.hpp"
#include "stentnet/fem.hpp"
#include "stentnet/graph.hpp"
#include "stentnet/quadrature.hpp"

namespace stentnet {

namespace detail {

inline QuadratureRule edge_rule(const ParamCurve& curve, int panels = 64, int pts = 10) {
  return QuadratureRule::uniform_composite(0.0, curve.length(), panels, pts);
}

/// sup over [0, len] of |Phi|, sampled with the Lipschitz-1 safety margin.
inline double sup_point_norm(const ParamCurve& curve) {
  const int n = 256;
  double len = curve.length(), best = 0.0;
  for (int k = 0; k <= n; ++k)
    best = std::max(best, curve.point(len * k / n).norm());
  return best + 0.5 * len / n;
}

}  // namespace detail

/// Infinitesimal rigid motion: y^i(s) = c_y - Phi^i(s) x c_theta, theta = c_theta.
struct RigidMotion {
  Vec3 translation = Vec3::Zero();  // c_y
  Vec3 rotation = Vec3::Zero();     // c_theta

  Vec3 displacement_at(const Vec3& p) const { return translation - p.cross(rotation); }
};

/// Nodal interpolant of the rigid field on the primal space. Exact whenever
/// the geometry is affine; otherwise exact at the nodes only.
inline VecX rigid_motion_field(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                               const RigidMotion& r) {
  (void)g;
  (void)mesh;
  VecX u = VecX::Zero(dofs.n_primal());
  for (int v = 0; v < dofs.n_nodes(); ++v) {
    if (dofs.node_block(v) < 0) continue;
    Vec3 y = r.displacement_at(dofs.node_position(v));
    for (int c = 0; c < 3; ++c) {
      u(dofs.y_index(v, c)) = y(c);
      u(dofs.theta_index(v, c)) = r.rotation(c);
    }
  }
  return u;
}

/// Total force and total moment of the load: (sum_i int f^i, sum_i int Phi^i x f^i).
inline std::pair<Vec3, Vec3> necessary_conditions(const StentGraph& g, const LoadFunction& f,
                                                  int panels = 64, int pts = 10) {
  Vec3 force = Vec3::Zero(), moment = Vec3::Zero();
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& curve = g.edge(i).curve;
    QuadratureRule q = detail::edge_rule(curve, panels, pts);
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      Vec3 fv = f(i, q.nodes[k]);
      force += q.weights[k] * fv;
      moment += q.weights[k] * curve.point(q.nodes[k]).cross(fv);
    }
  }
  return {force, moment};
}

struct Multipliers {
  Vec3 alpha = Vec3::Zero();
  Vec3 beta = Vec3::Zero();
};

/// Closed form of the mean-value multipliers obtained by testing the mixed
/// problem with rigid motions:
///   alpha = sum_i int f^i / L,
///   beta  = (-sum_i int f^i x Phi^i + alpha x sum_i int Phi^i) / L.
inline Multipliers closed_form_multipliers(const StentGraph& g, const LoadFunction& f,
                                           int panels = 64, int pts = 10) {
  Vec3 int_f = Vec3::Zero(), int_fxphi = Vec3::Zero(), int_phi = Vec3::Zero();
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& curve = g.edge(i).curve;
    QuadratureRule q = detail::edge_rule(curve, panels, pts);
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      Vec3 p = curve.point(q.nodes[k]);
      Vec3 fv = f(i, q.nodes[k]);
      int_f += q.weights[k] * fv;
      int_fxphi += q.weights[k] * fv.cross(p);
      int_phi += q.weights[k] * p;
    }
  }
  const double len = g.total_length();
  Multipliers m;
  m.alpha = int_f / len;
  m.beta = (-int_fxphi + m.alpha.cross(int_phi)) / len;
  return m;
}

/// Gram matrix of the six rigid-motion fields in L^2(N; R^3):
/// integral of [I, -A_Phi]^T [I, -A_Phi]. SPD for any stent whose middle
/// lines are not all on one line.
inline Mat6 rigid_motion_gram(const StentGraph& g, int panels = 64, int pts = 10) {
  Vec3 int_phi = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& curve = g.edge(i).curve;
    QuadratureRule q = detail::edge_rule(curve, panels, pts);
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      Vec3 p = curve.point(q.nodes[k]);
      int_phi += q.weights[k] * p;
      Mat3 outer = p * p.transpose();
      second += q.weights[k] * outer;
    }
  }
  Mat6 gram;
  gram.topLeftCorner<3, 3>() = g.total_length() * Mat3::Identity();
  gram.topRightCorner<3, 3>() = -skew(int_phi);
  gram.bottomLeftCorner<3, 3>() = skew(int_phi);
  gram.bottomRightCorner<3, 3>() = -(second - second.trace() * Mat3::Identity());
  return gram;
}

/// Subtracts the rigid correction c_y - Phi x c_theta that makes the load
/// satisfy the equilibrium conditions (zero total force and moment).
inline LoadFunction balance_load(const StentGraph& g, const LoadFunction& f) {
  auto [force, moment] = necessary_conditions(g, f);
  Vec6 rhs;
  rhs << force, moment;
  Mat6 gram = rigid_motion_gram(g);
  Vec6 c = gram.ldlt().solve(rhs);
  Vec3 cy = c.head<3>(), cth = c.tail<3>();
  auto curves = std::make_shared<std::vector<ParamCurve>>();
  for (int i = 0; i < g.n_edges(); ++i) curves->push_back(g.edge(i).curve);
  return [f, cy, cth, curves](int i, double s) -> Vec3 {
    return Vec3(f(i, s) - cy + (*curves)[i].point(s).cross(cth));
  };
}

/// The symmetric 6x6 matrix of the explicitly integrated clamped-rod system,
///   [[ l I,  -int A_{Phi-Phi(0)} ], [ int A_{Phi-Phi(0)}, -int A^2_{Phi-Phi(0)} ]].
/// PSD for every curve; rank 5 with kernel span{(0, t)} iff the curve is
/// affine, regular otherwise.
inline Mat6 single_rod_matrix(const ParamCurve& curve, int panels = 64, int pts = 10) {
  const double len = curve.length();
  const Vec3 p0 = curve.point(0.0);
  Vec3 first = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  QuadratureRule q = detail::edge_rule(curve, panels, pts);
  for (std::size_t k = 0; k < q.nodes.size(); ++k) {
    Vec3 d = curve.point(q.nodes[k]) - p0;
    first += q.weights[k] * d;
    Mat3 outer = d * d.transpose();
    second += q.weights[k] * outer;
  }
  Mat6 m;
  m.topLeftCorner<3, 3>() = len * Mat3::Identity();
  m.topRightCorner<3, 3>() = -skew(first);
  m.bottomLeftCorner<3, 3>() = skew(first);
  m.bottomRightCorner<3, 3>() = -(second - second.trace() * Mat3::Identity());
  return m;
}

/// Moore-Penrose pseudo-inverse by SVD; singular values below
/// rel_tol * sigma_max are treated as zero.
inline MatX pseudo_inverse(const MatX& a, double rel_tol = 1e-12) {
  if (a.rows() == 0 || a.cols() == 0) return MatX::Zero(a.cols(), a.rows());
  Eigen::BDCSVD<MatX> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  VecX inv = VecX::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * smax) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Pseudo-inverse of a symmetric matrix through its eigendecomposition;
/// returns the inverse together with the spectral norm of the inverse
/// (1 / smallest retained |eigenvalue|).
inline std::pair<MatX, double> symmetric_pseudo_inverse(const MatX& a,
                                                        double rel_tol = 1e-12) {
  Eigen::SelfAdjointEigenSolver<MatX> es(a);
  const VecX& ev = es.eigenvalues();
  double emax = ev.cwiseAbs().maxCoeff();
  VecX inv = VecX::Zero(ev.size());
  double norm = 0.0;
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) > rel_tol * emax) {
      inv(i) = 1.0 / ev(i);
      norm = std::max(norm, std::abs(inv(i)));
    }
  MatX pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  return {pinv, norm};
}

/// Result of the explicit clamped-rod lift: fields with y(0)=y(l)=theta(0)=
/// theta(l)=0 and y' + t x theta = lambda.
struct SingleRodLift {
  bool solvable = false;
  Vec3 m_const = Vec3::Zero();  // M
  Vec3 n_const = Vec3::Zero();  // N
  std::function<Vec3(double)> y, theta;
};

namespace detail {

struct SingleRodLiftData {
  ParamCurve curve;
  double len;
  Vec3 p0, m_c, n_c;
  CumulativeIntegral lam_prefix;   // int_0^x lambda
  CumulativeIntegral cross_prefix; // int_0^x (Phi - p0) Phi^T, row-major 9
  Vec3 iphi_total;
  VecX lam_total, cross_total;

  Vec3 theta_at(double x) const {
    Vec3 w_x = curve.point_integral(x) - x * p0;
    Vec3 w_l = iphi_total - len * p0;
    return -(len - x) * m_c + (w_l - w_x).cross(n_c);
  }

  Vec3 y_at(double x) const {
    Vec3 tail_lam = Vec3(lam_total - VecX((lam_prefix)(x)));
    Vec3 tail_iphi = iphi_total - curve.point_integral(x);
    VecX cr = cross_total - VecX(cross_prefix(x));
    Mat3 r = Eigen::Map<Mat3>(cr.data()).transpose();  // stored row-major
    Mat3 block = r - r.trace() * Mat3::Identity();
    return -tail_lam - tail_iphi.cross(m_c) + block * n_c -
           curve.point(x).cross(theta_at(x));
  }
};

}  // namespace detail

/// Explicit construction from the clamped-rod solvability proof: solves the
/// 6x6 system for the integration constants (minimum-norm when singular) and
/// rebuilds (y, theta) by the closed-form integrals. For a straight rod the
/// data is admissible iff int lambda . t = 0 (throws Unsolvable otherwise).
inline SingleRodLift single_rod_lift(const ParamCurve& curve,
                                     const std::function<Vec3(double)>& lambda,
                                     int panels = 64, int pts = 10) {
  const double len = curve.length();
  QuadratureRule q = detail::edge_rule(curve, panels, pts);
  Vec3 int_lam = Vec3::Zero();
  double lam_l2 = 0.0;
  for (std::size_t k = 0; k < q.nodes.size(); ++k) {
    Vec3 lv = lambda(q.nodes[k]);
    int_lam += q.weights[k] * lv;
    lam_l2 += q.weights[k] * lv.squaredNorm();
  }
  lam_l2 = std::sqrt(lam_l2);

  if (curve.is_affine()) {
    Vec3 t = curve.tangent(0.0);
    if (std::abs(int_lam.dot(t)) > 1e-9 * std::max(lam_l2, 1e-30))
      throw Unsolvable("straight rod: int lambda . t = " + std::to_string(int_lam.dot(t)) +
                       " violates the compatibility condition");
  }

  Mat6 m6 = single_rod_matrix(curve, panels, pts);
  Vec6 rhs;
  rhs << Vec3::Zero(), -int_lam;
  auto [pinv, norm] = symmetric_pseudo_inverse(m6);
  (void)norm;
  Vec6 mn = pinv * rhs;

  auto data = std::make_shared<detail::SingleRodLiftData>();
  data->curve = curve;
  data->len = len;
  data->p0 = curve.point(0.0);
  data->m_c = mn.head<3>();
  data->n_c = mn.tail<3>();
  data->lam_prefix = CumulativeIntegral(
      [lambda](double s) -> VecX { return VecX(lambda(s)); }, len, panels, 12);
  const ParamCurve c = curve;
  const Vec3 p0 = data->p0;
  data->cross_prefix = CumulativeIntegral(
      [c, p0](double s) -> VecX {
        Vec3 p = c.point(s);
        Mat3 outer = (p - p0) * p.transpose();
        VecX out(9);
        for (int r = 0; r < 3; ++r)
          for (int cc = 0; cc < 3; ++cc) out(3 * r + cc) = outer(r, cc);
        return out;
      },
      len, panels, 12);
  data->iphi_total = curve.point_integral(len);
  data->lam_total = data->lam_prefix.total();
  data->cross_total = data->cross_prefix.total();

  SingleRodLift lift;
  lift.solvable = true;
  lift.m_const = data->m_c;
  lift.n_const = data->n_c;
  lift.theta = [data](double s) { return data->theta_at(s); };
  lift.y = [data](double s) { return data->y_at(s); };
  return lift;
}

/// The block graph system of the inf-sup construction, assembled exactly in
/// the arrangement of the paper-facing contract:
///   B = [[N_K, N_KA], [-N_KA, -N_AKA]],  A = [[-A_I, A_Phi], [0, -A_I]],
///   H = [[B, A^T], [A, 0]],
/// where the diagonal blocks of N_K, N_KA, N_AKA are l_i I, int A_{Phi~},
/// int A_{Phi~}^2 with Phi~(s) = Phi(l) - Phi(s), and A_Phi carries
/// A_{Phi~(0)} at the leaving vertex of each edge. A_Q = -A_Phi^T holds
/// exactly as assembled.
struct BlockSaddle {
  int n_edges = 0, n_vertices = 0;
  MatX n_k, n_ka, n_aka;        // 3n x 3n block-diagonal
  MatX a_incidence;             // 3v x 3n
  MatX a_phi;                   // 3v x 3n
  MatX a_q;                     // 3n x 3v
  MatX b_mat;                   // 6n x 6n
  MatX a_mat;                   // 6v x 6n
  MatX h;                       // (6n + 6v) square
};

inline BlockSaddle assemble_block_saddle(const StentGraph& g, int panels = 64, int pts = 10) {
  const int n = g.n_edges(), v = g.n_vertices();
  BlockSaddle bs;
  bs.n_edges = n;
  bs.n_vertices = v;
  bs.n_k = MatX::Zero(3 * n, 3 * n);
  bs.n_ka = MatX::Zero(3 * n, 3 * n);
  bs.n_aka = MatX::Zero(3 * n, 3 * n);
  bs.a_phi = MatX::Zero(3 * v, 3 * n);
  bs.a_q = MatX::Zero(3 * n, 3 * v);
  for (int i = 0; i < n; ++i) {
    const auto& curve = g.edge(i).curve;
    const double len = curve.length();
    Vec3 endp = curve.point(len);
    Vec3 v_first = len * endp - curve.point_integral(len);  // int (Phi(l)-Phi)
    Mat3 second = Mat3::Zero();
    QuadratureRule q = detail::edge_rule(curve, panels, pts);
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      Vec3 d = endp - curve.point(q.nodes[k]);
      Mat3 outer = d * d.transpose();
      second += q.weights[k] * outer;
    }
    bs.n_k.block<3, 3>(3 * i, 3 * i) = len * Mat3::Identity();
    bs.n_ka.block<3, 3>(3 * i, 3 * i) = skew(v_first);
    bs.n_aka.block<3, 3>(3 * i, 3 * i) = second - second.trace() * Mat3::Identity();
    Mat3 chord = skew(endp - curve.point(0.0));  // A_{Phi~(0)}
    bs.a_phi.block<3, 3>(3 * g.edge(i).tail, 3 * i) = chord;
    bs.a_q.block<3, 3>(3 * i, 3 * g.edge(i).tail) = chord;
  }
  bs.a_incidence = incidence_matrix(g);

  bs.b_mat = MatX::Zero(6 * n, 6 * n);
  bs.b_mat.topLeftCorner(3 * n, 3 * n) = bs.n_k;
  bs.b_mat.topRightCorner(3 * n, 3 * n) = bs.n_ka;
  bs.b_mat.bottomLeftCorner(3 * n, 3 * n) = -bs.n_ka;
  bs.b_mat.bottomRightCorner(3 * n, 3 * n) = -bs.n_aka;

  bs.a_mat = MatX::Zero(6 * v, 6 * n);
  bs.a_mat.topLeftCorner(3 * v, 3 * n) = -bs.a_incidence;
  bs.a_mat.topRightCorner(3 * v, 3 * n) = bs.a_phi;
  bs.a_mat.bottomRightCorner(3 * v, 3 * n) = -bs.a_incidence;

  const int nx = 6 * n, ny = 6 * v;
  bs.h = MatX::Zero(nx + ny, nx + ny);
  bs.h.topLeftCorner(nx, nx) = bs.b_mat;
  bs.h.topRightCorner(nx, ny) = bs.a_mat.transpose();
  bs.h.bottomLeftCorner(ny, nx) = bs.a_mat;
  return bs;
}

/// Dual-space datum for the lift: per-edge L^2 fields plus the two mean values.
struct DualField {
  std::vector<std::function<Vec3(double)>> lambda;
  Vec3 alpha = Vec3::Zero();
  Vec3 beta = Vec3::Zero();

  double norm(const StentGraph& g, int panels = 64, int pts = 10) const {
    double acc = alpha.squaredNorm() + beta.squaredNorm();
    for (int i = 0; i < g.n_edges(); ++i) {
      QuadratureRule q = detail::edge_rule(g.edge(i).curve, panels, pts);
      for (std::size_t k = 0; k < q.nodes.size(); ++k)
        acc += q.weights[k] * lambda[i](q.nodes[k]).squaredNorm();
    }
    return std::sqrt(acc);
  }
};

namespace detail {

struct LiftEdgeData {
  ParamCurve curve;
  double len = 0.0;
  Vec3 end_point = Vec3::Zero();
  Vec3 theta0 = Vec3::Zero(), y0 = Vec3::Zero();
  Vec3 m_end = Vec3::Zero(), n_const = Vec3::Zero();
  std::function<Vec3(double)> lambda;
  CumulativeIntegral integrand_prefix;  // int_0^s (lambda - t x theta)

  Vec3 theta_raw(double s) const {
    Vec3 w = s * end_point - curve.point_integral(s);  // int_0^s (Phi(l) - Phi)
    return theta0 + s * m_end + w.cross(n_const);
  }
  Vec3 y_raw(double s) const { return y0 + Vec3(integrand_prefix(s)); }
  Vec3 dtheta_raw(double s) const {
    return m_end + (end_point - curve.point(s)).cross(n_const);
  }
};

}  // namespace detail

/// Output of the constructive inf-sup lift: per-edge fields already shifted by
/// the constants (U, Omega) so all three lines of the lifted system hold, the
/// a-priori bound constant C with |u|_H1 <= C |n~|_Q, and diagnostics.
struct InfSupLift {
  std::vector<std::function<Vec3(double)>> y, theta, y_prime, theta_prime;
  VecX m_vec, n_vec, theta_vertices, y_vertices;
  Vec3 shift_u = Vec3::Zero(), shift_omega = Vec3::Zero();
  double bound_constant = 0.0;
  double hplus_norm = 0.0;
  double range_defect = 0.0;  // |H H+ phi - phi| / |phi|
  double h1_norm = 0.0;       // of the returned fields, by quadrature
};

namespace detail {

// affine bound c_l |lambda|_L2 + c_a |alpha| + c_b |beta|, all coefficients >= 0
struct LinBound {
  double l = 0.0, a = 0.0, b = 0.0;
  LinBound operator+(const LinBound& o) const { return {l + o.l, a + o.a, b + o.b}; }
  LinBound operator*(double c) const { return {c * l, c * a, c * b}; }
  double norm2() const { return l * l + a * a + b * b; }
};

}  // namespace detail

/// Constructive proof of the inf-sup bound, executed numerically: solve the
/// block system through the Moore-Penrose inverse of H (forcing (0, -Lambda,
/// 0, 0) so the reconstructed fields satisfy ds y + t x theta = lambda),
/// rebuild per-edge fields by explicit integration, then shift by (U, Omega)
/// to match the prescribed means. Throws NotClassS when the forcing is not in
/// the range of H, which cannot happen for stents of class S.
inline InfSupLift infsup_lift(const StentGraph& g, const DualField& dual,
                              int panels = 64, int pts = 10) {
  const int n = g.n_edges(), v = g.n_vertices();
  BlockSaddle bs = assemble_block_saddle(g, panels, pts);

  VecX lam_int = VecX::Zero(3 * n);
  VecX lam_l2_per_edge = VecX::Zero(n);
  for (int i = 0; i < n; ++i) {
    QuadratureRule q = detail::edge_rule(g.edge(i).curve, panels, pts);
    Vec3 acc = Vec3::Zero();
    double l2 = 0.0;
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      Vec3 lv = dual.lambda[i](q.nodes[k]);
      acc += q.weights[k] * lv;
      l2 += q.weights[k] * lv.squaredNorm();
    }
    lam_int.segment<3>(3 * i) = acc;
    lam_l2_per_edge(i) = std::sqrt(l2);
  }

  VecX phi = VecX::Zero(bs.h.rows());
  phi.segment(3 * n, 3 * n) = -lam_int;

  auto [hplus, hnorm] = symmetric_pseudo_inverse(bs.h);
  VecX chi = hplus * phi;
  double defect = (bs.h * chi - phi).norm();
  double phinorm = phi.norm();
  if (phinorm > 0.0 && defect > 1e-9 * phinorm)
    throw NotClassS("block system forcing lies outside range(H): relative defect " +
                    std::to_string(defect / phinorm));

  InfSupLift out;
  out.hplus_norm = hnorm;
  out.range_defect = phinorm > 0.0 ? defect / phinorm : 0.0;
  out.m_vec = chi.segment(0, 3 * n);
  out.n_vec = chi.segment(3 * n, 3 * n);
  out.theta_vertices = chi.segment(6 * n, 3 * v);
  out.y_vertices = chi.segment(6 * n + 3 * v, 3 * v);

  std::vector<std::shared_ptr<detail::LiftEdgeData>> edges(n);
  for (int i = 0; i < n; ++i) {
    auto d = std::make_shared<detail::LiftEdgeData>();
    d->curve = g.edge(i).curve;
    d->len = d->curve.length();
    d->end_point = d->curve.point(d->len);
    d->theta0 = out.theta_vertices.segment<3>(3 * g.edge(i).tail);
    d->y0 = out.y_vertices.segment<3>(3 * g.edge(i).tail);
    d->m_end = out.m_vec.segment<3>(3 * i);
    d->n_const = out.n_vec.segment<3>(3 * i);
    d->lambda = dual.lambda[i];
    auto raw = d.get();
    d->integrand_prefix = CumulativeIntegral(
        [raw](double s) -> VecX {
          return VecX(raw->lambda(s) - raw->curve.tangent(s).cross(raw->theta_raw(s)));
        },
        d->len, panels, 12);
    edges[i] = std::move(d);
  }

  // shift constants: Omega fixes the theta mean, U then fixes the y mean
  const double L = g.total_length();
  Vec3 mean_theta = Vec3::Zero(), mean_y = Vec3::Zero(), int_phi_total = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    QuadratureRule q = detail::edge_rule(g.edge(i).curve, panels, pts);
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      mean_theta += q.weights[k] * edges[i]->theta_raw(q.nodes[k]);
      mean_y += q.weights[k] * edges[i]->y_raw(q.nodes[k]);
    }
    int_phi_total += g.edge(i).curve.point_integral(edges[i]->len);
  }
  Vec3 omega = (dual.beta - mean_theta) / L;
  Vec3 u_shift = (dual.alpha - mean_y + int_phi_total.cross(omega)) / L;
  out.shift_omega = omega;
  out.shift_u = u_shift;

  out.y.resize(n);
  out.theta.resize(n);
  out.y_prime.resize(n);
  out.theta_prime.resize(n);
  for (int i = 0; i < n; ++i) {
    auto d = edges[i];
    out.theta[i] = [d, omega](double s) { return Vec3(d->theta_raw(s) + omega); };
    out.y[i] = [d, u_shift, omega](double s) {
      return Vec3(d->y_raw(s) + u_shift - d->curve.point(s).cross(omega));
    };
    out.theta_prime[i] = [d](double s) { return d->dtheta_raw(s); };
    out.y_prime[i] = [d, omega](double s) {
      return Vec3(d->lambda(s) - d->curve.tangent(s).cross(d->theta_raw(s) + omega));
    };
  }

  double h1 = 0.0;
  for (int i = 0; i < n; ++i) {
    QuadratureRule q = detail::edge_rule(g.edge(i).curve, panels, pts);
    for (std::size_t k = 0; k < q.nodes.size(); ++k) {
      double s = q.nodes[k], w = q.weights[k];
      h1 += w * (out.y[i](s).squaredNorm() + out.y_prime[i](s).squaredNorm() +
                 out.theta[i](s).squaredNorm() + out.theta_prime[i](s).squaredNorm());
    }
  }
  out.h1_norm = std::sqrt(h1);

  // a-priori constant: every step of the reconstruction bounded by an affine
  // function of (|lambda|, |alpha|, |beta|); see the solvability proof chain
  {
    using detail::LinBound;
    double lmax = 0.0;
    for (int i = 0; i < n; ++i) lmax = std::max(lmax, edges[i]->len);
    const double kappa = hnorm * std::sqrt(lmax);
    const LinBound S{kappa, 0.0, 0.0};

    std::vector<double> a_i(n), r_i(n);
    double sum_la = 0.0, sum_ly = 0.0, sum_l32 = 0.0, sum_lr = 0.0;
    for (int i = 0; i < n; ++i) {
      double l = edges[i]->len;
      a_i[i] = 1.0 + l + l * l;
      r_i[i] = detail::sup_point_norm(edges[i]->curve);
      sum_la += l * a_i[i];
      sum_ly += l * (1.0 + l * a_i[i]);
      sum_l32 += l * std::sqrt(l);
      sum_lr += l * r_i[i];
    }
    LinBound omega_b = (S * sum_la + LinBound{0.0, 0.0, 1.0}) * (1.0 / L);
    LinBound sum_y_b = S * sum_ly + LinBound{sum_l32, 0.0, 0.0};
    LinBound u_b = (LinBound{0.0, 1.0, 0.0} + sum_y_b + omega_b * sum_lr) * (1.0 / L);

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double l = edges[i]->len, sq = std::sqrt(l);
      LinBound sup_th = S * a_i[i];
      LinBound th_l2 = (sup_th + omega_b) * sq;
      LinBound dth_l2 = S * ((1.0 + l) * sq);
      LinBound sup_y = S * (1.0 + l * a_i[i]) + LinBound{sq, 0.0, 0.0};
      LinBound y_l2 = (sup_y + u_b + omega_b * r_i[i]) * sq;
      LinBound dy_l2 = LinBound{1.0, 0.0, 0.0} + (sup_th + omega_b) * sq;
      total += th_l2.norm2() + dth_l2.norm2() + y_l2.norm2() + dy_l2.norm2();
    }
    out.bound_constant = std::sqrt(total);
  }
  return out;
}

struct InfSupResult {
  double beta_h = 0.0;
  int dual_nullspace_dim = 0;
};

/// Discrete inf-sup constant: beta_h^2 is the smallest nonzero eigenvalue of
/// B X^{-1} B^T q = mu M_Q q, computed as a singular value problem after
/// Cholesky reduction of both norm matrices. Eigenvalues below 1e-12 of the
/// largest count as nullspace.
inline InfSupResult discrete_infsup_constant(const SpMat& b, const SpMat& x, const SpMat& mq,
                                             double eig_tol = 1e-12) {
  MatX bd = MatX(b);
  MatX xd = MatX(x), mqd = MatX(mq);
  Eigen::LLT<MatX> lx(xd);
  MatX ct = lx.matrixL().solve(bd.transpose());  // L^{-1} B^T
  Eigen::LLT<MatX> lq(mqd);
  MatX d = lq.matrixL().solve(MatX(ct.transpose()));  // R^{-1} B L^{-T}
  Eigen::BDCSVD<MatX> svd(d);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  InfSupResult res;
  if (smax == 0.0) {
    res.beta_h = 0.0;
    res.dual_nullspace_dim = static_cast<int>(bd.rows());
    return res;
  }
  const double cut = std::sqrt(eig_tol) * smax;
  double smin = smax;
  int null = 0;
  for (int i = 0; i < sv.size(); ++i) {
    if (sv(i) <= cut)
      ++null;
    else
      smin = std::min(smin, sv(i));
  }
  null += static_cast<int>(bd.rows()) - static_cast<int>(sv.size());
  res.beta_h = smin;
  res.dual_nullspace_dim = null;
  return res;
}

/// Discrete Poincare constant of H^1(N; R^3): C_P = 1 / lambda_min of
/// (D + G) v = lambda X v with D the seminorm matrix, G the rank-3 Gram of the
/// mean-value functional and X the full H^1 Gram.
inline double poincare_constant(const StentGraph& g, const Mesh& mesh, const DofMap& dofs) {
  SpMat mass, stiff;
  VecX mean;
  assemble_scalar_grams(g, mesh, dofs, mass, stiff, mean);
  const int nn = dofs.n_nodes(), n3 = 3 * nn;
  MatX d3 = MatX::Zero(n3, n3), m3 = MatX::Zero(n3, n3);
  for (int k = 0; k < stiff.outerSize(); ++k)
    for (SpMat::InnerIterator it(stiff, k); it; ++it)
      for (int c = 0; c < 3; ++c) d3(3 * it.row() + c, 3 * it.col() + c) += it.value();
  for (int k = 0; k < mass.outerSize(); ++k)
    for (SpMat::InnerIterator it(mass, k); it; ++it)
      for (int c = 0; c < 3; ++c) m3(3 * it.row() + c, 3 * it.col() + c) += it.value();
  MatX j = MatX::Zero(3, n3);
  for (int b = 0; b < nn; ++b)
    for (int c = 0; c < 3; ++c) j(c, 3 * b + c) = mean(b);
  MatX lhs = d3 + j.transpose() * j;
  MatX x = d3 + m3;
  Eigen::LLT<MatX> lx(x);
  MatX t1 = lx.matrixL().solve(lhs);
  MatX w = lx.matrixL().solve(t1.transpose()).transpose();
  w = 0.5 * (w + w.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> es(w);
  double lmin = es.eigenvalues().minCoeff();
  if (!(lmin > 0.0)) throw ValidationError("Poincare eigenproblem is not positive");
  return 1.0 / lmin;
}

struct EllipticityResult {
  double c_ell = 0.0;
  int constraint_kernel_dim = 0;
};

/// Discrete ellipticity constant of k_S on ker B:
/// c_ell = min over ker B of u^T K u / u^T X u.
inline EllipticityResult ellipticity_constant(const StentGraph& g, const Mesh& mesh,
                                              const DofMap& dofs, const DiscreteSystem& sys) {
  MatX bd = MatX(sys.B);
  Eigen::BDCSVD<MatX> svd(bd, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > 1e-10 * smax) ++rank;
  const int np = sys.n_primal;
  const int kdim = np - rank;
  EllipticityResult res;
  res.constraint_kernel_dim = kdim;
  if (kdim == 0) return res;
  MatX z = svd.matrixV().rightCols(kdim);
  MatX kz = z.transpose() * MatX(sys.K) * z;
  MatX xz = z.transpose() * MatX(assemble_h1_gram(g, mesh, dofs)) * z;
  Eigen::LLT<MatX> lx(xz);
  MatX t1 = lx.matrixL().solve(kz);
  MatX w = lx.matrixL().solve(t1.transpose()).transpose();
  w = 0.5 * (w + w.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatX> es(w);
  res.c_ell = es.eigenvalues().minCoeff();
  return res;
}

}  // namespace stentnet
