// Discretization of the graph problem: continuous piecewise-quadratic (y, theta)
// with vertex DOF sharing, discontinuous piecewise-linear multipliers per edge
// plus the six mean-value multipliers, and assembly of the stiffness form,
// constraint form, loads and norm Gram matrices.
#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <vector>

#include "stentnet/core.hpp"
#include "stentnet/graph.hpp"
#include "stentnet/quadrature.hpp"

namespace stentnet {

/// Per-edge force line density f^i(s), in N/m.
using LoadFunction = std::function<Vec3(int edge, double s)>;

inline LoadFunction zero_load() {
  return [](int, double) { return Vec3::Zero(); };
}

/// Element breakpoints per edge; strictly increasing from 0 to the edge length.
class Mesh {
 public:
  static Mesh uniform(const StentGraph& g, int elements_per_edge) {
    if (elements_per_edge < 1) throw ValidationError("mesh needs at least one element per edge");
    Mesh m;
    m.breaks_.resize(g.n_edges());
    for (int i = 0; i < g.n_edges(); ++i) {
      double len = g.edge(i).curve.length();
      m.breaks_[i].resize(elements_per_edge + 1);
      for (int k = 0; k <= elements_per_edge; ++k)
        m.breaks_[i][k] = len * k / elements_per_edge;
      m.breaks_[i].back() = len;
    }
    return m;
  }

  /// Splits every element at its midpoint; the refined primal space nests the
  /// coarse one.
  Mesh refined() const {
    Mesh m;
    m.breaks_.resize(breaks_.size());
    for (std::size_t i = 0; i < breaks_.size(); ++i) {
      for (std::size_t k = 0; k + 1 < breaks_[i].size(); ++k) {
        m.breaks_[i].push_back(breaks_[i][k]);
        m.breaks_[i].push_back(0.5 * (breaks_[i][k] + breaks_[i][k + 1]));
      }
      m.breaks_[i].push_back(breaks_[i].back());
    }
    return m;
  }

  const std::vector<double>& breakpoints(int edge) const { return breaks_[edge]; }
  int elements(int edge) const { return static_cast<int>(breaks_[edge].size()) - 1; }
  int n_edges() const { return static_cast<int>(breaks_.size()); }

 private:
  std::vector<std::vector<double>> breaks_;
};

enum class BoundaryMode {
  Free,         // whole-stent problem with the two mean-value constraints
  ClampedEnds,  // single rod with y = theta = 0 at both ends, no mean rows
};

namespace detail {

inline void p2_shape(double x, std::array<double, 3>& n, std::array<double, 3>& dn) {
  n = {(1.0 - x) * (1.0 - 2.0 * x), 4.0 * x * (1.0 - x), x * (2.0 * x - 1.0)};
  dn = {4.0 * x - 3.0, 4.0 - 8.0 * x, 4.0 * x - 1.0};
}

}  // namespace detail

/// Global DOF numbering. P2 nodes of edges meeting at a vertex share their
/// six (y, theta) unknowns, which is exactly the continuity condition of
/// H^1(N; R^6). Multiplier DOFs are per element and never shared.
class DofMap {
 public:
  DofMap(const StentGraph& g, const Mesh& mesh, BoundaryMode mode = BoundaryMode::Free)
      : mode_(mode) {
    if (mesh.n_edges() != g.n_edges())
      throw ValidationError("mesh does not match the graph");
    if (mode == BoundaryMode::ClampedEnds && g.n_edges() != 1)
      throw ValidationError("clamped mode is for single-rod problems");

    n_nodes_ = g.n_vertices();
    node_pos_.resize(n_nodes_);
    for (int j = 0; j < g.n_vertices(); ++j) node_pos_[j] = g.vertex(j);

    edge_nodes_.resize(g.n_edges());
    edge_node_s_.resize(g.n_edges());
    for (int i = 0; i < g.n_edges(); ++i) {
      const auto& breaks = mesh.breakpoints(i);
      int m = static_cast<int>(breaks.size()) - 1;
      auto& nodes = edge_nodes_[i];
      auto& coords = edge_node_s_[i];
      nodes.resize(2 * m + 1);
      coords.resize(2 * m + 1);
      for (int k = 0; k <= 2 * m; ++k) {
        int elem = std::min(k / 2, m - 1);
        double a = breaks[elem], b = breaks[elem + 1];
        coords[k] = (k % 2 == 0) ? breaks[k / 2] : 0.5 * (a + b);
      }
      nodes[0] = g.edge(i).tail;
      nodes[2 * m] = g.edge(i).head;
      for (int k = 1; k < 2 * m; ++k) {
        nodes[k] = n_nodes_++;
        node_pos_.push_back(g.edge(i).curve.point(coords[k]));
      }
    }

    node_base_.assign(n_nodes_, -1);
    std::vector<char> eliminated(n_nodes_, 0);
    if (mode == BoundaryMode::ClampedEnds) {
      eliminated[g.edge(0).tail] = 1;
      eliminated[g.edge(0).head] = 1;
    }
    n_primal_ = 0;
    for (int v = 0; v < n_nodes_; ++v) {
      if (!eliminated[v]) {
        node_base_[v] = n_primal_;
        n_primal_ += 6;
      }
    }

    mult_base_.resize(g.n_edges());
    n_dual_ = 0;
    for (int i = 0; i < g.n_edges(); ++i) {
      mult_base_[i].resize(mesh.elements(i));
      for (int e = 0; e < mesh.elements(i); ++e) {
        mult_base_[i][e] = n_dual_;
        n_dual_ += 6;
      }
    }
    if (mode == BoundaryMode::Free) {
      alpha_base_ = n_dual_;
      beta_base_ = n_dual_ + 3;
      n_dual_ += 6;
    }
  }

  BoundaryMode mode() const { return mode_; }
  int n_nodes() const { return n_nodes_; }
  int n_primal() const { return n_primal_; }
  int n_dual() const { return n_dual_; }
  bool has_mean_rows() const { return mode_ == BoundaryMode::Free; }

  int node(int edge, int k) const { return edge_nodes_[edge][k]; }
  int nodes_on_edge(int edge) const { return static_cast<int>(edge_nodes_[edge].size()); }
  double node_s(int edge, int k) const { return edge_node_s_[edge][k]; }
  const Vec3& node_position(int v) const { return node_pos_[v]; }

  /// Base of the six-DOF block of a node, or -1 if eliminated by clamping.
  int node_block(int v) const { return node_base_[v]; }
  int primal_index(int v, int comp) const {
    return node_base_[v] < 0 ? -1 : node_base_[v] + comp;
  }
  int y_index(int v, int c) const { return primal_index(v, c); }
  int theta_index(int v, int c) const { return primal_index(v, 3 + c); }

  int multiplier_index(int edge, int elem, int local, int c) const {
    return mult_base_[edge][elem] + 3 * local + c;
  }
  int alpha_index(int c) const { return alpha_base_ + c; }
  int beta_index(int c) const { return beta_base_ + c; }

 private:
  BoundaryMode mode_;
  int n_nodes_ = 0, n_primal_ = 0, n_dual_ = 0;
  int alpha_base_ = -1, beta_base_ = -1;
  std::vector<std::vector<int>> edge_nodes_;
  std::vector<std::vector<double>> edge_node_s_;
  std::vector<std::vector<int>> mult_base_;
  std::vector<Vec3> node_pos_;
  std::vector<int> node_base_;
};

struct AssemblyOptions {
  int quad_points = 4;  // per element; exact to degree 7
};

/// Stiffness form k_S: sum_i integral of Q^i H^i (Q^i)^T theta' . theta~'.
/// Acts on theta DOFs only; symmetric positive semidefinite by construction.
inline SpMat assemble_stiffness(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                                const AssemblyOptions& opt = {}) {
  std::vector<Triplet> trip;
  QuadratureRule ref = QuadratureRule::gauss_legendre(opt.quad_points, 0.0, 1.0);
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& breaks = mesh.breakpoints(i);
    const auto& curve = g.edge(i).curve;
    for (int e = 0; e < mesh.elements(i); ++e) {
      double a = breaks[e], h = breaks[e + 1] - breaks[e];
      Eigen::Matrix<double, 9, 9> ke = Eigen::Matrix<double, 9, 9>::Zero();
      for (std::size_t q = 0; q < ref.nodes.size(); ++q) {
        double x = ref.nodes[q], w = ref.weights[q] * h;
        double s = a + x * h;
        Mat3 r = rotated_stiffness(g.edge(i).properties, curve.frame(s));
        std::array<double, 3> n, dn;
        detail::p2_shape(x, n, dn);
        for (int la = 0; la < 3; ++la)
          for (int lb = 0; lb < 3; ++lb) {
            double gab = w * (dn[la] / h) * (dn[lb] / h);
            ke.block<3, 3>(3 * la, 3 * lb) += gab * r;
          }
      }
      ke = 0.5 * (ke + ke.transpose()).eval();  // exact symmetry
      for (int la = 0; la < 3; ++la)
        for (int lb = 0; lb < 3; ++lb)
          for (int p = 0; p < 3; ++p)
            for (int qq = 0; qq < 3; ++qq) {
              int row = dofs.theta_index(dofs.node(i, 2 * e + la), p);
              int col = dofs.theta_index(dofs.node(i, 2 * e + lb), qq);
              double v = ke(3 * la + p, 3 * lb + qq);
              if (row >= 0 && col >= 0 && v != 0.0) trip.emplace_back(row, col, v);
            }
    }
  }
  SpMat k(dofs.n_primal(), dofs.n_primal());
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

/// Constraint form b_S. Row blocks per multiplier DOF test the
/// inextensibility/unshearability functional integral n . (y~' + t x theta~);
/// the trailing six rows (Free mode) are the mean-displacement and
/// mean-rotation functionals.
inline SpMat assemble_constraint(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                                 const AssemblyOptions& opt = {}) {
  std::vector<Triplet> trip;
  QuadratureRule ref = QuadratureRule::gauss_legendre(opt.quad_points, 0.0, 1.0);
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& breaks = mesh.breakpoints(i);
    const auto& curve = g.edge(i).curve;
    for (int e = 0; e < mesh.elements(i); ++e) {
      double a = breaks[e], h = breaks[e + 1] - breaks[e];
      for (std::size_t q = 0; q < ref.nodes.size(); ++q) {
        double x = ref.nodes[q], w = ref.weights[q] * h;
        double s = a + x * h;
        Vec3 t = curve.tangent(s);
        Mat3 at = skew(t);
        std::array<double, 3> n, dn;
        detail::p2_shape(x, n, dn);
        std::array<double, 2> l = {1.0 - x, x};
        for (int lm = 0; lm < 2; ++lm) {
          for (int lb = 0; lb < 3; ++lb) {
            int nd = dofs.node(i, 2 * e + lb);
            for (int p = 0; p < 3; ++p) {
              int row = dofs.multiplier_index(i, e, lm, p);
              int ycol = dofs.y_index(nd, p);
              if (ycol >= 0) trip.emplace_back(row, ycol, w * l[lm] * dn[lb] / h);
              for (int c = 0; c < 3; ++c) {
                int tcol = dofs.theta_index(nd, c);
                double v = w * l[lm] * n[lb] * at(p, c);
                if (tcol >= 0 && v != 0.0) trip.emplace_back(row, tcol, v);
              }
            }
          }
        }
        if (dofs.has_mean_rows()) {
          for (int lb = 0; lb < 3; ++lb) {
            int nd = dofs.node(i, 2 * e + lb);
            for (int p = 0; p < 3; ++p) {
              int ycol = dofs.y_index(nd, p);
              int tcol = dofs.theta_index(nd, p);
              if (ycol >= 0) trip.emplace_back(dofs.alpha_index(p), ycol, w * n[lb]);
              if (tcol >= 0) trip.emplace_back(dofs.beta_index(p), tcol, w * n[lb]);
            }
          }
        }
      }
    }
  }
  SpMat b(dofs.n_dual(), dofs.n_primal());
  b.setFromTriplets(trip.begin(), trip.end());
  return b;
}

/// Load functional l_S(u~) = sum_i integral f^i . y~^i; theta components get 0.
inline VecX assemble_load(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                          const LoadFunction& f, const AssemblyOptions& opt = {}) {
  VecX load = VecX::Zero(dofs.n_primal());
  QuadratureRule ref = QuadratureRule::gauss_legendre(opt.quad_points, 0.0, 1.0);
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& breaks = mesh.breakpoints(i);
    for (int e = 0; e < mesh.elements(i); ++e) {
      double a = breaks[e], h = breaks[e + 1] - breaks[e];
      for (std::size_t q = 0; q < ref.nodes.size(); ++q) {
        double x = ref.nodes[q], w = ref.weights[q] * h;
        Vec3 fv = f(i, a + x * h);
        std::array<double, 3> n, dn;
        detail::p2_shape(x, n, dn);
        for (int lb = 0; lb < 3; ++lb) {
          int nd = dofs.node(i, 2 * e + lb);
          for (int p = 0; p < 3; ++p) {
            int ycol = dofs.y_index(nd, p);
            if (ycol >= 0) load(ycol) += w * n[lb] * fv(p);
          }
        }
      }
    }
  }
  return load;
}

/// H^1(N; R^6) norm Gram matrix on the primal space.
inline SpMat assemble_h1_gram(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                              const AssemblyOptions& opt = {}) {
  std::vector<Triplet> trip;
  QuadratureRule ref = QuadratureRule::gauss_legendre(opt.quad_points, 0.0, 1.0);
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& breaks = mesh.breakpoints(i);
    for (int e = 0; e < mesh.elements(i); ++e) {
      double a = breaks[e], h = breaks[e + 1] - breaks[e];
      (void)a;
      Mat3 me = Mat3::Zero();  // scalar P2 mass+stiffness on the element
      for (std::size_t q = 0; q < ref.nodes.size(); ++q) {
        double x = ref.nodes[q], w = ref.weights[q] * h;
        std::array<double, 3> n, dn;
        detail::p2_shape(x, n, dn);
        for (int la = 0; la < 3; ++la)
          for (int lb = 0; lb < 3; ++lb)
            me(la, lb) += w * (n[la] * n[lb] + (dn[la] / h) * (dn[lb] / h));
      }
      me = 0.5 * (me + me.transpose()).eval();
      for (int la = 0; la < 3; ++la)
        for (int lb = 0; lb < 3; ++lb) {
          int na = dofs.node(i, 2 * e + la), nb = dofs.node(i, 2 * e + lb);
          for (int c = 0; c < 6; ++c) {
            int row = dofs.primal_index(na, c), col = dofs.primal_index(nb, c);
            if (row >= 0 && col >= 0) trip.emplace_back(row, col, me(la, lb));
          }
        }
    }
  }
  SpMat x(dofs.n_primal(), dofs.n_primal());
  x.setFromTriplets(trip.begin(), trip.end());
  return x;
}

/// Q_S norm Gram matrix: L^2 mass of the discontinuous P1 multipliers per
/// element, identity on the (alpha, beta) block.
inline SpMat assemble_dual_gram(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                                const AssemblyOptions& opt = {}) {
  (void)opt;
  std::vector<Triplet> trip;
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& breaks = mesh.breakpoints(i);
    for (int e = 0; e < mesh.elements(i); ++e) {
      double h = breaks[e + 1] - breaks[e];
      // element P1 mass: h/6 [[2,1],[1,2]]
      for (int p = 0; p < 3; ++p) {
        int i0 = dofs.multiplier_index(i, e, 0, p);
        int i1 = dofs.multiplier_index(i, e, 1, p);
        trip.emplace_back(i0, i0, h / 3.0);
        trip.emplace_back(i1, i1, h / 3.0);
        trip.emplace_back(i0, i1, h / 6.0);
        trip.emplace_back(i1, i0, h / 6.0);
      }
    }
  }
  if (dofs.has_mean_rows())
    for (int c = 0; c < 3; ++c) {
      trip.emplace_back(dofs.alpha_index(c), dofs.alpha_index(c), 1.0);
      trip.emplace_back(dofs.beta_index(c), dofs.beta_index(c), 1.0);
    }
  SpMat m(dofs.n_dual(), dofs.n_dual());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

/// Scalar P2 Gram matrices on the shared-node space (no clamping applied):
/// mass, H^1 seminorm, and the mean-value functional integral phi. Used by the
/// Poincare constant on H^1(N; R^3).
inline void assemble_scalar_grams(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                                  SpMat& mass, SpMat& stiffness, VecX& mean,
                                  const AssemblyOptions& opt = {}) {
  std::vector<Triplet> tm, ts;
  mean = VecX::Zero(dofs.n_nodes());
  QuadratureRule ref = QuadratureRule::gauss_legendre(opt.quad_points, 0.0, 1.0);
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& breaks = mesh.breakpoints(i);
    for (int e = 0; e < mesh.elements(i); ++e) {
      double h = breaks[e + 1] - breaks[e];
      for (std::size_t q = 0; q < ref.nodes.size(); ++q) {
        double x = ref.nodes[q], w = ref.weights[q] * h;
        std::array<double, 3> n, dn;
        detail::p2_shape(x, n, dn);
        for (int la = 0; la < 3; ++la) {
          int na = dofs.node(i, 2 * e + la);
          mean(na) += w * n[la];
          for (int lb = 0; lb < 3; ++lb) {
            int nb = dofs.node(i, 2 * e + lb);
            tm.emplace_back(na, nb, w * n[la] * n[lb]);
            ts.emplace_back(na, nb, w * (dn[la] / h) * (dn[lb] / h));
          }
        }
      }
    }
  }
  mass = SpMat(dofs.n_nodes(), dofs.n_nodes());
  mass.setFromTriplets(tm.begin(), tm.end());
  stiffness = SpMat(dofs.n_nodes(), dofs.n_nodes());
  stiffness.setFromTriplets(ts.begin(), ts.end());
}

/// Assembled saddle-point data of (mixed_stent) or the clamped rod problem.
struct DiscreteSystem {
  SpMat K;  // symmetric PSD stiffness
  SpMat B;  // constraint rows (dual x primal)
  VecX f;   // load vector
  int n_primal = 0, n_dual = 0;
};

inline DiscreteSystem build_system(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                                   const LoadFunction& f, const AssemblyOptions& opt = {}) {
  DiscreteSystem sys;
  sys.K = assemble_stiffness(g, mesh, dofs, opt);
  sys.B = assemble_constraint(g, mesh, dofs, opt);
  sys.f = assemble_load(g, mesh, dofs, f, opt);
  sys.n_primal = dofs.n_primal();
  sys.n_dual = dofs.n_dual();
  return sys;
}

/// Solution fields held as per-edge coefficient arrays so each edge can be
/// evaluated (and inspected) independently; continuity at the vertices comes
/// from the DofMap when the state is extracted from a global solution.
class StentState {
 public:
  static StentState from_solution(const StentGraph& g, const Mesh& mesh, const DofMap& dofs,
                                  const VecX& u, const VecX& dual) {
    StentState st;
    st.breaks_.resize(g.n_edges());
    st.primal.resize(g.n_edges());
    st.mult.resize(g.n_edges());
    for (int i = 0; i < g.n_edges(); ++i) {
      st.breaks_[i] = mesh.breakpoints(i);
      int nn = dofs.nodes_on_edge(i);
      st.primal[i] = MatX::Zero(nn, 6);
      for (int k = 0; k < nn; ++k)
        for (int c = 0; c < 6; ++c) {
          int idx = dofs.primal_index(dofs.node(i, k), c);
          if (idx >= 0) st.primal[i](k, c) = u(idx);
        }
      int m = mesh.elements(i);
      st.mult[i] = MatX::Zero(m, 6);
      for (int e = 0; e < m; ++e)
        for (int lm = 0; lm < 2; ++lm)
          for (int c = 0; c < 3; ++c)
            st.mult[i](e, 3 * lm + c) = dual(dofs.multiplier_index(i, e, lm, c));
    }
    if (dofs.has_mean_rows()) {
      for (int c = 0; c < 3; ++c) {
        st.alpha(c) = dual(dofs.alpha_index(c));
        st.beta(c) = dual(dofs.beta_index(c));
      }
    }
    return st;
  }

  Vec3 y(int edge, double s) const { return eval(edge, s, 0, false); }
  Vec3 theta(int edge, double s) const { return eval(edge, s, 3, false); }
  Vec3 dy(int edge, double s) const { return eval(edge, s, 0, true); }
  Vec3 dtheta(int edge, double s) const { return eval(edge, s, 3, true); }

  /// Multiplier n^i(s); discontinuous across element boundaries, evaluated
  /// from the element containing s (left element at interior breakpoints).
  Vec3 n(int edge, double s) const {
    auto [e, x] = locate(edge, s);
    const auto& row = mult[edge].row(e);
    return (1.0 - x) * Vec3(row(0), row(1), row(2)) + x * Vec3(row(3), row(4), row(5));
  }

  int elements(int edge) const { return static_cast<int>(breaks_[edge].size()) - 1; }
  const std::vector<double>& breakpoints(int edge) const { return breaks_[edge]; }

  VecX primal_global(const DofMap& dofs) const {
    VecX u = VecX::Zero(dofs.n_primal());
    for (std::size_t i = 0; i < primal.size(); ++i)
      for (int k = 0; k < primal[i].rows(); ++k)
        for (int c = 0; c < 6; ++c) {
          int idx = dofs.primal_index(dofs.node(static_cast<int>(i), k), c);
          if (idx >= 0) u(idx) = primal[i](k, c);
        }
    return u;
  }

  VecX dual_global(const DofMap& dofs) const {
    VecX d = VecX::Zero(dofs.n_dual());
    for (std::size_t i = 0; i < mult.size(); ++i)
      for (int e = 0; e < mult[i].rows(); ++e)
        for (int lm = 0; lm < 2; ++lm)
          for (int c = 0; c < 3; ++c)
            d(dofs.multiplier_index(static_cast<int>(i), e, lm, c)) = mult[i](e, 3 * lm + c);
    if (dofs.has_mean_rows())
      for (int c = 0; c < 3; ++c) {
        d(dofs.alpha_index(c)) = alpha(c);
        d(dofs.beta_index(c)) = beta(c);
      }
    return d;
  }

  std::vector<MatX> primal;  // per edge: (2m+1) x 6, columns [y, theta]
  std::vector<MatX> mult;    // per edge: m x 6, columns [n left node, n right node]
  Vec3 alpha = Vec3::Zero(), beta = Vec3::Zero();

 private:
  std::pair<int, double> locate(int edge, double s) const {
    const auto& br = breaks_[edge];
    int e = static_cast<int>(std::upper_bound(br.begin(), br.end(), s) - br.begin()) - 1;
    e = std::clamp(e, 0, static_cast<int>(br.size()) - 2);
    return {e, (s - br[e]) / (br[e + 1] - br[e])};
  }

  Vec3 eval(int edge, double s, int comp0, bool deriv) const {
    auto [e, x] = locate(edge, s);
    double h = breaks_[edge][e + 1] - breaks_[edge][e];
    std::array<double, 3> n, dn;
    detail::p2_shape(x, n, dn);
    Vec3 v = Vec3::Zero();
    for (int lb = 0; lb < 3; ++lb) {
      double w = deriv ? dn[lb] / h : n[lb];
      for (int c = 0; c < 3; ++c) v(c) += w * primal[edge](2 * e + lb, comp0 + c);
    }
    return v;
  }

  std::vector<std::vector<double>> breaks_;
};

}  // namespace stentnet
