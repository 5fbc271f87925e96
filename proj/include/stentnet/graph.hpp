// The oriented stent graph: vertices, curved edges, incidence algebra,
// coordinate projectors and the class-S test.
#pragma once

#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "stentnet/core.hpp"
#include "stentnet/geometry.hpp"
#include "stentnet/rod.hpp"

namespace stentnet {

struct StentEdge {
  int tail = -1;  // vertex with local s = 0
  int head = -1;  // vertex with local s = length
  ParamCurve curve;
  RodProperties properties;
};

/// Per vertex j: edges leaving it (s = 0 there) and entering it (s = l there).
struct VertexStar {
  std::vector<int> leaving;   // J^-_j
  std::vector<int> entering;  // J^+_j
};

/// Connected oriented graph of curved rods. Immutable after construction;
/// the constructor enforces the structural invariants.
class StentGraph {
 public:
  StentGraph(std::vector<Vec3> vertices, std::vector<StentEdge> edges)
      : vertices_(std::move(vertices)), edges_(std::move(edges)) {
    validate();
    stars_.assign(vertices_.size(), {});
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      stars_[edges_[i].tail].leaving.push_back(static_cast<int>(i));
      stars_[edges_[i].head].entering.push_back(static_cast<int>(i));
    }
    total_length_ = 0.0;
    for (const auto& e : edges_) total_length_ += e.curve.length();
  }

  int n_vertices() const { return static_cast<int>(vertices_.size()); }
  int n_edges() const { return static_cast<int>(edges_.size()); }
  const Vec3& vertex(int j) const { return vertices_[j]; }
  const StentEdge& edge(int i) const { return edges_[i]; }
  const std::vector<VertexStar>& stars() const { return stars_; }
  double total_length() const { return total_length_; }

  /// Copy with edge i traversed in the opposite direction (tail/head swapped,
  /// curve reparametrized s -> length - s). The mechanics cannot depend on it.
  StentGraph with_reversed_edge(int i) const {
    std::vector<StentEdge> edges = edges_;
    std::swap(edges[i].tail, edges[i].head);
    edges[i].curve = edges[i].curve.reversed();
    return StentGraph(vertices_, std::move(edges));
  }

 private:
  void validate() const {
    if (vertices_.size() < 2) throw ValidationError("stent needs at least two vertices");
    if (edges_.empty()) throw ValidationError("stent needs at least one edge");
    const int nv = static_cast<int>(vertices_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const auto& e = edges_[i];
      if (e.tail < 0 || e.tail >= nv || e.head < 0 || e.head >= nv)
        throw ValidationError("edge " + std::to_string(i) + " references a missing vertex");
      if (e.tail == e.head)
        throw ValidationError("edge " + std::to_string(i) + " is a self-loop");
      double d0 = (e.curve.start() - vertices_[e.tail]).norm();
      double d1 = (e.curve.end() - vertices_[e.head]).norm();
      if (d0 > 1e-9 || d1 > 1e-9) {
        std::ostringstream msg;
        msg << "edge " << i << ": curve endpoints are off the declared vertices by "
            << std::max(d0, d1);
        throw ValidationError(msg.str());
      }
    }
    // connectivity (as an undirected graph)
    std::vector<char> seen(vertices_.size(), 0);
    std::queue<int> work;
    work.push(edges_[0].tail);
    seen[edges_[0].tail] = 1;
    while (!work.empty()) {
      int j = work.front();
      work.pop();
      for (const auto& e : edges_) {
        int other = -1;
        if (e.tail == j) other = e.head;
        if (e.head == j) other = e.tail;
        if (other >= 0 && !seen[other]) {
          seen[other] = 1;
          work.push(other);
        }
      }
    }
    for (std::size_t j = 0; j < seen.size(); ++j)
      if (!seen[j])
        throw ValidationError("graph is disconnected (vertex " + std::to_string(j) +
                              " is unreachable)");
  }

  std::vector<Vec3> vertices_;
  std::vector<StentEdge> edges_;
  std::vector<VertexStar> stars_;
  double total_length_ = 0.0;
};

/// Block incidence matrix (3 n_V x 3 n_N): the 3x3 block at (vertex j, edge i)
/// is +I if edge i enters j, -I if it leaves j, 0 otherwise.
inline MatX incidence_matrix(const StentGraph& g) {
  MatX a = MatX::Zero(3 * g.n_vertices(), 3 * g.n_edges());
  for (int i = 0; i < g.n_edges(); ++i) {
    const auto& e = g.edge(i);
    a.block<3, 3>(3 * e.head, 3 * i) = Mat3::Identity();
    a.block<3, 3>(3 * e.tail, 3 * i) = -Mat3::Identity();
  }
  return a;
}

/// Projector onto the i-th coordinate block (0-based): 3 x 3n with the
/// identity at columns 3i..3i+2.
inline MatX edge_projector(int i, int n) {
  if (i < 0 || i >= n) throw std::out_of_range("projector index out of range");
  MatX p = MatX::Zero(3, 3 * n);
  p.block<3, 3>(0, 3 * i) = Mat3::Identity();
  return p;
}

struct ClassSResult {
  bool in_class_s = true;
  int kernel_dim = 0;
};

/// Class-S test: the straight-edge tangent balance at the vertices,
///   sum_{i in J+_j} alpha_i t^i - sum_{i in J-_j} alpha_i t^i = 0 for all j,
/// must force alpha = 0 (alpha fixed to zero on curved edges). Decided by a
/// numerical rank test; a stent with no straight edges is in class S.
inline ClassSResult class_s_check(const StentGraph& g) {
  std::vector<int> straight;
  for (int i = 0; i < g.n_edges(); ++i)
    if (g.edge(i).curve.is_affine()) straight.push_back(i);
  if (straight.empty()) return {true, 0};

  MatX a = MatX::Zero(3 * g.n_vertices(), straight.size());
  for (std::size_t c = 0; c < straight.size(); ++c) {
    const auto& e = g.edge(straight[c]);
    Vec3 t = e.curve.tangent(0.0);
    a.block<3, 1>(3 * e.head, c) += t;
    a.block<3, 1>(3 * e.tail, c) -= t;
  }
  Eigen::JacobiSVD<MatX> svd(a);
  const auto& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  for (int k = 0; k < sv.size(); ++k)
    if (sv(k) > 1e-10 * smax) ++rank;
  int kernel = static_cast<int>(straight.size()) - rank;
  return {kernel == 0, kernel};
}

}  // namespace stentnet
