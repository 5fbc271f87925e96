// Constitutive data of a strut: material, rectangular cross-section and the
// 3x3 elasticity matrix H, plus its rotation Q H Q^T into the local frame.
#pragma once

#include <cmath>

#include "stentnet/core.hpp"
#include "stentnet/geometry.hpp"

namespace stentnet {

/// Isotropic material given by the Lame constants (Pa).
struct Material {
  double mu = 0.0;
  double lambda = 0.0;

  double youngs_modulus() const { return mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu); }
};

/// Rectangular cross-section: width w along the binormal, thickness t along
/// the normal (m).
struct CrossSection {
  double width = 0.0;
  double thickness = 0.0;

  double I11() const { return width * std::pow(thickness, 3) / 12.0; }
  double I22() const { return thickness * std::pow(width, 3) / 12.0; }
  double I12() const { return 0.0; }

  /// Torsion constant of the rectangle, standard engineering closed form
  /// K = a b^3 (1/3 - 0.21 (b/a) (1 - b^4 / (12 a^4))), a = max(w,t), b = min(w,t).
  double torsion_constant() const {
    double a = std::max(width, thickness);
    double b = std::min(width, thickness);
    return a * std::pow(b, 3) *
           (1.0 / 3.0 - 0.21 * (b / a) * (1.0 - std::pow(b, 4) / (12.0 * std::pow(a, 4))));
  }
};

/// Either material + cross-section, or a directly supplied H override.
/// The resulting elasticity matrix must be symmetric positive definite.
class RodProperties {
 public:
  static RodProperties from_material(const Material& mat, const CrossSection& cs) {
    if (!(mat.mu > 0.0)) throw ValidationError("material: mu must be positive");
    if (!(mat.lambda >= 0.0)) throw ValidationError("material: lambda must be nonnegative");
    if (!(cs.width > 0.0 && cs.thickness > 0.0))
      throw ValidationError("cross-section: width and thickness must be positive");
    RodProperties p;
    p.material_ = mat;
    p.section_ = cs;
    p.has_override_ = false;
    double e = mat.youngs_modulus();
    p.h_ = Mat3::Zero();
    p.h_(0, 0) = mat.mu * cs.torsion_constant();
    p.h_(1, 1) = e * cs.I11();
    p.h_(1, 2) = e * cs.I12();
    p.h_(2, 1) = e * cs.I12();
    p.h_(2, 2) = e * cs.I22();
    p.check_spd();
    return p;
  }

  static RodProperties from_matrix(const Mat3& h) {
    RodProperties p;
    p.has_override_ = true;
    p.h_ = 0.5 * (h + h.transpose());
    if ((h - p.h_).norm() > 1e-12 * std::max(1.0, h.norm()))
      throw ValidationError("H override is not symmetric");
    p.check_spd();
    return p;
  }

  const Mat3& elasticity_matrix() const { return h_; }
  bool has_override() const { return has_override_; }
  const Material& material() const { return material_; }
  const CrossSection& cross_section() const { return section_; }

 private:
  RodProperties() = default;

  void check_spd() const {
    Eigen::SelfAdjointEigenSolver<Mat3> es(h_);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw ValidationError("elasticity matrix is not positive definite");
  }

  Material material_{};
  CrossSection section_{};
  Mat3 h_ = Mat3::Identity();
  bool has_override_ = false;
};

/// Q H Q^T with Q = [t n b]; orthogonal similarity, so it is SPD with the
/// same eigenvalues as H. Symmetrized so downstream assembly stays exactly
/// symmetric.
inline Mat3 rotated_stiffness(const RodProperties& props, const Frame& fr) {
  Mat3 q;
  q.col(0) = fr.t;
  q.col(1) = fr.n;
  q.col(2) = fr.b;
  Mat3 r = q * props.elasticity_matrix() * q.transpose();
  return 0.5 * (r + r.transpose());
}

}  // namespace stentnet
