#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "test_stents.hpp"

using namespace stentnet;
using Catch::Approx;

TEST_CASE("elasticity matrix from material and section") {
  // mu=1, lambda=0 gives E = 2; unit square section has I11 = I22 = 1/12
  auto p = RodProperties::from_material(Material{1.0, 0.0}, CrossSection{1.0, 1.0});
  CrossSection cs{1.0, 1.0};
  double k = cs.torsion_constant();
  REQUIRE(k == Approx(1.0 / 3.0 - 0.21 * (1.0 - 1.0 / 12.0)));
  Mat3 expect = Vec3(k, 2.0 / 12.0, 2.0 / 12.0).asDiagonal();
  REQUIRE((p.elasticity_matrix() - expect).norm() <= 1e-15);
  REQUIRE(Material{1.0, 0.0}.youngs_modulus() == Approx(2.0));
}

TEST_CASE("direct override is returned verbatim, non-SPD rejected") {
  Mat3 h = Vec3(1, 1, 1).asDiagonal();
  auto p = RodProperties::from_matrix(h);
  REQUIRE((p.elasticity_matrix() - h).norm() == 0.0);
  REQUIRE(p.has_override());

  Mat3 bad = Vec3(1, -0.5, 1).asDiagonal();
  REQUIRE_THROWS_AS(RodProperties::from_matrix(bad), ValidationError);
  Mat3 asym;
  asym << 1, 0.5, 0, 0, 1, 0, 0, 0, 1;
  REQUIRE_THROWS_AS(RodProperties::from_matrix(asym), ValidationError);
  REQUIRE_THROWS_AS(RodProperties::from_material(Material{-1.0, 0.0}, CrossSection{1, 1}),
                    ValidationError);
}

TEST_CASE("rotated stiffness") {
  auto p = RodProperties::from_matrix(Mat3(Vec3(1, 2, 3).asDiagonal()));

  Frame id{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  REQUIRE((rotated_stiffness(p, id) - p.elasticity_matrix()).norm() <= 1e-15);

  // orthogonal similarity preserves the spectrum; H(1,1) rides along t
  auto c = ParamCurve::arc(Vec3::Zero(), Vec3::UnitZ(), Vec3(1, 0, 0), M_PI);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, c.length());
  for (int t = 0; t < 10; ++t) {
    Frame fr = c.frame(u(rng));
    Mat3 r = rotated_stiffness(p, fr);
    REQUIRE((r - r.transpose()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<Mat3> es(r);
    REQUIRE((es.eigenvalues() - Vec3(1, 2, 3)).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE((r * fr.t - 1.0 * fr.t).norm() <= 1e-12);
  }
}

TEST_CASE("rotated stiffness keeps the smallest eigenvalue of H") {
  auto p = RodProperties::from_material(Material{2.0, 1.5}, CrossSection{0.2, 0.05});
  Eigen::SelfAdjointEigenSolver<Mat3> eh(p.elasticity_matrix());
  auto c = ParamCurve::straight(Vec3::Zero(), Vec3(1, 2, -1));
  Mat3 r = rotated_stiffness(p, c.frame(0.5));
  Eigen::SelfAdjointEigenSolver<Mat3> er(r);
  REQUIRE(std::abs(er.eigenvalues().minCoeff() - eh.eigenvalues().minCoeff()) <= 1e-12);
}

TEST_CASE("elasticity matrix is homogeneous in the moduli") {
  Material m{1.3, 0.7};
  CrossSection cs{0.2, 0.1};
  auto p1 = RodProperties::from_material(m, cs);
  auto p2 = RodProperties::from_material(Material{3.0 * m.mu, 3.0 * m.lambda}, cs);
  REQUIRE((p2.elasticity_matrix() - 3.0 * p1.elasticity_matrix()).norm() <=
          1e-12 * p1.elasticity_matrix().norm());
}
