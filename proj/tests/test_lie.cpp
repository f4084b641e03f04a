#include <doctest.h>

#include <random>

#include "roinit/lie.hpp"

using namespace roinit;

namespace {

Twist random_twist(std::mt19937_64& rng, int d, double angle_scale = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Twist t = Twist::zero(d);
  for (int i = 0; i < t.angular.size(); ++i) t.angular(i) = angle_scale * u(rng);
  for (int i = 0; i < d; ++i) t.linear(i) = 2.0 * u(rng);
  return t;
}

double pose_distance(const Pose& a, const Pose& b) {
  return (a.homogeneous() - b.homogeneous()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("lie") {

TEST_CASE("exp of zero twist is the identity") {
  for (int d : {2, 3}) {
    const Pose p = exp_se(Twist::zero(d), 1.0);
    CHECK(pose_distance(p, Pose::identity(d)) == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("planar quarter turn") {
  Twist t = Twist::zero(2);
  t.angular(0) = M_PI / 2.0;
  const Pose p = exp_se(t, 1.0);
  Eigen::Matrix2d expected;
  expected << 0, -1, 1, 0;
  CHECK((p.rotation().matrix() - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(p.translation().norm() < 1e-15);
}

TEST_CASE("exp/log roundtrip recovers the scaled twist") {
  std::mt19937_64 rng(7);
  for (int d : {2, 3}) {
    for (int i = 0; i < 200; ++i) {
      const Twist t = random_twist(rng, d);
      const Pose p = exp_se(t, 0.1);
      const Twist back = log_se(p);
      CHECK((back.angular - 0.1 * t.angular).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((back.linear - 0.1 * t.linear).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("log of the identity is zero") {
  for (int d : {2, 3}) {
    const Twist t = log_se(Pose::identity(d));
    CHECK(t.angular.norm() == doctest::Approx(0.0));
    CHECK(t.linear.norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("planar log inverts the translation through the closed-form V") {
  // Quarter-turn pose with zero translation maps back to a pure rotation.
  const Pose p(Rotation::planar(M_PI / 2.0), Eigen::Vector2d::Zero());
  const Twist t = log_se(p);
  CHECK(t.angular(0) == doctest::Approx(M_PI / 2.0));
  CHECK(t.linear.norm() < 1e-15);
}

TEST_CASE("roundtrip on random poses below the branch cut") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Twist t = Twist::zero(3);
    for (int k = 0; k < 3; ++k) t.angular(k) = u(rng);
    t.angular *= 3.0 / std::max(1.0, t.angular.norm() * 1.001);  // angle < 3
    for (int k = 0; k < 3; ++k) t.linear(k) = 4.0 * u(rng);
    const Pose p = exp_se(t, 1.0);
    const Twist back = log_se(p);
    const Pose again = exp_se(back, 1.0);
    worst = std::max(worst, pose_distance(p, again));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("log throws near the 3D branch cut") {
  Eigen::Vector3d axis(1.0, 0.0, 0.0);
  Twist t = Twist::zero(3);
  t.angular = (M_PI - 1e-8) * axis;
  const Pose p = exp_se(t, 1.0);
  CHECK_THROWS_AS(log_se(p), AngleNearPi);
}

TEST_CASE("first-order exp at zero twist or zero time is the identity") {
  std::mt19937_64 rng(3);
  CHECK((first_order_exp(Twist::zero(2), 1.0) - Eigen::Matrix3d::Identity()).norm() == 0.0);
  const Twist t = random_twist(rng, 3);
  CHECK((first_order_exp(t, 0.0) - Eigen::Matrix4d::Identity()).norm() == 0.0);
}

TEST_CASE("first-order exp matches exp to the quadratic remainder") {
  Twist t = Twist::zero(2);
  t.angular(0) = 0.3;
  const double dt = 0.1;
  const Eigen::MatrixXd approx = first_order_exp(t, dt);
  const Eigen::MatrixXd exact = exp_se(t, dt).homogeneous();
  const double theta = 0.3 * dt;
  CHECK((approx - exact).norm() <= theta * theta / 2.0 + 1e-12);
}

TEST_CASE("wedge has skew top-left block and zero bottom row") {
  std::mt19937_64 rng(5);
  for (int d : {2, 3}) {
    const Twist t = random_twist(rng, d);
    const Eigen::MatrixXd w = t.wedge();
    const Eigen::MatrixXd top = w.topLeftCorner(d, d);
    CHECK((top + top.transpose()).norm() == doctest::Approx(0.0));
    CHECK(w.row(d).norm() == doctest::Approx(0.0));
  }
}

TEST_CASE("projection leaves rotations unchanged") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  for (int i = 0; i < 50; ++i) {
    const Rotation r = Rotation::from_euler(u(rng), u(rng), u(rng));
    const Rotation p = project_to_rotation(r.matrix());
    CHECK((p.matrix() - r.matrix()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("projection is scale invariant") {
  const Rotation p = project_to_rotation(2.0 * Eigen::Matrix2d::Identity());
  CHECK((p.matrix() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("projection of a reflected frame is the nearest proper rotation") {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m.col(2) *= -1.0;
  const Rotation r = project_to_rotation(m);
  CHECK(r.matrix().determinant() == doctest::Approx(1.0).epsilon(1e-12));
  // Brute force over sign corrections of the singular frame: the projection
  // must reach the smallest Frobenius distance among det=+1 candidates.
  double best = 1e100;
  for (int s1 : {-1, 1}) {
    for (int s2 : {-1, 1}) {
      for (int s3 : {-1, 1}) {
        if (s1 * s2 * s3 != 1) continue;
        const Eigen::Matrix3d cand = Eigen::Vector3d(s1, s2, s3).cast<double>().asDiagonal();
        best = std::min(best, (cand - m).norm());
      }
    }
  }
  CHECK((r.matrix() - m).norm() <= best + 1e-12);
}

TEST_CASE("projection rejects rank-deficient input") {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  CHECK_THROWS_AS(project_to_rotation(m), DegenerateMatrix);
}

TEST_CASE("group closure under long composition chains") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  Pose acc = Pose::identity(3);
  for (int i = 0; i < 10000; ++i) {
    Eigen::Vector3d p(u(rng), u(rng), u(rng));
    acc = acc * Pose(Rotation::from_euler(u(rng), u(rng), u(rng)), p);
  }
  CHECK(acc.rotation().orthonormality_defect() < 1e-12);
}

TEST_CASE("one-parameter subgroup property") {
  std::mt19937_64 rng(31);
  for (int d : {2, 3}) {
    for (int i = 0; i < 100; ++i) {
      const Twist t = random_twist(rng, d, 0.7);
      std::uniform_real_distribution<double> u(-2.0, 2.0);
      const double a = u(rng), b = u(rng);
      const Pose whole = exp_se(t, a + b);
      const Pose split = exp_se(t, a) * exp_se(t, b);
      CHECK(pose_distance(whole, split) < 1e-10);
    }
  }
}

TEST_CASE("projection undoes small symmetric perturbations") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Rotation r = Rotation::from_euler(u(rng), u(rng), u(rng));
    Eigen::Matrix3d e;
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) e(a, b) = u(rng);
    }
    e = 0.5 * (e + e.transpose());
    e *= 1e-3 / std::max(1.0, e.norm());
    const Eigen::Matrix3d perturbed =
        r.matrix() * (Eigen::Matrix3d::Identity() + e);
    const Rotation back = project_to_rotation(perturbed);
    CHECK((back.matrix() - r.matrix()).cwiseAbs().maxCoeff() < 1e-6);
  }
}

}  // TEST_SUITE
