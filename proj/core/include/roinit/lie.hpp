#pragma once

#include <Eigen/Dense>

#include "roinit/errors.hpp"

namespace roinit {

/// Proper rotation in SO(d), d in {2,3}. Construction through from_matrix
/// validates orthonormality and det = +1 to 1e-12; internal factories skip
/// the check when validity holds by construction.
class Rotation {
 public:
  Rotation() = default;

  /// Validating factory; throws DegenerateMatrix if m is not a rotation.
  static Rotation from_matrix(const Eigen::MatrixXd& m);
  static Rotation identity(int d);
  /// 2D rotation by angle (rad).
  static Rotation planar(double angle);
  /// 3D rotation about the z-axis (rad).
  static Rotation yaw(double angle);
  /// R = Rz(yaw) * Ry(pitch) * Rx(roll).
  static Rotation from_euler(double roll, double pitch, double yaw);

  const Eigen::MatrixXd& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  Rotation inverse() const { return Rotation(m_.transpose()); }
  Rotation operator*(const Rotation& rhs) const;
  Eigen::VectorXd operator*(const Eigen::VectorXd& v) const { return m_ * v; }

  /// max(|R^T R - I|, |det(R) - 1|), used by validity checks and tests.
  double orthonormality_defect() const;
  /// Planar angle for d=2, yaw angle of the top-left 2x2 block for d=3.
  double planar_angle() const;

  /// Trusted constructor for matrices that are rotations by construction.
  static Rotation unchecked(Eigen::MatrixXd m) { return Rotation(std::move(m)); }

 private:
  explicit Rotation(Eigen::MatrixXd m) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

/// Rigid transform in SE(d): x_world = R x_body + p.
class Pose {
 public:
  Pose() = default;
  Pose(Rotation rotation, Eigen::VectorXd translation);

  static Pose identity(int d);

  const Rotation& rotation() const { return rotation_; }
  const Eigen::VectorXd& translation() const { return translation_; }
  int dim() const { return static_cast<int>(translation_.size()); }

  /// (d+1)x(d+1) block matrix [R p; 0 1].
  Eigen::MatrixXd homogeneous() const;
  static Pose from_homogeneous(const Eigen::MatrixXd& m);

  Eigen::VectorXd apply(const Eigen::VectorXd& body_point) const;

  /// Composition. Re-orthonormalizes the rotation so long products keep the
  /// group invariants at the 1e-12 level.
  Pose operator*(const Pose& rhs) const;
  Pose inverse() const;

 private:
  Rotation rotation_;
  Eigen::VectorXd translation_;
};

/// Body-centric generalized velocity in se(d): angular has d(d-1)/2
/// components (1 in 2D, 3 in 3D), linear has d.
struct Twist {
  Eigen::VectorXd angular;
  Eigen::VectorXd linear;

  static Twist zero(int d);
  /// 2.5D twist: yaw rate about z plus 3D linear velocity.
  static Twist planar3d(double yaw_rate, const Eigen::Vector3d& v);

  int dim() const { return static_cast<int>(linear.size()); }
  double yaw_rate() const;
  bool is_finite() const;

  /// (d+1)x(d+1) matrix with skew-symmetric top-left block, linear part in
  /// the last column, zero bottom row.
  Eigen::MatrixXd wedge() const;
};

Eigen::Matrix2d skew2(double w);
Eigen::Matrix3d skew3(const Eigen::Vector3d& w);

/// Closed-form exponential map: exp((dt * twist)^) as a valid Pose.
Pose exp_se(const Twist& twist, double dt);

/// Inverse of exp_se with dt = 1. Throws AngleNearPi for 3D rotations within
/// 1e-6 rad of pi, where the log branch is ill-conditioned.
Twist log_se(const Pose& pose);

/// I + (dt * twist)^, the linearized exponential. Not a valid Pose in general.
Eigen::MatrixXd first_order_exp(const Twist& twist, double dt);

/// Nearest rotation to M in the Frobenius sense (polar factor with
/// determinant sign fix). Throws DegenerateMatrix when the smallest singular
/// value is at or below 1e-12.
Rotation project_to_rotation(const Eigen::MatrixXd& m);

}  // namespace roinit
