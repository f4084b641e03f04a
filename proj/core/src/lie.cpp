#include "roinit/lie.hpp"

#include <cmath>

namespace roinit {

namespace {

constexpr double kSmallAngle = 1e-4;

// sin(t)/t and (1-cos(t))/t with series fallbacks near zero.
double sinc(double t) {
  if (std::abs(t) < kSmallAngle) {
    const double t2 = t * t;
    return 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
  }
  return std::sin(t) / t;
}

double cosc(double t) {
  if (std::abs(t) < kSmallAngle) {
    const double t2 = t * t;
    return t / 2.0 - t * t2 / 24.0 + t2 * t2 * t / 720.0;
  }
  return (1.0 - std::cos(t)) / t;
}

// V(t) for SE(2): integral of the planar rotation over [0, 1] at rate t.
Eigen::Matrix2d planar_v(double t) {
  Eigen::Matrix2d v;
  const double a = sinc(t);
  const double b = cosc(t);
  v << a, -b, b, a;
  return v;
}

Eigen::Matrix2d planar_v_inverse(double t) {
  const double a = sinc(t);
  const double b = cosc(t);
  const double den = a * a + b * b;
  Eigen::Matrix2d vinv;
  vinv << a, b, -b, a;
  return vinv / den;
}

}  // namespace

Rotation Rotation::from_matrix(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  if ((d != 2 && d != 3) || m.cols() != d) {
    throw DegenerateMatrix("rotation must be 2x2 or 3x3");
  }
  Rotation r(m);
  if (r.orthonormality_defect() > 1e-9) {
    throw DegenerateMatrix("matrix is not a rotation (orthonormality/determinant defect)");
  }
  return r;
}

Rotation Rotation::identity(int d) { return Rotation(Eigen::MatrixXd::Identity(d, d)); }

Rotation Rotation::planar(double angle) {
  Eigen::MatrixXd m(2, 2);
  const double c = std::cos(angle), s = std::sin(angle);
  m << c, -s, s, c;
  return Rotation(std::move(m));
}

Rotation Rotation::yaw(double angle) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(3, 3);
  const double c = std::cos(angle), s = std::sin(angle);
  m(0, 0) = c;
  m(0, 1) = -s;
  m(1, 0) = s;
  m(1, 1) = c;
  return Rotation(std::move(m));
}

Rotation Rotation::from_euler(double roll, double pitch, double yaw) {
  Eigen::Matrix3d m(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                    Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                    Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()));
  return Rotation(Eigen::MatrixXd(m));
}

Rotation Rotation::operator*(const Rotation& rhs) const {
  return Rotation(Eigen::MatrixXd(m_ * rhs.m_));
}

double Rotation::orthonormality_defect() const {
  const int d = dim();
  const double ortho =
      (m_.transpose() * m_ - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(m_.determinant() - 1.0));
}

double Rotation::planar_angle() const { return std::atan2(m_(1, 0), m_(0, 0)); }

Pose::Pose(Rotation rotation, Eigen::VectorXd translation)
    : rotation_(std::move(rotation)), translation_(std::move(translation)) {
  if (rotation_.dim() != static_cast<int>(translation_.size())) {
    throw ModeMismatch("pose rotation/translation dimension mismatch");
  }
}

Pose Pose::identity(int d) { return Pose(Rotation::identity(d), Eigen::VectorXd::Zero(d)); }

Eigen::MatrixXd Pose::homogeneous() const {
  const int d = dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + 1, d + 1);
  m.topLeftCorner(d, d) = rotation_.matrix();
  m.topRightCorner(d, 1) = translation_;
  m(d, d) = 1.0;
  return m;
}

Pose Pose::from_homogeneous(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows()) - 1;
  return Pose(Rotation::from_matrix(m.topLeftCorner(d, d)), m.topRightCorner(d, 1));
}

Eigen::VectorXd Pose::apply(const Eigen::VectorXd& body_point) const {
  return rotation_.matrix() * body_point + translation_;
}

Pose Pose::operator*(const Pose& rhs) const {
  Eigen::MatrixXd r = rotation_.matrix() * rhs.rotation().matrix();
  // Drift control: plain products accumulate ~n*eps defect per composition,
  // which would exceed the 1e-12 group invariant after ~1e4 compositions.
  Rotation rot = project_to_rotation(r);
  return Pose(rot, rotation_.matrix() * rhs.translation() + translation_);
}

Pose Pose::inverse() const {
  Rotation rinv = rotation_.inverse();
  return Pose(rinv, -(rinv.matrix() * translation_));
}

Twist Twist::zero(int d) {
  Twist t;
  t.angular = Eigen::VectorXd::Zero(d == 2 ? 1 : 3);
  t.linear = Eigen::VectorXd::Zero(d);
  return t;
}

Twist Twist::planar3d(double yaw_rate, const Eigen::Vector3d& v) {
  Twist t;
  t.angular = Eigen::Vector3d(0.0, 0.0, yaw_rate);
  t.linear = v;
  return t;
}

double Twist::yaw_rate() const { return dim() == 2 ? angular(0) : angular(2); }

bool Twist::is_finite() const { return angular.allFinite() && linear.allFinite(); }

Eigen::MatrixXd Twist::wedge() const {
  const int d = dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + 1, d + 1);
  if (d == 2) {
    m.topLeftCorner(2, 2) = skew2(angular(0));
  } else {
    m.topLeftCorner(3, 3) = skew3(angular);
  }
  m.topRightCorner(d, 1) = linear;
  return m;
}

Eigen::Matrix2d skew2(double w) {
  Eigen::Matrix2d m;
  m << 0.0, -w, w, 0.0;
  return m;
}

Eigen::Matrix3d skew3(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w(2), w(1), w(2), 0.0, -w(0), -w(1), w(0), 0.0;
  return m;
}

Pose exp_se(const Twist& twist, double dt) {
  const int d = twist.dim();
  if (!twist.is_finite() || !std::isfinite(dt)) {
    throw ModeMismatch("exp_se requires finite twist and dt");
  }
  if (d == 2) {
    const double theta = twist.angular(0) * dt;
    const Eigen::Vector2d rho = twist.linear * dt;
    return Pose(Rotation::planar(theta), planar_v(theta) * rho);
  }
  const Eigen::Vector3d phi = twist.angular * dt;
  const Eigen::Vector3d rho = twist.linear * dt;
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew3(phi);
  Eigen::Matrix3d r, v;
  if (theta < kSmallAngle) {
    const double t2 = theta * theta;
    // exp and its translation integral via 4th-order series in theta.
    r = Eigen::Matrix3d::Identity() + (1.0 - t2 / 6.0) * k + (0.5 - t2 / 24.0) * k * k;
    v = Eigen::Matrix3d::Identity() + (0.5 - t2 / 24.0) * k + (1.0 / 6.0 - t2 / 120.0) * k * k;
  } else {
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    const double c = (theta - std::sin(theta)) / (theta * theta * theta);
    r = Eigen::Matrix3d::Identity() + a * k + b * k * k;
    v = Eigen::Matrix3d::Identity() + b * k + c * k * k;
  }
  return Pose(project_to_rotation(r), v * rho);
}

Twist log_se(const Pose& pose) {
  const int d = pose.dim();
  Twist out;
  if (d == 2) {
    const double theta = pose.rotation().planar_angle();
    out.angular = Eigen::VectorXd::Constant(1, theta);
    out.linear = planar_v_inverse(theta) * pose.translation();
    return out;
  }
  const Eigen::Matrix3d r = pose.rotation().matrix();
  const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double cos_theta = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double sin_theta = 0.5 * w.norm();
  const double theta = std::atan2(sin_theta, cos_theta);
  if (theta > M_PI - 1e-6) {
    throw AngleNearPi("rotation angle within 1e-6 of pi; logarithm ill-conditioned");
  }
  Eigen::Vector3d phi;
  if (theta < kSmallAngle) {
    phi = 0.5 * w * (1.0 + theta * theta / 6.0);
  } else {
    phi = 0.5 * theta / std::sin(theta) * w;
  }
  const Eigen::Matrix3d k = skew3(phi);
  Eigen::Matrix3d vinv;
  if (theta < kSmallAngle) {
    vinv = Eigen::Matrix3d::Identity() - 0.5 * k + (1.0 / 12.0 + theta * theta / 720.0) * k * k;
  } else {
    const double gamma =
        (1.0 - 0.5 * theta * std::sin(theta) / (1.0 - std::cos(theta))) / (theta * theta);
    vinv = Eigen::Matrix3d::Identity() - 0.5 * k + gamma * k * k;
  }
  out.angular = phi;
  out.linear = vinv * pose.translation();
  return out;
}

Eigen::MatrixXd first_order_exp(const Twist& twist, double dt) {
  const int d = twist.dim();
  Twist scaled;
  scaled.angular = twist.angular * dt;
  scaled.linear = twist.linear * dt;
  return Eigen::MatrixXd::Identity(d + 1, d + 1) + scaled.wedge();
}

Rotation project_to_rotation(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) {
    throw DegenerateMatrix("projection input not finite");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.singularValues().minCoeff() <= 1e-12) {
    throw DegenerateMatrix("matrix rank-deficient beyond tolerance; no unique rotation");
  }
  Eigen::MatrixXd u = svd.matrixU();
  Eigen::MatrixXd v = svd.matrixV();
  Eigen::VectorXd signs = Eigen::VectorXd::Ones(m.rows());
  signs(m.rows() - 1) = (u * v.transpose()).determinant() > 0 ? 1.0 : -1.0;
  return Rotation::unchecked(u * signs.asDiagonal() * v.transpose());
}

}  // namespace roinit
