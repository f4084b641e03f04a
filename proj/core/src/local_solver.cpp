#include "roinit/local_solver.hpp"

#include <cmath>

#include "roinit/qcqp.hpp"

namespace roinit {

namespace {

// d/dt of sin(t)/t and (1-cos(t))/t, with series fallbacks near zero.
double dsinc(double t) {
  if (std::abs(t) < 1e-4) return -t / 3.0 + t * t * t / 30.0;
  return (t * std::cos(t) - std::sin(t)) / (t * t);
}

double dcosc(double t) {
  if (std::abs(t) < 1e-4) return 0.5 - t * t / 8.0;
  return (t * std::sin(t) - 1.0 + std::cos(t)) / (t * t);
}

Eigen::Matrix2d planar_v(double t) {
  Eigen::Matrix2d v;
  const double a = std::abs(t) < 1e-4 ? 1.0 - t * t / 6.0 + t * t * t * t / 120.0
                                      : std::sin(t) / t;
  const double b = std::abs(t) < 1e-4 ? t / 2.0 - t * t * t / 24.0 : (1.0 - std::cos(t)) / t;
  v << a, -b, b, a;
  return v;
}

Eigen::Matrix2d planar_v_prime(double t) {
  Eigen::Matrix2d v;
  const double a = dsinc(t);
  const double b = dcosc(t);
  v << a, -b, b, a;
  return v;
}

const Eigen::Matrix3d kYawGen = (Eigen::Matrix3d() << 0, -1, 0, 1, 0, 0, 0, 0, 0).finished();

}  // namespace

int lm_dof(const Scenario& scenario) {
  switch (scenario.mode) {
    case Mode::Static: return scenario.dimension == 2 ? 3 : 6;
    case Mode::Dynamic: return 6;
    case Mode::Dynamic25: return 8;
  }
  return 0;
}

void lm_residuals(const Scenario& scenario, const std::vector<Measurement>& measurements,
                  const LmState& state, Eigen::VectorXd& residuals,
                  Eigen::MatrixXd* jacobian) {
  const int d = scenario.dimension;
  const int n_r = static_cast<int>(measurements.size());
  const int dof = lm_dof(scenario);
  const double sigma = effective_sigma(scenario);
  const double w = 1.0 / (sigma * std::sqrt(static_cast<double>(n_r)));
  residuals.resize(n_r);
  if (jacobian) jacobian->resize(n_r, dof);

  const Eigen::MatrixXd& r1 = state.pose.rotation().matrix();
  const Eigen::VectorXd& p1 = state.pose.translation();

  for (int m = 0; m < n_r; ++m) {
    const auto& meas = measurements[m];
    const Eigen::VectorXd& tag = scenario.tags[meas.tag_index];
    const Eigen::VectorXd& anchor = scenario.anchors[meas.anchor_index];
    const double c = scenario.step_time(meas.time_index);

    Eigen::VectorXd u;  // tag position in the initial body frame
    Pose step_motion;
    if (scenario.mode == Mode::Static) {
      u = tag;
    } else {
      step_motion = exp_se(state.twist, c);
      u = step_motion.apply(tag);
    }
    const Eigen::VectorXd q = r1 * u + p1;
    const double e = meas.value - (anchor - q).squaredNorm();
    residuals(m) = w * e;
    if (!jacobian) continue;

    // de/dq = 2 (anchor - q)^T; chain through dq/dparam per mode.
    const Eigen::RowVectorXd de_dq = 2.0 * (anchor - q).transpose();
    Eigen::MatrixXd dq(d, dof);
    if (scenario.mode == Mode::Static) {
      dq.leftCols(d) = r1;
      if (d == 2) {
        dq.col(2) = r1 * Eigen::Vector2d(-tag(1), tag(0));
      } else {
        dq.rightCols(3) = -r1 * skew3(tag);
      }
    } else if (scenario.mode == Mode::Dynamic) {
      const double theta = c * state.twist.angular(0);
      dq.col(0) = r1.col(0);
      dq.col(1) = r1.col(1);
      dq.col(2) = r1 * Eigen::Vector2d(-u(1), u(0));
      const Eigen::Vector2d rot_part =
          Eigen::Vector2d(-(step_motion.rotation().matrix() * tag)(1),
                          (step_motion.rotation().matrix() * tag)(0));
      dq.col(3) = r1 * (c * (rot_part + c * planar_v_prime(theta) * state.twist.linear));
      dq.middleCols(4, 2) = r1 * planar_v(theta) * c;
    } else {  // Dynamic25
      const double theta = c * state.twist.yaw_rate();
      dq.leftCols(3) = Eigen::Matrix3d::Identity();
      dq.col(3) = kYawGen * (r1 * u);
      Eigen::Vector3d du_dw = kYawGen * (step_motion.rotation().matrix() * tag);
      du_dw.head<2>() += c * planar_v_prime(theta) * state.twist.linear.head<2>();
      dq.col(4) = r1 * (c * du_dw);
      Eigen::Matrix3d dv = Eigen::Matrix3d::Zero();
      dv.topLeftCorner<2, 2>() = c * planar_v(theta);
      dv(2, 2) = c;
      dq.rightCols(3) = r1 * dv;
    }
    jacobian->row(m) = w * de_dq * dq;
  }
}

LmState lm_retract(const LmState& state, const Eigen::VectorXd& step) {
  LmState out = state;
  const int d = state.pose.dim();
  if (state.mode == Mode::Dynamic25) {
    const double yaw = state.pose.rotation().planar_angle() + step(3);
    out.pose = Pose(Rotation::yaw(yaw), state.pose.translation() + step.head(3));
    out.twist = Twist::planar3d(state.twist.yaw_rate() + step(4),
                                state.twist.linear + step.tail(3));
    return out;
  }
  Twist delta = Twist::zero(d);
  delta.linear = step.head(d);
  delta.angular = step.segment(d, delta.angular.size());
  out.pose = state.pose * exp_se(delta, 1.0);
  if (state.mode == Mode::Dynamic) {
    out.twist.angular = state.twist.angular + step.segment(d + delta.angular.size(), 1);
    out.twist.linear = state.twist.linear + step.tail(d);
  }
  return out;
}

LmReport lm_solve(const Scenario& scenario, const std::vector<Measurement>& measurements,
                  const LmState& init, const LmOptions& options) {
  if (init.mode != scenario.mode || init.pose.dim() != scenario.dimension) {
    throw ModeMismatch("lm_solve: initial state does not match the scenario mode");
  }
  LmReport report;
  report.state = init;
  const int dof = lm_dof(scenario);

  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  lm_residuals(scenario, measurements, report.state, r, &j);
  double cost = r.squaredNorm();
  report.cost_trace.push_back(cost);

  double lambda = options.lambda0;
  int accepted = 0;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    const Eigen::VectorXd g = 2.0 * j.transpose() * r;
    if (g.cwiseAbs().maxCoeff() < options.g_tol) {
      report.converged = true;
      break;
    }
    const Eigen::MatrixXd h = j.transpose() * j;
    const Eigen::VectorXd rhs = -j.transpose() * r;
    Eigen::VectorXd step =
        (h + lambda * Eigen::MatrixXd::Identity(dof, dof)).ldlt().solve(rhs);
    if (!step.allFinite()) {
      lambda = std::min(lambda * 10.0, 1e12);
      continue;
    }
    LmState candidate = lm_retract(report.state, step);
    Eigen::VectorXd r_new;
    lm_residuals(scenario, measurements, candidate, r_new, nullptr);
    const double cost_new = r_new.squaredNorm();
    if (cost_new < cost) {
      const bool tiny_decrease = (cost - cost_new) < 1e-12 * (1.0 + cost);
      report.state = candidate;
      cost = cost_new;
      report.cost_trace.push_back(cost);
      lambda = std::max(lambda / 3.0, 1e-12);
      if (++accepted % 50 == 0 && scenario.mode != Mode::Dynamic25) {
        report.state.pose = Pose(project_to_rotation(report.state.pose.rotation().matrix()),
                                 report.state.pose.translation());
      }
      lm_residuals(scenario, measurements, report.state, r, &j);
      if (tiny_decrease) {
        report.converged = true;
        ++iter;
        break;
      }
    } else {
      lambda = std::min(lambda * 10.0, 1e12);
    }
  }
  report.iterations = iter;
  report.final_cost = cost;
  return report;
}

LmState random_init(const Scenario& scenario, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  LmState state;
  state.mode = scenario.mode;
  state.pose = sample_pose(rng, scenario.dimension, scenario.mode);
  state.twist = sample_twist(rng, scenario.dimension, scenario.mode);
  return state;
}

}  // namespace roinit
