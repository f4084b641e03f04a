#include "roinit/extraction.hpp"

#include <cmath>

namespace roinit {

namespace {

// Slot map applied to a normalized lifted vector (h = 1).
void read_state(const Eigen::VectorXd& xhat, const StateLayout& layout, Pose& pose,
                Twist& twist) {
  const int d = layout.d;
  Eigen::MatrixXd r(d, d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) r(i, j) = xhat(layout.rot_offset + j * d + i);
  }
  Rotation rot = project_to_rotation(r);
  if (layout.yaw_structured()) {
    rot = Rotation::yaw(rot.planar_angle());  // snap to the mode's yaw structure
  }
  pose = Pose(rot, xhat.segment(layout.pos_offset, d));

  twist = Twist::zero(d);
  if (layout.variant == Variant::DynamicApprox) {
    twist.angular = xhat.segment(layout.ang_offset, layout.ang_size);
    twist.linear = xhat.segment(layout.lin_offset, d);
  } else if (layout.variant == Variant::Dynamic25) {
    twist = Twist::planar3d(xhat(layout.ang_offset), xhat.segment(layout.lin_offset, 3));
  } else if (layout.variant == Variant::DynamicExact) {
    Eigen::MatrixXd dr(d, d);
    for (int j = 0; j < d; ++j) {
      for (int i = 0; i < d; ++i) dr(i, j) = xhat(layout.delta_rot_offset + j * d + i);
    }
    const Pose delta(project_to_rotation(dr), xhat.segment(layout.delta_pos_offset, d));
    const Twist log_delta = log_se(delta);
    twist.angular = log_delta.angular / layout.dt_r;
    twist.linear = log_delta.linear / layout.dt_r;
  }
}

}  // namespace

double f_eig_threshold(Variant variant) {
  return variant == Variant::Static ? 7.0 : 5.0;
}

double f_eig_of(const Eigen::MatrixXd& x) {
  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  sym_eig(x, evals, evecs);
  const double e1 = std::max(evals(0), 0.0);
  const double e2 = evals.size() > 1 ? evals(1) : 0.0;
  if (e1 <= 0.0) return 0.0;
  if (e2 <= 1e-16 * e1) return 16.0;
  return std::min(16.0, std::log10(e1 / e2));
}

Extraction extract(const SdpSolution& solution, const StateLayout& layout) {
  if (solution.x.rows() != layout.n) {
    throw LayoutMismatch("solution dimension does not match the layout");
  }
  if (solution.status == SdpStatus::NumericalFailure ||
      (solution.status == SdpStatus::MaxIter && solution.residuals.rel_gap >= 1e-4)) {
    throw Error("extraction requires an optimal or near-optimal solve");
  }

  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  sym_eig(solution.x, evals, evecs);
  const double e1 = std::max(evals(0), 0.0);
  const double e2 = evals.size() > 1 ? evals(1) : 0.0;

  Eigen::VectorXd xhat = std::sqrt(e1) * evecs.col(0);
  const double h = xhat(layout.h_offset);
  if (std::abs(h) < 1e-6) {
    throw HomogenizationCollapse("homogenization slot of the dominant eigenvector is " +
                                 std::to_string(h));
  }
  xhat /= h;  // sign fix and exact h = 1 in one step

  Extraction out;
  read_state(xhat, layout, out.pose, out.twist);
  out.certificate.threshold = f_eig_threshold(layout.variant);
  out.certificate.f_eig =
      (e1 > 0.0 && e2 > 1e-16 * e1) ? std::min(16.0, std::log10(e1 / e2)) : 16.0;
  out.certificate.rank1 = out.certificate.f_eig >= out.certificate.threshold;
  out.certificate.duality_gap_rel = std::abs(solution.primal_obj - solution.dual_obj) /
                                    std::max(1.0, std::abs(solution.primal_obj));
  out.state = std::move(xhat);
  return out;
}

Extraction extract_mean(const SdpSolution& solution, const StateLayout& layout) {
  if (solution.x.rows() != layout.n) {
    throw LayoutMismatch("solution dimension does not match the layout");
  }
  const double hh = solution.x(layout.h_offset, layout.h_offset);
  if (hh < 1e-12) {
    throw HomogenizationCollapse("homogenization mass of X is " + std::to_string(hh));
  }
  Extraction out;
  out.state = solution.x.col(layout.h_offset) / hh;
  read_state(out.state, layout, out.pose, out.twist);
  out.certificate.threshold = f_eig_threshold(layout.variant);
  out.certificate.f_eig = f_eig_of(solution.x);
  out.certificate.rank1 = out.certificate.f_eig >= out.certificate.threshold;
  out.certificate.duality_gap_rel = std::abs(solution.primal_obj - solution.dual_obj) /
                                    std::max(1.0, std::abs(solution.primal_obj));
  return out;
}

std::vector<Extraction> extract_mixtures(const SdpSolution& solution,
                                         const StateLayout& layout) {
  std::vector<Extraction> out;
  if (solution.x.rows() != layout.n || layout.n < 2) return out;
  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  sym_eig(solution.x, evals, evecs);
  const double e1 = std::max(evals(0), 0.0);
  const double e2 = std::max(evals(1), 0.0);
  if (e1 <= 0.0 || e2 <= 1e-6 * e1) return out;
  for (double sign : {1.0, -1.0}) {
    Eigen::VectorXd xhat = std::sqrt(e1) * evecs.col(0) + sign * std::sqrt(e2) * evecs.col(1);
    const double h = xhat(layout.h_offset);
    if (std::abs(h) < 1e-6) continue;
    xhat /= h;
    Extraction ex;
    try {
      read_state(xhat, layout, ex.pose, ex.twist);
    } catch (const Error&) {
      continue;
    }
    ex.state = std::move(xhat);
    ex.certificate.threshold = f_eig_threshold(layout.variant);
    out.push_back(std::move(ex));
  }
  return out;
}

Certificate certify(const SdpSolution& solution, Variant variant,
                    double map_cost_at_extraction) {
  Certificate cert;
  cert.threshold = f_eig_threshold(variant);
  cert.f_eig = f_eig_of(solution.x);
  cert.rank1 = cert.f_eig >= cert.threshold;
  cert.duality_gap_rel = std::abs(solution.primal_obj - solution.dual_obj) /
                         std::max(1.0, std::abs(solution.primal_obj));
  cert.relaxation_gap_rel = std::abs(map_cost_at_extraction - solution.primal_obj) /
                            std::max(1.0, std::abs(solution.primal_obj));
  cert.lower_bound_consistent =
      map_cost_at_extraction >=
      solution.primal_obj - 1e-7 * (1.0 + std::abs(solution.primal_obj));
  return cert;
}

std::vector<Pose> reconstruct_trajectory(const Pose& initial, const Twist& twist,
                                         int steps, double dt_r) {
  std::vector<Pose> out;
  out.reserve(steps);
  for (int k = 1; k <= steps; ++k) {
    out.push_back(initial * exp_se(twist, (k - 1) * dt_r));
  }
  return out;
}

double position_error(const Scenario& scenario, const GroundTruth& truth, const Pose& pose,
                      const Twist& twist) {
  if (scenario.mode == Mode::Static) {
    return (truth.initial_pose.translation() - pose.translation()).norm();
  }
  const int steps = scenario.num_steps();
  const auto est = reconstruct_trajectory(pose, twist, steps, scenario.window.dt_r);
  double sum = 0.0;
  for (int k = 0; k < steps; ++k) {
    sum += (truth.poses_at_steps[k].translation() - est[k].translation()).norm();
  }
  return sum / steps;
}

double rotation_error(const Scenario& scenario, const GroundTruth& truth, const Pose& pose,
                      const Twist& twist) {
  const int d = scenario.dimension;
  auto frob = [d](const Pose& gt, const Pose& est) {
    return (gt.rotation().matrix().transpose() * est.rotation().matrix() -
            Eigen::MatrixXd::Identity(d, d))
        .norm();
  };
  if (scenario.mode == Mode::Static) {
    return frob(truth.initial_pose, pose);
  }
  const int steps = scenario.num_steps();
  const auto est = reconstruct_trajectory(pose, twist, steps, scenario.window.dt_r);
  double sum = 0.0;
  for (int k = 0; k < steps; ++k) sum += frob(truth.poses_at_steps[k], est[k]);
  return sum / steps;
}

}  // namespace roinit
