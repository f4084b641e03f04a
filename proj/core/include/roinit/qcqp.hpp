#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roinit/scenario.hpp"

namespace roinit {

/// Problem families the lifted builders support. The two dynamic variants
/// share a scenario mode: DynamicApprox linearizes the exponential inside
/// the motion constraints, DynamicExact chains per-step poses instead.
enum class Variant { Static, DynamicApprox, DynamicExact, Dynamic25 };

std::string to_string(Variant v);

/// Slot bookkeeping for one lifted tag position / squared-norm pair.
struct LiftEntry {
  int step = 1;       // measurement step k, 1-based
  int tag = 0;        // tag index l
  int pos_offset = 0; // d consecutive slots
  int norm_offset = 0;
};

/// Ordered slot map of the lifted state vector
///   [per-entry (tag position, norm) | rot(t1) | pos(t1) | angular | linear
///    | per-step rot/pos (exact variant) | delta rot/pos | h].
struct StateLayout {
  Variant variant = Variant::Static;
  int d = 2;          // ambient dimension
  int rot_size = 4;   // d*d (2.5D keeps the full block, pinned to yaw)
  int ang_size = 0;   // 0 static, d(d-1)/2 dynamic, 1 for 2.5D
  int steps = 1;      // K
  double dt_r = 0.0;
  std::vector<LiftEntry> entries;
  int rot_offset = 0;
  int pos_offset = 0;
  int ang_offset = -1;
  int lin_offset = -1;
  std::vector<int> step_rot_offsets;  // exact variant, k=2..K
  std::vector<int> step_pos_offsets;
  int delta_rot_offset = -1;
  int delta_pos_offset = -1;
  int h_offset = 0;
  int n = 0;

  double step_time(int k) const { return (k - 1) * dt_r; }
  int entry_index(int step, int tag) const;  // -1 when absent
  bool yaw_structured() const { return variant == Variant::Dynamic25; }
  bool dynamic() const { return variant != Variant::Static; }

  /// Layout implied by a scenario and its measurement list.
  static StateLayout build(const Scenario& scenario,
                           const std::vector<Measurement>& measurements, Variant variant);

  /// Stable key for caching constraint bases: covers everything the
  /// constraint matrices depend on (variant, dims, schedule, lever arms).
  std::string hash(const Scenario& scenario) const;
};

enum class ConstraintTag {
  Homogenization,
  LeverArm,
  NormLink,
  Orthogonality,
  Handedness,
  Motion,
  Redundant,
};

std::string to_string(ConstraintTag tag);

struct QcqpConstraint {
  Eigen::MatrixXd a;  // symmetric, x^T a x = rhs on the feasible set
  double rhs = 0.0;
  ConstraintTag tag = ConstraintTag::LeverArm;
};

/// Lifted quadratic program: minimize x^T Q x subject to x^T A0 x = 1 and
/// x^T A_i x = 0. Q carries the 1/(sigma^2 N_r) measurement weighting.
struct QcqpProblem {
  StateLayout layout;
  Eigen::MatrixXd q;
  Eigen::MatrixXd a0;
  std::vector<QcqpConstraint> constraints;
  /// Hand-built constraints kept for verification after a redundant basis
  /// replaces them as the solver input (see redundancy::attach).
  std::vector<QcqpConstraint> verification;
  double cost_sigma = 1.0;
  bool measurement_deficit = false;
};

/// Which model fills the lifted tag-position slots.
enum class LiftModel {
  Exact,       // true pose chain, Exp of the full twist
  FirstOrder,  // linearized motion used by the approximate dynamic builders
};

/// Effective noise std used in the cost: sigma_r, or 1 when noiseless so the
/// objective stays finite with unchanged minimizers.
double effective_sigma(const Scenario& scenario);

/// Lifts a (pose, twist) candidate into the layout's state vector with h = 1.
Eigen::VectorXd lift_state(const Scenario& scenario, const StateLayout& layout,
                           const Pose& pose, const Twist& twist,
                           LiftModel model = LiftModel::Exact);

/// Direct evaluation of the measurement objective at a state candidate,
/// with tag positions generated by the requested model.
double map_objective(const Scenario& scenario, const std::vector<Measurement>& measurements,
                     const Pose& pose, const Twist& twist,
                     LiftModel model = LiftModel::Exact);

QcqpProblem build_static(const Scenario& scenario,
                         const std::vector<Measurement>& measurements);
QcqpProblem build_dynamic(const Scenario& scenario,
                          const std::vector<Measurement>& measurements);
QcqpProblem build_dynamic_exact(const Scenario& scenario,
                                const std::vector<Measurement>& measurements);

QcqpProblem build_problem(const Scenario& scenario,
                          const std::vector<Measurement>& measurements, Variant variant);

/// Upper-triangular coordinate dump (row col value, 17 significant digits)
/// for cross-checks against external solvers.
void dump_problem(const QcqpProblem& problem, std::ostream& os);

}  // namespace roinit
