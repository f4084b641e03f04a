#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roinit/qcqp.hpp"
#include "roinit/sdp.hpp"

namespace roinit {

/// Tightness certificate of an SDP solution. f_eig is log10(e1/e2) of the
/// two largest eigenvalues of X, capped at 16 when e2 underflows; rank1
/// compares it against the per-mode threshold (7 static, 5 dynamic).
struct Certificate {
  double f_eig = 0.0;
  double duality_gap_rel = 0.0;
  double relaxation_gap_rel = std::numeric_limits<double>::quiet_NaN();
  bool rank1 = false;
  double threshold = 7.0;
  bool lower_bound_consistent = true;
};

/// Pose/twist estimate recovered from the dominant eigenvector of X.
struct Extraction {
  Pose pose;
  Twist twist;
  Certificate certificate;
  Eigen::VectorXd state;  // normalized lifted vector, h slot = 1
};

struct TimingBreakdown {
  double build_s = 0.0;
  double discover_s = 0.0;
  bool discover_cached = false;
  double sdp_s = 0.0;
  double extract_s = 0.0;
  double refine_s = 0.0;
};

/// Full record of one estimation run (SDP pipeline or local baseline).
struct EstimateReport {
  Mode mode = Mode::Static;
  Variant variant = Variant::Static;
  std::string method;  // "sdp" or "ls"
  Pose pose;
  Twist twist;
  Certificate certificate;
  double position_error = std::numeric_limits<double>::quiet_NaN();
  double rotation_error = std::numeric_limits<double>::quiet_NaN();
  TimingBreakdown timing;
  SdpStatus sdp_status = SdpStatus::Optimal;
  SdpSolution sdp;         // solved on the scaled cost Q / cost_scale
  double cost_scale = 1.0; // multiply solver objectives by this for MAP units
  double primal_obj = 0.0; // MAP units
  double dual_obj = 0.0;   // MAP units
  /// Objective value at the reported estimate: the variant's own (possibly
  /// linearized) objective, the exact objective, and the LM-refined cost.
  double model_cost = std::numeric_limits<double>::quiet_NaN();
  double exact_cost = std::numeric_limits<double>::quiet_NaN();
  bool refined = false;
  int lm_iterations = 0;
  bool lm_converged = false;
};

double f_eig_threshold(Variant variant);

/// Eigenvalue-ratio metric with the e2 underflow cap.
double f_eig_of(const Eigen::MatrixXd& x);

/// Recovers (pose, twist) from the dominant eigenvector of solution.x,
/// normalized so the homogenization slot is exactly 1. Requires an Optimal
/// solve or a MaxIter solve with rel_gap < 1e-4; throws
/// HomogenizationCollapse when the h slot of the eigenvector vanishes.
Extraction extract(const SdpSolution& solution, const StateLayout& layout);

/// Alternative read of the solution: the homogenization column of X scaled
/// to h = 1 (the barycenter of the measure X represents). When the solution
/// is not numerically rank 1, this seeds refinement from a different basin
/// than the dominant eigenvector.
Extraction extract_mean(const SdpSolution& solution, const StateLayout& layout);

/// Deterministic +/- mixtures of the two leading eigenvectors; when X
/// blends two nearby rank-1 atoms these recover the individual atoms.
/// Empty when the solution is numerically rank 1 or the mixtures collapse.
std::vector<Extraction> extract_mixtures(const SdpSolution& solution,
                                         const StateLayout& layout);

/// Gap metrics given the objective value at the extracted estimate
/// (measured in the same objective the SDP relaxes, so the lower-bound
/// consistency flag is meaningful). Objective arguments are in the solved
/// cost's units.
Certificate certify(const SdpSolution& solution, Variant variant,
                    double map_cost_at_extraction);

/// Constant-twist trajectory implied by an estimate.
std::vector<Pose> reconstruct_trajectory(const Pose& initial, const Twist& twist,
                                         int steps, double dt_r);

/// L2 position error; for dynamic modes the mean over all trajectory steps.
double position_error(const Scenario& scenario, const GroundTruth& truth, const Pose& pose,
                      const Twist& twist);
/// Frobenius rotation error ||R_gt^T R_est - I||_F, trajectory-averaged.
double rotation_error(const Scenario& scenario, const GroundTruth& truth, const Pose& pose,
                      const Twist& twist);

}  // namespace roinit
