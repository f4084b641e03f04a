#pragma once

#include <algorithm>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roinit/errors.hpp"

namespace roinit {

enum class SdpStatus { Optimal, MaxIter, NumericalFailure };

std::string to_string(SdpStatus status);

struct SdpResiduals {
  double primal_feas = 0.0;
  double dual_feas = 0.0;
  double rel_gap = 0.0;
  double max() const { return std::max(primal_feas, std::max(dual_feas, rel_gap)); }
};

struct SdpOptions {
  int max_iter = 100;
  double tol = 1e-9;
  std::ostream* iter_log = nullptr;
};

/// Equality-constrained SDP over one PSD block:
///   minimize tr(C X)  s.t.  tr(A_i X) = b_i,  X >= 0.
struct SdpInstance {
  Eigen::MatrixXd c;
  std::vector<Eigen::MatrixXd> a;
  Eigen::VectorXd b;
};

/// Solver output. The multiplier vector y follows the Lagrangian sign
/// convention in which the dual slack is C + sum_i y_i A_i >= 0 and the dual
/// objective equals -b.dot(y).
struct SdpSolution {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  SdpStatus status = SdpStatus::NumericalFailure;
  int iterations = 0;
  SdpResiduals residuals;
  int dropped_constraints = 0;
  /// Smallest eigenvalue of the implied dual slack C + sum_i y_i A_i.
  double dual_slack_min_eig = 0.0;
};

/// Reusable solver bound to one constraint set. Preprocessing orthonormalizes
/// the constraints under the trace inner product and drops dependent
/// directions, so a nearly dependent redundant basis stays well conditioned.
/// solve() is const and safe to call concurrently on independent costs.
class SdpSolver {
 public:
  SdpSolver(std::vector<Eigen::MatrixXd> constraints, Eigen::VectorXd b,
            SdpOptions options = {});
  ~SdpSolver();
  SdpSolver(SdpSolver&&) noexcept;
  SdpSolver& operator=(SdpSolver&&) noexcept;

  SdpSolution solve(const Eigen::MatrixXd& cost) const;
  SdpSolution solve(const Eigen::MatrixXd& cost, const SdpOptions& options) const;

  int n() const;
  /// Independent constraint directions kept after preprocessing.
  int num_directions() const;
  int num_dropped() const;
  /// Max constraint violation |tr(A_i X) - b_i| over the preprocessed
  /// directions; diagnostic for feasibility of a candidate X.
  double constraint_violation(const Eigen::MatrixXd& x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience wrapper around SdpSolver.
SdpSolution solve_sdp(const SdpInstance& instance, const SdpOptions& options = {});

/// Full symmetric eigendecomposition by cyclic Jacobi rotations. Eigenvalues
/// are returned in descending order with orthonormal eigenvectors in the
/// matching column order.
void sym_eig(const Eigen::MatrixXd& m, Eigen::VectorXd& eigenvalues,
             Eigen::MatrixXd& eigenvectors);

}  // namespace roinit
