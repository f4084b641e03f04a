#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "roinit/scenario.hpp"

namespace roinit {

/// Iterate of the local solver: pose (and twist in dynamic modes) plus the
/// mode it parameterizes.
struct LmState {
  Pose pose;
  Twist twist;
  Mode mode = Mode::Static;
};

struct LmOptions {
  int max_iter = 200;
  double g_tol = 1e-10;
  double lambda0 = 1e-3;
};

struct LmReport {
  LmState state;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_trace;  // accepted costs, nonincreasing
};

/// Levenberg-Marquardt on the exact measurement objective. Pose updates use
/// the right-multiplied retraction T <- T * exp(dxi); twists update
/// additively; 2.5D poses update yaw and position additively. Damping grows
/// x10 on rejected steps and shrinks /3 on accepted ones. Always returns a
/// report.
LmReport lm_solve(const Scenario& scenario, const std::vector<Measurement>& measurements,
                  const LmState& init, const LmOptions& options = {});

/// Residual vector and analytic Jacobian of the weighted objective at a
/// state (cost = ||r||^2). Exposed for finite-difference verification.
void lm_residuals(const Scenario& scenario, const std::vector<Measurement>& measurements,
                  const LmState& state, Eigen::VectorXd& residuals,
                  Eigen::MatrixXd* jacobian);

/// Applies the solver's retraction to a parameter step (testing hook).
LmState lm_retract(const LmState& state, const Eigen::VectorXd& step);

/// Number of local parameters of a state in the given mode.
int lm_dof(const Scenario& scenario);

/// Random initial state drawn from the same distributions as the scenario
/// sampler (positions U[-4,4], angles U[-pi,pi], velocities U[-1,1] and
/// U[-0.3,0.3]).
LmState random_init(const Scenario& scenario, std::uint64_t rng_seed);

}  // namespace roinit
