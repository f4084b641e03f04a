#include "roinit/pipeline.hpp"

#include <chrono>
#include <cmath>

namespace roinit {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Variant variant_for(const Scenario& scenario, const PipelineOptions& options) {
  switch (scenario.mode) {
    case Mode::Static: return Variant::Static;
    case Mode::Dynamic:
      return options.exact_dynamic ? Variant::DynamicExact : Variant::DynamicApprox;
    case Mode::Dynamic25: return Variant::Dynamic25;
  }
  return Variant::Static;
}

std::vector<Measurement> schedule_for(const Scenario& scenario) {
  if (!scenario.measurements.empty()) return scenario.measurements;
  return canonical_schedule(scenario);
}

LiftModel model_for(Variant variant) {
  return (variant == Variant::DynamicApprox || variant == Variant::Dynamic25)
             ? LiftModel::FirstOrder
             : LiftModel::Exact;
}

}  // namespace

Pipeline::Pipeline(const Scenario& scenario_template, const PipelineOptions& options)
    : options_(options) {
  Scenario tpl = scenario_template;
  tpl.measurements = schedule_for(tpl);
  variant_ = variant_for(tpl, options);
  layout_ = StateLayout::build(tpl, tpl.measurements, variant_);
  layout_hash_ = layout_.hash(tpl);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Eigen::MatrixXd> solver_constraints;
  face_ = Eigen::MatrixXd::Identity(layout_.n, layout_.n);
  if (variant_ == Variant::DynamicExact) {
    // Appendix-style exact formulation: the hand-built constraint set alone.
    QcqpProblem problem = build_problem(tpl, tpl.measurements, variant_);
    solver_constraints.reserve(problem.constraints.size() + 1);
    solver_constraints.push_back(problem.a0);
    for (auto& c : problem.constraints) solver_constraints.push_back(std::move(c.a));
  } else {
    if (options_.use_cache) {
      basis_ = discover_or_load(tpl, variant_, options_.discovery, options_.cache_dir,
                                &basis_cached_);
    } else {
      basis_ = discover_constraints(tpl, variant_, options_.discovery);
    }
    // Solve on the face the feasible lifts span: the redundant basis forces
    // every feasible X onto it, and the restriction restores a strictly
    // feasible interior for the solver.
    if (basis_.face_dim() > 0 && basis_.face_dim() < layout_.n) {
      face_ = basis_.face;
    }
    QcqpProblem problem = build_problem(tpl, tpl.measurements, variant_);
    solver_constraints.reserve(basis_.reduced_size() + 1);
    solver_constraints.push_back(face_.transpose() * problem.a0 * face_);
    // The face-level nullspace basis is the solver-facing constraint set;
    // identities acting off the face are absorbed by the restriction.
    for (const auto& s : basis_.reduced) solver_constraints.push_back(s);
  }
  discover_seconds_ = seconds_since(t0);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<int>(solver_constraints.size()));
  b(0) = 1.0;
  solver_ = std::make_shared<SdpSolver>(std::move(solver_constraints), std::move(b),
                                        options_.sdp);
}

EstimateReport Pipeline::estimate_sdp(const Scenario& scenario) const {
  Scenario work = scenario;
  work.measurements = schedule_for(work);
  const StateLayout layout = StateLayout::build(work, work.measurements, variant_);
  if (layout.hash(work) != layout_hash_) {
    throw LayoutMismatch("scenario layout differs from the pipeline template");
  }

  EstimateReport report;
  report.mode = work.mode;
  report.variant = variant_;
  report.method = "sdp";
  report.timing.discover_s = discover_seconds_;
  report.timing.discover_cached = basis_cached_;

  auto t0 = std::chrono::steady_clock::now();
  const QcqpProblem problem = build_problem(work, work.measurements, variant_);
  report.cost_scale = std::max(1.0, problem.q.norm());
  const Eigen::MatrixXd cost =
      face_.transpose() * (problem.q / report.cost_scale) * face_;
  report.timing.build_s = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  report.sdp = solver_->solve(cost);
  report.timing.sdp_s = seconds_since(t0);
  report.sdp_status = report.sdp.status;
  report.primal_obj = report.sdp.primal_obj * report.cost_scale;
  report.dual_obj = report.sdp.dual_obj * report.cost_scale;
  // Expand the face-restricted primal back to the full lifted space; the
  // multipliers and residuals stay those of the reduced solve.
  report.sdp.x = (face_ * report.sdp.x * face_.transpose()).eval();

  t0 = std::chrono::steady_clock::now();
  Extraction ex = extract(report.sdp, layout_);
  report.timing.extract_s = seconds_since(t0);
  report.pose = ex.pose;
  report.twist = ex.twist;

  report.model_cost =
      map_objective(work, work.measurements, ex.pose, ex.twist, model_for(variant_));
  report.exact_cost =
      map_objective(work, work.measurements, ex.pose, ex.twist, LiftModel::Exact);
  report.certificate =
      certify(report.sdp, variant_, report.model_cost / report.cost_scale);

  const bool refine = options_.refine.value_or(work.is_dynamic());
  if (refine) {
    t0 = std::chrono::steady_clock::now();
    std::vector<LmState> seeds;
    seeds.push_back({ex.pose, ex.twist, work.mode});
    {
      // The linearized motion model can place its global optimum at a twist
      // outside the physical sampling ranges; clamping gives a seed inside
      // the prior's support.
      Twist clamped = ex.twist;
      clamped.angular = clamped.angular.cwiseMax(-0.3).cwiseMin(0.3);
      clamped.linear = clamped.linear.cwiseMax(-1.0).cwiseMin(1.0);
      if ((clamped.angular - ex.twist.angular).norm() > 1e-12 ||
          (clamped.linear - ex.twist.linear).norm() > 1e-12) {
        seeds.push_back({ex.pose, clamped, work.mode});
        seeds.push_back({ex.pose, Twist::zero(work.dimension), work.mode});
      }
    }
    if (!report.certificate.rank1) {
      // Away from rank 1 the dominant eigenvector can sit in the wrong
      // basin. The barycenter of X and the +/- mixtures of the two leading
      // eigenvectors are independent deterministic seeds.
      try {
        Extraction mean = extract_mean(report.sdp, layout_);
        seeds.push_back({mean.pose, mean.twist, work.mode});
      } catch (const Error&) {
      }
      for (const auto& mixed : extract_mixtures(report.sdp, layout_)) {
        seeds.push_back({mixed.pose, mixed.twist, work.mode});
      }
    }
    bool first = true;
    for (const auto& seed : seeds) {
      const LmReport lm = lm_solve(work, work.measurements, seed, options_.lm);
      if (first || lm.final_cost < report.exact_cost) {
        report.pose = lm.state.pose;
        report.twist = lm.state.twist;
        report.exact_cost = lm.final_cost;
        report.lm_iterations = lm.iterations;
        report.lm_converged = lm.converged;
      }
      first = false;
    }
    report.timing.refine_s = seconds_since(t0);
    report.refined = true;
  }

  if (work.ground_truth) {
    report.position_error = position_error(work, *work.ground_truth, report.pose, report.twist);
    report.rotation_error = rotation_error(work, *work.ground_truth, report.pose, report.twist);
  }
  return report;
}

EstimateReport Pipeline::estimate_ls(const Scenario& scenario, std::uint64_t init_seed) const {
  return estimate_ls_from(scenario, random_init(scenario, init_seed));
}

EstimateReport Pipeline::estimate_ls_from(const Scenario& scenario, const LmState& init) const {
  Scenario work = scenario;
  work.measurements = schedule_for(work);

  EstimateReport report;
  report.mode = work.mode;
  report.variant = variant_;
  report.method = "ls";

  const auto t0 = std::chrono::steady_clock::now();
  const LmReport lm = lm_solve(work, work.measurements, init, options_.lm);
  report.timing.refine_s = seconds_since(t0);
  report.pose = lm.state.pose;
  report.twist = lm.state.twist;
  report.exact_cost = lm.final_cost;
  report.model_cost = map_objective(work, work.measurements, report.pose, report.twist,
                                    model_for(variant_));
  report.lm_iterations = lm.iterations;
  report.lm_converged = lm.converged;
  if (work.ground_truth) {
    report.position_error = position_error(work, *work.ground_truth, report.pose, report.twist);
    report.rotation_error = rotation_error(work, *work.ground_truth, report.pose, report.twist);
  }
  return report;
}

EstimateReport sdp_estimate(const Scenario& scenario, const PipelineOptions& options) {
  return Pipeline(scenario, options).estimate_sdp(scenario);
}

EstimateReport ls_estimate(const Scenario& scenario, std::uint64_t init_seed,
                           const PipelineOptions& options) {
  return Pipeline(scenario, options).estimate_ls(scenario, init_seed);
}

}  // namespace roinit
