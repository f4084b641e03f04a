#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "roinit/qcqp.hpp"
#include "roinit/symmat.hpp"

using namespace roinit;
using roinit::test::make_scenario;

namespace {

// Taylor remainder bound for the linearized motion constraint at an
// exactly-lifted state: ||exp(A) - I - A|| <= ||A||^2/2 * e^||A||.
double motion_bound(const Twist& twist, double c, const Eigen::VectorXd& tag) {
  Twist scaled;
  scaled.angular = twist.angular * c;
  scaled.linear = twist.linear * c;
  const double a = scaled.wedge().norm();
  const Eigen::VectorXd bar = (Eigen::VectorXd(tag.size() + 1) << tag, 1.0).finished();
  return 0.5 * a * a * std::exp(a) * bar.norm();
}

double max_constraint_residual(const QcqpProblem& p, const Eigen::VectorXd& x,
                               ConstraintTag skip = ConstraintTag::Redundant) {
  double worst = std::abs(x.dot(p.a0 * x) - 1.0);
  for (const auto& c : p.constraints) {
    if (c.tag == skip) continue;
    worst = std::max(worst, std::abs(x.dot(c.a * x)));
  }
  return worst;
}

LmState random_state(std::mt19937_64& rng, const Scenario& scenario) {
  LmState s;
  s.mode = scenario.mode;
  s.pose = sample_pose(rng, scenario.dimension, scenario.mode);
  s.twist = sample_twist(rng, scenario.dimension, scenario.mode);
  return s;
}

}  // namespace

TEST_SUITE("qcqp") {

TEST_CASE("layout dimensions per variant") {
  const auto s2 = make_scenario("static2d", 2);
  CHECK(StateLayout::build(s2.scenario, s2.scenario.measurements, Variant::Static).n == 13);
  const auto s3 = make_scenario("static3d", 2);
  CHECK(StateLayout::build(s3.scenario, s3.scenario.measurements, Variant::Static).n == 25);
  const auto d2 = make_scenario("dynamic2d", 2);
  CHECK(StateLayout::build(d2.scenario, d2.scenario.measurements, Variant::DynamicApprox).n ==
        46);
  CHECK(StateLayout::build(d2.scenario, d2.scenario.measurements, Variant::DynamicExact).n ==
        115);
  const auto d25 = make_scenario("dynamic25d", 2);
  CHECK(StateLayout::build(d25.scenario, d25.scenario.measurements, Variant::Dynamic25).n ==
        65);
}

TEST_CASE("exact chained layout for a two-step window") {
  auto bundle = make_scenario("dynamic2d", 3);
  bundle.scenario.window.t_v = 0.1;  // two steps
  bundle.scenario.measurements =
      simulate_measurements(bundle.scenario, bundle.truth, 9);
  REQUIRE(bundle.scenario.num_steps() == 2);
  const StateLayout layout =
      StateLayout::build(bundle.scenario, bundle.scenario.measurements, Variant::DynamicExact);
  // two lifted pairs, two pose blocks, one delta block, h
  CHECK(layout.n == 2 * 3 + 2 * 6 + 6 + 1);
}

TEST_CASE("static constraint counts per family") {
  const auto b = make_scenario("static2d", 2);
  const QcqpProblem p = build_static(b.scenario, b.scenario.measurements);
  int lever = 0, norm = 0, orth = 0, handed = 0;
  for (const auto& c : p.constraints) {
    switch (c.tag) {
      case ConstraintTag::LeverArm: ++lever; break;
      case ConstraintTag::NormLink: ++norm; break;
      case ConstraintTag::Orthogonality: ++orth; break;
      case ConstraintTag::Handedness: ++handed; break;
      default: break;
    }
  }
  CHECK(lever == 4);
  CHECK(norm == 2);
  CHECK(orth == 6);
  CHECK(handed == 2);
  CHECK(p.a0(p.layout.h_offset, p.layout.h_offset) == 1.0);
}

TEST_CASE("lifting the identity pose") {
  const auto b = make_scenario("static2d", 2);
  const StateLayout layout =
      StateLayout::build(b.scenario, b.scenario.measurements, Variant::Static);
  Scenario s = b.scenario;
  const Eigen::VectorXd x =
      lift_state(s, layout, Pose::identity(2), Twist::zero(2));
  const int e = layout.entry_index(1, 0);
  REQUIRE(e >= 0);
  CHECK(x(layout.entries[e].pos_offset) == doctest::Approx(0.0));
  CHECK(x(layout.entries[e].pos_offset + 1) == doctest::Approx(0.095));
  CHECK(x(layout.entries[e].norm_offset) == doctest::Approx(0.009025));
  CHECK(x(layout.h_offset) == 1.0);
}

TEST_CASE("lifted tag positions agree with the homogeneous product") {
  const auto b = make_scenario("static2d", 2);
  const StateLayout layout =
      StateLayout::build(b.scenario, b.scenario.measurements, Variant::Static);
  const Pose pose(Rotation::planar(M_PI / 2.0), Eigen::Vector2d(1.0, 0.0));
  const Eigen::VectorXd x = lift_state(b.scenario, layout, pose, Twist::zero(2));
  for (const auto& entry : layout.entries) {
    // oracle: full homogeneous matrix product
    Eigen::Vector3d bar(b.scenario.tags[entry.tag](0), b.scenario.tags[entry.tag](1), 1.0);
    const Eigen::VectorXd expected = (pose.homogeneous() * bar).head(2);
    CHECK((x.segment(entry.pos_offset, 2) - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("exact lifts satisfy every constraint of the exact variants") {
  std::mt19937_64 rng(5);
  for (const char* preset : {"static2d", "static3d"}) {
    const auto b = make_scenario(preset, 4);
    const QcqpProblem p = build_static(b.scenario, b.scenario.measurements);
    for (int i = 0; i < 300; ++i) {
      const LmState s = random_state(rng, b.scenario);
      const Eigen::VectorXd x = lift_state(b.scenario, p.layout, s.pose, s.twist);
      CHECK(max_constraint_residual(p, x) < 1e-10);
    }
  }
  const auto b = make_scenario("dynamic2d", 4);
  const QcqpProblem p = build_dynamic_exact(b.scenario, b.scenario.measurements);
  for (int i = 0; i < 100; ++i) {
    const LmState s = random_state(rng, b.scenario);
    const Eigen::VectorXd x = lift_state(b.scenario, p.layout, s.pose, s.twist);
    CHECK(max_constraint_residual(p, x) < 1e-10);
  }
}

TEST_CASE("first-order lifts satisfy the approximate dynamic constraints") {
  std::mt19937_64 rng(6);
  for (const char* preset : {"dynamic2d", "dynamic25d"}) {
    const auto b = make_scenario(preset, 4);
    const QcqpProblem p = build_dynamic(b.scenario, b.scenario.measurements);
    for (int i = 0; i < 300; ++i) {
      const LmState s = random_state(rng, b.scenario);
      const Eigen::VectorXd x =
          lift_state(b.scenario, p.layout, s.pose, s.twist, LiftModel::FirstOrder);
      CHECK(max_constraint_residual(p, x) < 1e-10);
    }
  }
}

TEST_CASE("exact lifts violate the linearized motion rows only within the Taylor bound") {
  std::mt19937_64 rng(7);
  const auto b = make_scenario("dynamic2d", 4);
  const QcqpProblem p = build_dynamic(b.scenario, b.scenario.measurements);
  for (int i = 0; i < 100; ++i) {
    const LmState s = random_state(rng, b.scenario);
    const Eigen::VectorXd x = lift_state(b.scenario, p.layout, s.pose, s.twist);
    int motion_row = 0;
    for (const auto& c : p.constraints) {
      const double r = std::abs(x.dot(c.a * x));
      if (c.tag == ConstraintTag::Motion) {
        const auto& entry = p.layout.entries[motion_row / 2];
        const double bound = motion_bound(s.twist, p.layout.step_time(entry.step),
                                          b.scenario.tags[entry.tag]);
        CHECK(r <= bound * (1.0 + 1e-9) + 1e-12);
        ++motion_row;
      } else {
        CHECK(r < 1e-10);
      }
    }
  }
}

TEST_CASE("zero twist reduces motion constraints to static lever arms") {
  std::mt19937_64 rng(8);
  const auto b = make_scenario("dynamic2d", 4);
  const QcqpProblem p = build_dynamic(b.scenario, b.scenario.measurements);
  for (int i = 0; i < 50; ++i) {
    LmState s = random_state(rng, b.scenario);
    s.twist = Twist::zero(2);
    const Eigen::VectorXd x = lift_state(b.scenario, p.layout, s.pose, s.twist);
    CHECK(max_constraint_residual(p, x) < 1e-10);
  }
}

TEST_CASE("cost matches the direct objective") {
  std::mt19937_64 rng(9);
  struct Case {
    const char* preset;
    Variant variant;
    LiftModel model;
  };
  const Case cases[] = {
      {"static2d", Variant::Static, LiftModel::Exact},
      {"static3d", Variant::Static, LiftModel::Exact},
      {"dynamic2d", Variant::DynamicApprox, LiftModel::FirstOrder},
      {"dynamic25d", Variant::Dynamic25, LiftModel::FirstOrder},
      {"dynamic2d", Variant::DynamicExact, LiftModel::Exact},
  };
  for (const auto& c : cases) {
    const auto b = make_scenario(c.preset, 10, 0.05);
    const QcqpProblem p = build_problem(b.scenario, b.scenario.measurements, c.variant);
    for (int i = 0; i < 50; ++i) {
      const LmState s = random_state(rng, b.scenario);
      const Eigen::VectorXd x = lift_state(b.scenario, p.layout, s.pose, s.twist, c.model);
      const double quad = x.dot(p.q * x);
      const double direct =
          map_objective(b.scenario, b.scenario.measurements, s.pose, s.twist, c.model);
      CHECK(quad == doctest::Approx(direct).epsilon(1e-10));
    }
  }
}

TEST_CASE("noiseless cost vanishes at the lifted truth") {
  for (const char* preset : {"static2d", "static3d"}) {
    const auto b = make_scenario(preset, 11);
    const QcqpProblem p = build_static(b.scenario, b.scenario.measurements);
    const Eigen::VectorXd x =
        lift_state(b.scenario, p.layout, b.truth.initial_pose, b.truth.twist);
    CHECK(std::abs(x.dot(p.q * x)) < 1e-10);
  }
}

TEST_CASE("cost gradient matches finite differences") {
  std::mt19937_64 rng(12);
  const auto b = make_scenario("static2d", 12, 0.05);
  const QcqpProblem p = build_static(b.scenario, b.scenario.measurements);
  const LmState s = random_state(rng, b.scenario);
  const Eigen::VectorXd x = lift_state(b.scenario, p.layout, s.pose, s.twist);
  const Eigen::VectorXd grad = 2.0 * p.q * x;
  const double h = 1e-6;
  for (int i = 0; i < p.layout.n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    const double fd = (xp.dot(p.q * xp) - xm.dot(p.q * xm)) / (2.0 * h);
    CHECK(grad(i) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("delta slots of the exact lift match the step exponential") {
  const auto b = make_scenario("dynamic2d", 13);
  const QcqpProblem p = build_dynamic_exact(b.scenario, b.scenario.measurements);
  const Eigen::VectorXd x =
      lift_state(b.scenario, p.layout, b.truth.initial_pose, b.truth.twist);
  const Pose delta = exp_se(b.truth.twist, b.scenario.window.dt_r);
  const Eigen::MatrixXd dr = delta.rotation().matrix();
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      CHECK(x(p.layout.delta_rot_offset + j * 2 + i) == doctest::Approx(dr(i, j)));
    }
  }
  CHECK((x.segment(p.layout.delta_pos_offset, 2) - delta.translation()).norm() < 1e-14);
}

TEST_CASE("builders reject mismatched modes") {
  const auto stat = make_scenario("static2d", 14);
  CHECK_THROWS_AS(build_dynamic(stat.scenario, stat.scenario.measurements), ModeMismatch);
  const auto dyn = make_scenario("dynamic2d", 14);
  CHECK_THROWS_AS(build_static(dyn.scenario, dyn.scenario.measurements), ModeMismatch);
  const auto d25 = make_scenario("dynamic25d", 14);
  CHECK_THROWS_AS(build_dynamic_exact(d25.scenario, d25.scenario.measurements), ModeMismatch);
}

TEST_CASE("lift rejects mismatched dimensions") {
  const auto b = make_scenario("static3d", 15);
  const StateLayout layout =
      StateLayout::build(b.scenario, b.scenario.measurements, Variant::Static);
  CHECK_THROWS_AS(lift_state(b.scenario, layout, Pose::identity(2), Twist::zero(2)),
                  ModeMismatch);
}

TEST_CASE("problem dump is parseable coordinate text") {
  const auto b = make_scenario("static2d", 16);
  const QcqpProblem p = build_static(b.scenario, b.scenario.measurements);
  std::ostringstream os;
  dump_problem(p, os);
  std::istringstream is(os.str());
  std::string tag, version;
  is >> tag >> version;
  CHECK(tag == "ro-init-problem");
  std::string key;
  int n = 0;
  is >> key >> n;
  CHECK(key == "n");
  CHECK(n == 13);
  // first matrix section header
  std::string word, name;
  int nnz = 0;
  is >> word >> name >> nnz;
  CHECK(word == "matrix");
  CHECK(name == "Q");
  CHECK(nnz > 0);
  for (int i = 0; i < nnz; ++i) {
    int r = 0, c = 0;
    double v = 0.0;
    is >> r >> c >> v;
    CHECK(r <= c);  // upper triangle
  }
  CHECK(is.good());
}

TEST_CASE("all constraints are symmetric") {
  for (const char* preset : {"static3d", "dynamic2d", "dynamic25d"}) {
    const auto b = make_scenario(preset, 17);
    const QcqpProblem p = build_problem(b.scenario, b.scenario.measurements,
                                        roinit::test::default_variant(b.scenario));
    CHECK((p.q - p.q.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    for (const auto& c : p.constraints) {
      CHECK((c.a - c.a.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

}  // TEST_SUITE
