#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "roinit/redundancy.hpp"
#include "roinit/symmat.hpp"

using namespace roinit;
using roinit::test::make_scenario;
using roinit::test::shared_pipeline;

namespace {

// Residual of projecting a symmetric matrix onto the orthonormal basis span.
double projection_residual(const Eigen::MatrixXd& m,
                           const std::vector<Eigen::MatrixXd>& basis) {
  Eigen::VectorXd v = svec(m);
  v /= v.norm();
  Eigen::VectorXd r = v;
  for (const auto& s : basis) {
    const Eigen::VectorXd sv = svec(s);
    r -= sv.dot(v) * sv;
  }
  return r.norm();
}

void sym_set(Eigen::MatrixXd& m, int i, int j, double coeff) {
  if (i == j) {
    m(i, i) += coeff;
  } else {
    m(i, j) += 0.5 * coeff;
    m(j, i) += 0.5 * coeff;
  }
}

}  // namespace

TEST_SUITE("redundancy") {

TEST_CASE("planar static span contains the rotation symmetry identities") {
  const auto& pipe = shared_pipeline("static2d");
  const StateLayout& L = pipe.layout();
  const int n = L.n;
  const int r1 = L.rot_offset + 0, r3 = L.rot_offset + 1;
  const int r2 = L.rot_offset + 2, r4 = L.rot_offset + 3;
  const int h = L.h_offset;

  Eigen::MatrixXd diag_equal = Eigen::MatrixXd::Zero(n, n);  // h*(r1 - r4)
  sym_set(diag_equal, r1, h, 1.0);
  sym_set(diag_equal, r4, h, -1.0);
  CHECK(projection_residual(diag_equal, pipe.basis().matrices) < 1e-8);

  Eigen::MatrixXd off_diag = Eigen::MatrixXd::Zero(n, n);  // h*(r2 + r3)
  sym_set(off_diag, r2, h, 1.0);
  sym_set(off_diag, r3, h, 1.0);
  CHECK(projection_residual(off_diag, pipe.basis().matrices) < 1e-8);

  // z-coupled variant: z * (r1 - r4)
  Eigen::MatrixXd z_coupled = Eigen::MatrixXd::Zero(n, n);
  const int z0 = L.entries[0].norm_offset;
  sym_set(z_coupled, r1, z0, 1.0);
  sym_set(z_coupled, r4, z0, -1.0);
  CHECK(projection_residual(z_coupled, pipe.basis().matrices) < 1e-8);
}

TEST_CASE("planar static span contains the lever-arm product identities") {
  // (x_t - x)^2 = (x_t - x) * (r2 * y_ul) and the y-row analogue.
  const auto& pipe = shared_pipeline("static2d");
  const Scenario tpl = sample_scenario(SamplerConfig::preset("static2d"), 1).first;
  const StateLayout& L = pipe.layout();
  const int n = L.n;
  const int h = L.h_offset;
  (void)h;
  for (const auto& entry : L.entries) {
    const double y_ul = tpl.tags[entry.tag](1);
    const int xt = entry.pos_offset, yt = entry.pos_offset + 1;
    const int px = L.pos_offset, py = L.pos_offset + 1;
    const int r2 = L.rot_offset + 2, r4 = L.rot_offset + 3;

    Eigen::MatrixXd mx = Eigen::MatrixXd::Zero(n, n);
    sym_set(mx, xt, xt, 1.0);
    sym_set(mx, xt, px, -2.0);
    sym_set(mx, px, px, 1.0);
    sym_set(mx, xt, r2, -y_ul);
    sym_set(mx, px, r2, y_ul);
    CHECK(projection_residual(mx, pipe.basis().matrices) < 1e-8);

    Eigen::MatrixXd my = Eigen::MatrixXd::Zero(n, n);
    sym_set(my, yt, yt, 1.0);
    sym_set(my, yt, py, -2.0);
    sym_set(my, py, py, 1.0);
    sym_set(my, yt, r4, -y_ul);
    sym_set(my, py, r4, y_ul);
    CHECK(projection_residual(my, pipe.basis().matrices) < 1e-8);
  }
}

TEST_CASE("span contains every hand-built constraint") {
  for (const char* preset : {"static2d", "static3d", "dynamic2d", "dynamic25d"}) {
    const auto& pipe = shared_pipeline(preset);
    const auto b = make_scenario(preset, 19);
    const QcqpProblem p = build_problem(b.scenario, b.scenario.measurements, pipe.variant());
    double worst = 0.0;
    for (const auto& c : p.constraints) {
      worst = std::max(worst, projection_residual(c.a, pipe.basis().matrices));
    }
    CAPTURE(preset);
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("discovered forms vanish on fresh samples") {
  std::mt19937_64 rng(77001);
  for (const char* preset : {"static2d", "dynamic2d"}) {
    const auto& pipe = shared_pipeline(preset);
    const auto b = make_scenario(preset, 20);
    const LiftModel model =
        pipe.variant() == Variant::Static ? LiftModel::Exact : LiftModel::FirstOrder;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const Pose pose = sample_pose(rng, b.scenario.dimension, b.scenario.mode);
      const Twist twist = sample_twist(rng, b.scenario.dimension, b.scenario.mode);
      const Eigen::VectorXd x = lift_state(b.scenario, pipe.layout(), pose, twist, model);
      for (const auto& s : pipe.basis().matrices) {
        worst = std::max(worst, std::abs(x.dot(s * x)));
      }
    }
    CAPTURE(preset);
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("basis matrices are orthonormal under the trace inner product") {
  const auto& basis = shared_pipeline("static2d").basis();
  for (int i = 0; i < basis.size(); ++i) {
    for (int j = i; j < basis.size(); ++j) {
      const double ip = trace_inner(basis.matrices[i], basis.matrices[j]);
      CHECK(std::abs(ip - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
  }
}

TEST_CASE("basis sizes are stable regression values") {
  // Frozen after the first computation; a change signals a layout or
  // discovery change that needs review.
  struct Expected {
    const char* preset;
    int full, face, reduced;
  };
  const Expected expected[] = {
      {"static2d", 66, 7, 3},
      {"static3d", 215, 16, 26},
      {"dynamic2d", 940, 18, 30},
      {"dynamic25d", 1961, 20, 26},
  };
  for (const auto& e : expected) {
    const auto& basis = shared_pipeline(e.preset).basis();
    CAPTURE(e.preset);
    CHECK(basis.size() == e.full);
    CHECK(basis.face_dim() == e.face);
    CHECK(basis.reduced_size() == e.reduced);
  }
}

TEST_CASE("nullspace dimension is stable across disjoint sample sets") {
  const Scenario tpl = sample_scenario(SamplerConfig::preset("static2d"), 1).first;
  const StateLayout layout =
      StateLayout::build(tpl, canonical_schedule(tpl), Variant::Static);
  const int need = 3 * svec_dim(layout.n);
  int sizes[3] = {0, 0, 0};
  for (int set = 0; set < 3; ++set) {
    std::mt19937_64 rng(1000 + set);
    std::vector<Eigen::VectorXd> states;
    for (int i = 0; i < need; ++i) {
      states.push_back(lift_state(tpl, layout, sample_pose(rng, 2, Mode::Static),
                                  Twist::zero(2)));
    }
    sizes[set] = nullspace_basis(states, layout.n, 1e-8).size();
  }
  CHECK(sizes[0] == sizes[1]);
  CHECK(sizes[1] == sizes[2]);
}

TEST_CASE("free coordinates contribute no constraints") {
  // States whose entries are free parameters plus the unit slot: the only
  // moment relations would involve the free slots, and there are none.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Eigen::VectorXd> states;
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd x(3);
    x << u(rng), u(rng), 1.0;
    states.push_back(x);
  }
  const ConstraintBasis basis = nullspace_basis(states, 3, 1e-8);
  CHECK(basis.size() == 0);
  CHECK(basis.face_dim() == 3);
}

TEST_CASE("attach replaces the solver-facing set and keeps the originals") {
  const auto b = make_scenario("static2d", 21);
  const QcqpProblem p = build_static(b.scenario, b.scenario.measurements);
  const auto& basis = shared_pipeline("static2d").basis();

  const QcqpProblem attached = attach(p, basis);
  CHECK(attached.constraints.size() == static_cast<std::size_t>(basis.size()));
  CHECK(attached.verification.size() == p.constraints.size());
  for (const auto& c : attached.constraints) {
    CHECK(c.tag == ConstraintTag::Redundant);
  }

  // idempotent in constraint count
  const QcqpProblem twice = attach(attached, basis);
  CHECK(twice.constraints.size() == attached.constraints.size());
  CHECK(twice.verification.size() == attached.verification.size());

  // the attached feasible set still contains exact lifts
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Pose pose = sample_pose(rng, 2, Mode::Static);
    const Eigen::VectorXd x = lift_state(b.scenario, p.layout, pose, Twist::zero(2));
    for (const auto& c : attached.constraints) {
      CHECK(std::abs(x.dot(c.a * x)) < 1e-8);
    }
  }
}

TEST_CASE("attaching an empty basis is a no-op") {
  const auto b = make_scenario("static2d", 22);
  const QcqpProblem p = build_static(b.scenario, b.scenario.measurements);
  ConstraintBasis empty;
  empty.n = p.layout.n;
  const QcqpProblem same = attach(p, empty);
  CHECK(same.constraints.size() == p.constraints.size());
  CHECK(same.verification.empty());
}

TEST_CASE("attach rejects a mismatched layout") {
  const auto b = make_scenario("static3d", 23);
  const QcqpProblem p = build_static(b.scenario, b.scenario.measurements);
  CHECK_THROWS_AS(attach(p, shared_pipeline("static2d").basis()), LayoutMismatch);
}

TEST_CASE("cache round trip preserves the basis exactly") {
  const auto& basis = shared_pipeline("static2d").basis();
  const std::filesystem::path file =
      std::filesystem::temp_directory_path() / "roinit-basis-roundtrip.txt";
  save_basis(basis, file);
  const ConstraintBasis loaded = load_basis(file);
  std::filesystem::remove(file);
  CHECK(loaded.layout_hash == basis.layout_hash);
  CHECK(loaded.n == basis.n);
  REQUIRE(loaded.size() == basis.size());
  REQUIRE(loaded.reduced_size() == basis.reduced_size());
  CHECK((loaded.face - basis.face).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < basis.size(); ++i) {
    CHECK((loaded.matrices[i] - basis.matrices[i]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("discovery rejects undersized sample budgets") {
  const Scenario tpl = sample_scenario(SamplerConfig::preset("static2d"), 1).first;
  DiscoveryOptions opts;
  opts.n_samples = svec_dim(13);  // below the 2x requirement
  CHECK_THROWS_AS(discover_constraints(tpl, Variant::Static, opts), InsufficientSamples);
}

TEST_CASE("cache loader rejects corrupted files") {
  const std::filesystem::path file =
      std::filesystem::temp_directory_path() / "roinit-bad-basis.txt";
  {
    std::ofstream os(file);
    os << "not a basis\n";
  }
  CHECK_THROWS_AS(load_basis(file), ParseError);
  std::filesystem::remove(file);
}

}  // TEST_SUITE
