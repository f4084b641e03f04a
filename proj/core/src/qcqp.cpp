#include "roinit/qcqp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <set>

namespace roinit {

namespace {

// Linear form over state slots; the homogenization slot is a regular index.
struct Lin {
  std::vector<std::pair<int, double>> terms;
  Lin() = default;
  Lin(int slot, double coeff) : terms{{slot, coeff}} {}
  Lin& add(int slot, double coeff) {
    terms.emplace_back(slot, coeff);
    return *this;
  }
};

// Coefficient c on the monomial x_i * x_j, split symmetrically.
void add_sym(Eigen::MatrixXd& a, int i, int j, double c) {
  if (i == j) {
    a(i, i) += c;
  } else {
    a(i, j) += 0.5 * c;
    a(j, i) += 0.5 * c;
  }
}

void add_product(Eigen::MatrixXd& a, const Lin& u, const Lin& v, double scale = 1.0) {
  for (const auto& [iu, cu] : u.terms) {
    for (const auto& [iv, cv] : v.terms) {
      add_sym(a, iu, iv, scale * cu * cv);
    }
  }
}

// Linear form of rotation entry (i, j) for a full d x d block at base.
Lin rot_entry_full(int base, int d, int i, int j) {
  return Lin(base + j * d + i, 1.0);  // column-major vec(R)
}

struct RotBlock {
  const StateLayout* layout;
  int base;  // slot offset of the block
  Lin entry(int i, int j) const { return rot_entry_full(base, layout->d, i, j); }
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int state_dof(Variant variant, int d) {
  switch (variant) {
    case Variant::Static: return d == 2 ? 3 : 6;
    case Variant::DynamicApprox:
    case Variant::DynamicExact: return 6;
    case Variant::Dynamic25: return 8;
  }
  return 0;
}

void check_mode(const Scenario& scenario, Variant variant) {
  const bool ok = (variant == Variant::Static && scenario.mode == Mode::Static) ||
                  (variant == Variant::Dynamic25 && scenario.mode == Mode::Dynamic25) ||
                  ((variant == Variant::DynamicApprox || variant == Variant::DynamicExact) &&
                   scenario.mode == Mode::Dynamic);
  if (!ok) {
    throw ModeMismatch("builder variant " + to_string(variant) +
                       " does not match scenario mode " + to_string(scenario.mode));
  }
}

// First-order tag position: R1 * (p_ul + c * (w^ p_ul + v)) + p1.
Eigen::VectorXd first_order_tag_position(const Pose& pose, const Twist& twist, double c,
                                         const Eigen::VectorXd& tag) {
  const int d = pose.dim();
  Eigen::VectorXd spun(d);
  if (d == 2) {
    spun = twist.angular(0) * Eigen::Vector2d(-tag(1), tag(0));
  } else {
    spun = skew3(twist.angular) * tag;
  }
  return pose.rotation().matrix() * (tag + c * (spun + twist.linear)) + pose.translation();
}

Eigen::VectorXd model_tag_position(const Scenario& scenario, const Pose& pose,
                                   const Twist& twist, int step, int tag, LiftModel model) {
  const double c = scenario.step_time(step);
  if (model == LiftModel::FirstOrder && scenario.is_dynamic()) {
    return first_order_tag_position(pose, twist, c, scenario.tags[tag]);
  }
  const Pose at_step = scenario.is_dynamic() ? pose * exp_se(twist, c) : pose;
  return at_step.apply(scenario.tags[tag]);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Static: return "static";
    case Variant::DynamicApprox: return "dynamic-approx";
    case Variant::DynamicExact: return "dynamic-exact";
    case Variant::Dynamic25: return "dynamic25";
  }
  return "static";
}

std::string to_string(ConstraintTag tag) {
  switch (tag) {
    case ConstraintTag::Homogenization: return "homogenization";
    case ConstraintTag::LeverArm: return "lever-arm";
    case ConstraintTag::NormLink: return "norm-link";
    case ConstraintTag::Orthogonality: return "orthogonality";
    case ConstraintTag::Handedness: return "handedness";
    case ConstraintTag::Motion: return "motion";
    case ConstraintTag::Redundant: return "redundant";
  }
  return "lever-arm";
}

int StateLayout::entry_index(int step, int tag) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].step == step && entries[i].tag == tag) return static_cast<int>(i);
  }
  return -1;
}

StateLayout StateLayout::build(const Scenario& scenario,
                               const std::vector<Measurement>& measurements, Variant variant) {
  check_mode(scenario, variant);
  if (measurements.empty()) {
    throw ModeMismatch("cannot build a layout from an empty measurement list");
  }
  StateLayout layout;
  layout.variant = variant;
  layout.d = scenario.dimension;
  // The 2.5D variant keeps the full 3x3 rotation block and pins it to a yaw
  // structure with linear constraints; a bare [cos, sin] pair leaves the
  // relaxation too weak to produce rank-1 solutions.
  layout.rot_size = layout.d * layout.d;
  layout.ang_size = variant == Variant::Static ? 0
                    : variant == Variant::Dynamic25 ? 1
                                                    : layout.d * (layout.d - 1) / 2;
  layout.steps = scenario.num_steps();
  layout.dt_r = scenario.window.dt_r;

  std::set<std::pair<int, int>> seen;
  for (const auto& m : measurements) seen.insert({m.time_index, m.tag_index});
  int offset = 0;
  for (const auto& [k, l] : seen) {
    LiftEntry e;
    e.step = k;
    e.tag = l;
    e.pos_offset = offset;
    e.norm_offset = offset + layout.d;
    layout.entries.push_back(e);
    offset += layout.d + 1;
  }
  layout.rot_offset = offset;
  offset += layout.rot_size;
  layout.pos_offset = offset;
  offset += layout.d;
  // The chained exact variant carries the velocity through the delta pose
  // slots instead of explicit twist coordinates.
  if (variant == Variant::DynamicApprox || variant == Variant::Dynamic25) {
    layout.ang_offset = offset;
    offset += layout.ang_size;
    layout.lin_offset = offset;
    offset += layout.d;
  }
  if (variant == Variant::DynamicExact) {
    for (int k = 2; k <= layout.steps; ++k) {
      layout.step_rot_offsets.push_back(offset);
      offset += layout.rot_size;
      layout.step_pos_offsets.push_back(offset);
      offset += layout.d;
    }
    layout.delta_rot_offset = offset;
    offset += layout.rot_size;
    layout.delta_pos_offset = offset;
    offset += layout.d;
  }
  layout.h_offset = offset;
  layout.n = offset + 1;
  return layout;
}

std::string StateLayout::hash(const Scenario& scenario) const {
  std::string key = to_string(variant);
  key += "|d=" + std::to_string(d) + "|steps=" + std::to_string(steps);
  key += "|dt=" + fmt17(dt_r) + "|n=" + std::to_string(n);
  key += "|entries=";
  for (const auto& e : entries) {
    key += std::to_string(e.step) + ":" + std::to_string(e.tag) + ";";
  }
  key += "|tags=";
  for (const auto& t : scenario.tags) {
    for (int i = 0; i < t.size(); ++i) key += fmt17(t(i)) + ",";
    key += ";";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(key)));
  return buf;
}

double effective_sigma(const Scenario& scenario) {
  return scenario.sigma_r > 0.0 ? scenario.sigma_r : 1.0;
}

Eigen::VectorXd lift_state(const Scenario& scenario, const StateLayout& layout,
                           const Pose& pose, const Twist& twist, LiftModel model) {
  if (pose.dim() != layout.d || twist.dim() != layout.d) {
    throw ModeMismatch("lift_state: pose/twist dimension does not match the layout");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.n);
  x(layout.h_offset) = 1.0;

  const Eigen::MatrixXd& r1 = pose.rotation().matrix();
  for (int j = 0; j < layout.d; ++j) {
    for (int i = 0; i < layout.d; ++i) {
      x(layout.rot_offset + j * layout.d + i) = r1(i, j);
    }
  }
  x.segment(layout.pos_offset, layout.d) = pose.translation();
  if (layout.ang_offset >= 0) {
    if (layout.yaw_structured()) {
      x(layout.ang_offset) = twist.yaw_rate();
    } else {
      x.segment(layout.ang_offset, layout.ang_size) = twist.angular;
    }
    x.segment(layout.lin_offset, layout.d) = twist.linear;
  }

  const LiftModel entry_model = layout.variant == Variant::DynamicExact ? LiftModel::Exact : model;
  for (const auto& e : layout.entries) {
    const Eigen::VectorXd q =
        model_tag_position(scenario, pose, twist, e.step, e.tag, entry_model);
    x.segment(e.pos_offset, layout.d) = q;
    x(e.norm_offset) = q.squaredNorm();
  }

  if (layout.variant == Variant::DynamicExact) {
    for (int k = 2; k <= layout.steps; ++k) {
      const Pose at_step = pose * exp_se(twist, layout.step_time(k));
      const Eigen::MatrixXd& r = at_step.rotation().matrix();
      const int ro = layout.step_rot_offsets[k - 2];
      for (int j = 0; j < layout.d; ++j) {
        for (int i = 0; i < layout.d; ++i) x(ro + j * layout.d + i) = r(i, j);
      }
      x.segment(layout.step_pos_offsets[k - 2], layout.d) = at_step.translation();
    }
    const Pose delta = exp_se(twist, layout.dt_r);
    const Eigen::MatrixXd& dr = delta.rotation().matrix();
    for (int j = 0; j < layout.d; ++j) {
      for (int i = 0; i < layout.d; ++i) {
        x(layout.delta_rot_offset + j * layout.d + i) = dr(i, j);
      }
    }
    x.segment(layout.delta_pos_offset, layout.d) = delta.translation();
  }
  return x;
}

double map_objective(const Scenario& scenario, const std::vector<Measurement>& measurements,
                     const Pose& pose, const Twist& twist, LiftModel model) {
  const double sigma = effective_sigma(scenario);
  double cost = 0.0;
  for (const auto& m : measurements) {
    const Eigen::VectorXd q =
        model_tag_position(scenario, pose, twist, m.time_index, m.tag_index, model);
    const double e = m.value - (scenario.anchors[m.anchor_index] - q).squaredNorm();
    cost += e * e;
  }
  return cost / (sigma * sigma * static_cast<double>(measurements.size()));
}

namespace {

void add_constraint(QcqpProblem& p, Eigen::MatrixXd a, ConstraintTag tag) {
  p.constraints.push_back({std::move(a), 0.0, tag});
}

// Orthonormality (columns and rows) plus handedness for one rotation block.
void add_rotation_constraints(QcqpProblem& p, const RotBlock& rot) {
  const StateLayout& layout = p.layout;
  const int n = layout.n;
  const Lin h(layout.h_offset, 1.0);
  const int d = layout.d;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      Eigen::MatrixXd col = Eigen::MatrixXd::Zero(n, n);
      Eigen::MatrixXd row = Eigen::MatrixXd::Zero(n, n);
      for (int a = 0; a < d; ++a) {
        add_product(col, rot.entry(a, i), rot.entry(a, j));
        add_product(row, rot.entry(i, a), rot.entry(j, a));
      }
      if (i == j) {
        add_product(col, h, h, -1.0);
        add_product(row, h, h, -1.0);
      }
      add_constraint(p, std::move(col), ConstraintTag::Orthogonality);
      add_constraint(p, std::move(row), ConstraintTag::Orthogonality);
    }
  }
  if (d == 2) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    add_product(a, rot.entry(0, 0), h);
    add_product(a, rot.entry(1, 1), h, -1.0);
    add_constraint(p, std::move(a), ConstraintTag::Handedness);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    add_product(b, rot.entry(0, 1), h);
    add_product(b, rot.entry(1, 0), h);
    add_constraint(p, std::move(b), ConstraintTag::Handedness);
    return;
  }
  // Right-handedness: col_i x col_j = col_k for all cyclic (i, j, k).
  constexpr int cyc[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
  for (const auto& c : cyc) {
    const int i = c[0], j = c[1], k = c[2];
    for (int m = 0; m < 3; ++m) {
      const int m1 = (m + 1) % 3, m2 = (m + 2) % 3;
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
      add_product(a, rot.entry(m1, i), rot.entry(m2, j));
      add_product(a, rot.entry(m2, i), rot.entry(m1, j), -1.0);
      add_product(a, rot.entry(m, k), h, -1.0);
      add_constraint(p, std::move(a), ConstraintTag::Handedness);
    }
  }
}

// p_tilde = R * p_ul + p, h-coupled, one scalar constraint per coordinate.
void add_lever_arm(QcqpProblem& p, const LiftEntry& e, const RotBlock& rot, int pos_base,
                   const Eigen::VectorXd& tag, ConstraintTag tag_kind) {
  const StateLayout& layout = p.layout;
  const Lin h(layout.h_offset, 1.0);
  for (int i = 0; i < layout.d; ++i) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(layout.n, layout.n);
    add_product(a, Lin(e.pos_offset + i, 1.0), h);
    for (int j = 0; j < layout.d; ++j) {
      add_product(a, rot.entry(i, j), h, -tag(j));
    }
    add_product(a, Lin(pos_base + i, 1.0), h, -1.0);
    add_constraint(p, std::move(a), tag_kind);
  }
}

void add_norm_link(QcqpProblem& p, const LiftEntry& e) {
  const StateLayout& layout = p.layout;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(layout.n, layout.n);
  for (int i = 0; i < layout.d; ++i) {
    add_product(a, Lin(e.pos_offset + i, 1.0), Lin(e.pos_offset + i, 1.0));
  }
  add_product(a, Lin(e.norm_offset, 1.0), Lin(layout.h_offset, 1.0), -1.0);
  add_constraint(p, std::move(a), ConstraintTag::NormLink);
}

// Linearized motion: p_tilde(t_k) = R1 p_ul + p1 + c_k R1 (w^ p_ul + v).
void add_motion(QcqpProblem& p, const LiftEntry& e, const RotBlock& rot,
                const Eigen::VectorXd& tag) {
  const StateLayout& layout = p.layout;
  const Lin h(layout.h_offset, 1.0);
  const double c = layout.step_time(e.step);
  // Coordinates of w^ p_ul with the angular rate factored out (planar or yaw).
  Eigen::VectorXd spun_dir(layout.d);
  spun_dir.setZero();
  spun_dir(0) = -tag(1);
  spun_dir(1) = tag(0);
  for (int i = 0; i < layout.d; ++i) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(layout.n, layout.n);
    add_product(a, Lin(e.pos_offset + i, 1.0), h);
    add_product(a, Lin(layout.pos_offset + i, 1.0), h, -1.0);
    for (int j = 0; j < layout.d; ++j) {
      add_product(a, rot.entry(i, j), h, -tag(j));
      add_product(a, rot.entry(i, j), Lin(layout.ang_offset, 1.0), -c * spun_dir(j));
      add_product(a, rot.entry(i, j), Lin(layout.lin_offset + j, 1.0), -c);
    }
    add_constraint(p, std::move(a), ConstraintTag::Motion);
  }
}

QcqpProblem build_impl(const Scenario& scenario, const std::vector<Measurement>& measurements,
                       Variant variant) {
  scenario.validate();
  QcqpProblem p;
  p.layout = StateLayout::build(scenario, measurements, variant);
  const StateLayout& layout = p.layout;
  const int n = layout.n;
  p.cost_sigma = effective_sigma(scenario);
  p.measurement_deficit =
      static_cast<int>(measurements.size()) < state_dof(variant, layout.d);

  // Cost: one rank-1 term per measurement from the expanded squared-range
  // error, weighted by 1/(sigma^2 N_r).
  p.q = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  for (const auto& m : measurements) {
    const int e = layout.entry_index(m.time_index, m.tag_index);
    const auto& entry = layout.entries[e];
    const Eigen::VectorXd& anchor = scenario.anchors[m.anchor_index];
    a.setZero();
    a.segment(entry.pos_offset, layout.d) = 2.0 * anchor;
    a(entry.norm_offset) = -1.0;
    a(layout.h_offset) = m.value - anchor.squaredNorm();
    p.q.selfadjointView<Eigen::Lower>().rankUpdate(a, 1.0);
  }
  p.q.triangularView<Eigen::StrictlyUpper>() = p.q.transpose();
  p.q /= p.cost_sigma * p.cost_sigma * static_cast<double>(measurements.size());

  p.a0 = Eigen::MatrixXd::Zero(n, n);
  p.a0(layout.h_offset, layout.h_offset) = 1.0;

  const RotBlock rot1{&layout, layout.rot_offset};
  add_rotation_constraints(p, rot1);
  if (variant == Variant::Dynamic25) {
    // Yaw structure: zero roll/pitch couplings and a unit lower-right entry.
    const Lin h(layout.h_offset, 1.0);
    const int zero_entries[4][2] = {{0, 2}, {1, 2}, {2, 0}, {2, 1}};
    for (const auto& ij : zero_entries) {
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
      add_product(a, rot1.entry(ij[0], ij[1]), h);
      add_constraint(p, std::move(a), ConstraintTag::Orthogonality);
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    add_product(a, rot1.entry(2, 2), h);
    add_product(a, h, h, -1.0);
    add_constraint(p, std::move(a), ConstraintTag::Orthogonality);
  }

  if (variant == Variant::Static) {
    for (const auto& e : layout.entries) {
      add_lever_arm(p, e, rot1, layout.pos_offset, scenario.tags[e.tag],
                    ConstraintTag::LeverArm);
      add_norm_link(p, e);
    }
    return p;
  }

  if (variant == Variant::DynamicApprox || variant == Variant::Dynamic25) {
    for (const auto& e : layout.entries) {
      add_motion(p, e, rot1, scenario.tags[e.tag]);
      add_norm_link(p, e);
    }
    return p;
  }

  // Exact dynamic: per-step poses chained by delta T, exact lever arms.
  const RotBlock delta_rot{&layout, layout.delta_rot_offset};
  add_rotation_constraints(p, delta_rot);
  for (int k = 2; k <= layout.steps; ++k) {
    const RotBlock rk{&layout, layout.step_rot_offsets[k - 2]};
    add_rotation_constraints(p, rk);
  }
  const Lin h(layout.h_offset, 1.0);
  for (int k = 2; k <= layout.steps; ++k) {
    const RotBlock prev =
        k == 2 ? rot1 : RotBlock{&layout, layout.step_rot_offsets[k - 3]};
    const int prev_pos = k == 2 ? layout.pos_offset : layout.step_pos_offsets[k - 3];
    const RotBlock cur{&layout, layout.step_rot_offsets[k - 2]};
    const int cur_pos = layout.step_pos_offsets[k - 2];
    // R(t_k) = R(t_{k-1}) * dR
    for (int i = 0; i < layout.d; ++i) {
      for (int j = 0; j < layout.d; ++j) {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
        add_product(c, cur.entry(i, j), h);
        for (int t = 0; t < layout.d; ++t) {
          add_product(c, prev.entry(i, t), delta_rot.entry(t, j), -1.0);
        }
        add_constraint(p, std::move(c), ConstraintTag::Motion);
      }
    }
    // p(t_k) = R(t_{k-1}) * dp + p(t_{k-1})
    for (int i = 0; i < layout.d; ++i) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
      add_product(c, Lin(cur_pos + i, 1.0), h);
      for (int t = 0; t < layout.d; ++t) {
        add_product(c, prev.entry(i, t), Lin(layout.delta_pos_offset + t, 1.0), -1.0);
      }
      add_product(c, Lin(prev_pos + i, 1.0), h, -1.0);
      add_constraint(p, std::move(c), ConstraintTag::Motion);
    }
  }
  for (const auto& e : layout.entries) {
    const RotBlock rk =
        e.step == 1 ? rot1 : RotBlock{&layout, layout.step_rot_offsets[e.step - 2]};
    const int pos_base = e.step == 1 ? layout.pos_offset : layout.step_pos_offsets[e.step - 2];
    add_lever_arm(p, e, rk, pos_base, scenario.tags[e.tag], ConstraintTag::LeverArm);
    add_norm_link(p, e);
  }
  return p;
}

}  // namespace

QcqpProblem build_static(const Scenario& scenario,
                         const std::vector<Measurement>& measurements) {
  return build_impl(scenario, measurements, Variant::Static);
}

QcqpProblem build_dynamic(const Scenario& scenario,
                          const std::vector<Measurement>& measurements) {
  const Variant v = scenario.mode == Mode::Dynamic25 ? Variant::Dynamic25 : Variant::DynamicApprox;
  return build_impl(scenario, measurements, v);
}

QcqpProblem build_dynamic_exact(const Scenario& scenario,
                                const std::vector<Measurement>& measurements) {
  return build_impl(scenario, measurements, Variant::DynamicExact);
}

QcqpProblem build_problem(const Scenario& scenario,
                          const std::vector<Measurement>& measurements, Variant variant) {
  return build_impl(scenario, measurements, variant);
}

namespace {

void dump_matrix(std::ostream& os, const Eigen::MatrixXd& m, const std::string& name) {
  std::vector<std::string> lines;
  for (int j = 0; j < m.cols(); ++j) {
    for (int i = 0; i <= j; ++i) {
      if (m(i, j) != 0.0) {
        lines.push_back(std::to_string(i) + " " + std::to_string(j) + " " + fmt17(m(i, j)));
      }
    }
  }
  os << "matrix " << name << " " << lines.size() << "\n";
  for (const auto& l : lines) os << l << "\n";
}

}  // namespace

void dump_problem(const QcqpProblem& problem, std::ostream& os) {
  os << "ro-init-problem v1\n";
  os << "n " << problem.layout.n << "\n";
  dump_matrix(os, problem.q, "Q");
  dump_matrix(os, problem.a0, "A0 homogenization");
  for (std::size_t i = 0; i < problem.constraints.size(); ++i) {
    dump_matrix(os, problem.constraints[i].a,
                "A" + std::to_string(i + 1) + " " + to_string(problem.constraints[i].tag));
  }
}

}  // namespace roinit
