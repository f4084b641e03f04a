#include "roinit/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace roinit {

namespace {

constexpr double kPositionRange = 4.0;   // m
constexpr double kLinearVelRange = 1.0;  // m/s
constexpr double kAngularVelRange = 0.3; // rad/s

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::VectorXd uniform_position(std::mt19937_64& rng, int d) {
  Eigen::VectorXd p(d);
  for (int i = 0; i < d; ++i) p(i) = uniform(rng, -kPositionRange, kPositionRange);
  return p;
}

// 17 significant digits: enough to reproduce any IEEE-754 double exactly.
std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  os << '[';
  for (int i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << format_double(v(i));
  }
  os << ']';
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  os << '[';
  for (int i = 0; i < m.rows(); ++i) {
    if (i) os << ',';
    write_vector(os, m.row(i).transpose());
  }
  os << ']';
}

const nlohmann::json& require_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) {
    throw ParseError(std::string("scenario file: missing field '") + name + "'");
  }
  return *it;
}

Eigen::VectorXd parse_vector(const nlohmann::json& j, const char* name) {
  if (!j.is_array()) throw ParseError(std::string("field '") + name + "' must be an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ParseError(std::string("field '") + name + "' must be numeric");
    v(static_cast<int>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd parse_matrix(const nlohmann::json& j, const char* name) {
  if (!j.is_array() || j.empty()) {
    throw ParseError(std::string("field '") + name + "' must be a nonempty array of rows");
  }
  const auto cols = j[0].size();
  Eigen::MatrixXd m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    Eigen::VectorXd row = parse_vector(j[i], name);
    if (static_cast<std::size_t>(row.size()) != cols) {
      throw ParseError(std::string("field '") + name + "' has ragged rows");
    }
    m.row(static_cast<int>(i)) = row.transpose();
  }
  return m;
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Static: return "static";
    case Mode::Dynamic: return "dynamic";
    case Mode::Dynamic25: return "dynamic25";
  }
  return "static";
}

Mode mode_from_string(std::string_view s) {
  if (s == "static") return Mode::Static;
  if (s == "dynamic") return Mode::Dynamic;
  if (s == "dynamic25") return Mode::Dynamic25;
  throw ParseError("field 'mode' must be one of static|dynamic|dynamic25");
}

int Scenario::num_steps() const {
  if (mode == Mode::Static) return 1;
  // Small slack keeps 1.1/0.1 from rounding down to 10.
  return static_cast<int>(std::floor(window.t_v / window.dt_r + 1e-9)) + 1;
}

double Scenario::step_time(int k) const { return (k - 1) * window.dt_r; }

double anchor_spread(const std::vector<Eigen::VectorXd>& anchors, int dimension) {
  const int n = static_cast<int>(anchors.size());
  if (n < 2) return 0.0;
  Eigen::MatrixXd m(n, dimension);
  for (int i = 0; i < n; ++i) m.row(i) = anchors[i].transpose();
  const Eigen::RowVectorXd mean = m.colwise().mean();
  m.rowwise() -= mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  if (svd.singularValues().size() < dimension) return 0.0;
  return svd.singularValues()(dimension - 1);
}

void Scenario::validate() const {
  if (dimension != 2 && dimension != 3) {
    throw ParseError("field 'dimension' must be 2 or 3");
  }
  if (mode == Mode::Dynamic && dimension != 2) {
    throw ParseError("mode 'dynamic' requires dimension 2");
  }
  if (mode == Mode::Dynamic25 && dimension != 3) {
    throw ParseError("mode 'dynamic25' requires dimension 3");
  }
  const int min_anchors = dimension == 2 ? 3 : 4;
  if (num_anchors() < min_anchors) {
    throw ParseError("field 'anchors': too few anchors for this mode");
  }
  const int min_tags = (mode == Mode::Static && dimension == 3) ? 3 : 2;
  if (num_tags() < min_tags) {
    throw ParseError("field 'tags': too few tags for this mode");
  }
  for (const auto& a : anchors) {
    if (a.size() != dimension) throw ParseError("field 'anchors': wrong dimension");
  }
  for (const auto& t : tags) {
    if (t.size() != dimension) throw ParseError("field 'tags': wrong dimension");
  }
  if (anchor_spread(anchors, dimension) <= 1e-9) {
    throw ParseError("field 'anchors': anchors are collinear/degenerate");
  }
  if (sigma_r < 0.0 || !std::isfinite(sigma_r)) {
    throw ParseError("field 'sigma_r' must be a nonnegative number");
  }
  if (is_dynamic()) {
    if (window.t_v <= 0.0 || window.dt_r <= 0.0) {
      throw ParseError("field 'window': t_v and dt_r must be positive in dynamic modes");
    }
  }
  const int k_max = num_steps();
  for (const auto& m : measurements) {
    if (m.time_index < 1 || m.time_index > k_max) {
      throw ParseError("field 'measurements': time index k out of range");
    }
    if (m.anchor_index < 0 || m.anchor_index >= num_anchors()) {
      throw ParseError("field 'measurements': anchor index out of range");
    }
    if (m.tag_index < 0 || m.tag_index >= num_tags()) {
      throw ParseError("field 'measurements': tag index out of range");
    }
  }
}

SamplerConfig SamplerConfig::preset(std::string_view name) {
  SamplerConfig c;
  auto tag2 = [](double y) {
    Eigen::VectorXd t(2);
    t << 0.0, y;
    return t;
  };
  auto tag3 = [](double x, double y, double z) {
    Eigen::VectorXd t(3);
    t << x, y, z;
    return t;
  };
  if (name == "static2d") {
    c.dimension = 2;
    c.mode = Mode::Static;
    c.num_anchors = 3;
    c.tags = {tag2(0.095), tag2(-0.095)};
  } else if (name == "static3d") {
    c.dimension = 3;
    c.mode = Mode::Static;
    c.num_anchors = 4;
    c.tags = {tag3(0.01, 0.41, 0.0), tag3(0.0, -0.43, 0.01), tag3(-0.57, 0.02, 0.0)};
  } else if (name == "dynamic2d") {
    c.dimension = 2;
    c.mode = Mode::Dynamic;
    c.num_anchors = 3;
    c.tags = {tag2(0.095), tag2(-0.095)};
    c.window = {1.1, 0.1};
  } else if (name == "dynamic25d") {
    c.dimension = 3;
    c.mode = Mode::Dynamic25;
    c.num_anchors = 4;
    c.tags = {tag3(0.0, 0.095, 0.0), tag3(0.0, -0.095, 0.0)};
    c.window = {1.1, 0.1};
  } else {
    throw ParseError("unknown preset '" + std::string(name) +
                     "' (expected static2d|static3d|dynamic2d|dynamic25d)");
  }
  return c;
}

Pose sample_pose(std::mt19937_64& rng, int dimension, Mode mode) {
  Eigen::VectorXd p = uniform_position(rng, dimension);
  if (dimension == 2) {
    return Pose(Rotation::planar(uniform(rng, -M_PI, M_PI)), p);
  }
  if (mode == Mode::Dynamic25) {
    return Pose(Rotation::yaw(uniform(rng, -M_PI, M_PI)), p);
  }
  const double roll = uniform(rng, -M_PI, M_PI);
  const double pitch = uniform(rng, -M_PI, M_PI);
  const double yaw = uniform(rng, -M_PI, M_PI);
  return Pose(Rotation::from_euler(roll, pitch, yaw), p);
}

Twist sample_twist(std::mt19937_64& rng, int dimension, Mode mode) {
  if (mode == Mode::Static) return Twist::zero(dimension);
  if (mode == Mode::Dynamic25) {
    const double wz = uniform(rng, -kAngularVelRange, kAngularVelRange);
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) v(i) = uniform(rng, -kLinearVelRange, kLinearVelRange);
    return Twist::planar3d(wz, v);
  }
  Twist t = Twist::zero(dimension);
  for (int i = 0; i < t.angular.size(); ++i) {
    t.angular(i) = uniform(rng, -kAngularVelRange, kAngularVelRange);
  }
  for (int i = 0; i < dimension; ++i) {
    t.linear(i) = uniform(rng, -kLinearVelRange, kLinearVelRange);
  }
  return t;
}

std::pair<Scenario, GroundTruth> sample_scenario(const SamplerConfig& config,
                                                 std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  Scenario s;
  s.dimension = config.dimension;
  s.mode = config.mode;
  s.tags = config.tags;
  s.sigma_r = config.sigma_r;
  s.window = config.window;
  s.seed = rng_seed;
  if (config.dimension == 3 && config.mode != Mode::Dynamic25) {
    s.rotation_sampling = "euler-zyx-uniform";
  }

  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    s.anchors.clear();
    for (int j = 0; j < config.num_anchors; ++j) {
      s.anchors.push_back(uniform_position(rng, config.dimension));
    }
    ok = anchor_spread(s.anchors, config.dimension) > 1e-9;
  }
  if (!ok) throw SamplerExhausted("100 anchor sets in a row failed the noncollinearity check");

  GroundTruth truth;
  truth.initial_pose = sample_pose(rng, config.dimension, config.mode);
  truth.twist = sample_twist(rng, config.dimension, config.mode);
  const int k_steps = s.num_steps();
  truth.poses_at_steps.reserve(k_steps);
  for (int k = 1; k <= k_steps; ++k) {
    truth.poses_at_steps.push_back(truth.initial_pose * exp_se(truth.twist, s.step_time(k)));
  }
  s.ground_truth = truth;
  s.validate();
  return {s, truth};
}

std::vector<Measurement> canonical_schedule(const Scenario& scenario) {
  std::vector<Measurement> out;
  if (scenario.mode == Mode::Static) {
    for (int j = 0; j < scenario.num_anchors(); ++j) {
      for (int l = 0; l < scenario.num_tags(); ++l) out.push_back({1, j, l, 0.0});
    }
    return out;
  }
  // One pair per step. When the anchor count divides evenly by the tag
  // count, a plain alternation would lock each tag to a fixed anchor
  // subset; shifting the tag cycle by one per anchor sweep keeps the
  // pairing balanced and gives every tag every anchor.
  const bool locked = scenario.num_anchors() % scenario.num_tags() == 0;
  for (int k = 1; k <= scenario.num_steps(); ++k) {
    const int j = (k - 1) % scenario.num_anchors();
    const int shift = locked ? (k - 1) / scenario.num_anchors() : 0;
    const int l = ((k - 1) + shift) % scenario.num_tags();
    out.push_back({k, j, l, 0.0});
  }
  return out;
}

std::vector<Measurement> simulate_measurements(const Scenario& scenario,
                                               const GroundTruth& truth,
                                               std::uint64_t rng_seed) {
  if (static_cast<int>(truth.poses_at_steps.size()) < scenario.num_steps()) {
    throw ModeMismatch("ground truth does not cover the measurement window");
  }
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Measurement> out = canonical_schedule(scenario);
  for (auto& m : out) {
    const Eigen::VectorXd tag_world =
        truth.poses_at_steps[m.time_index - 1].apply(scenario.tags[m.tag_index]);
    const double eta = scenario.sigma_r > 0.0 ? scenario.sigma_r * noise(rng) : 0.0;
    m.value = (scenario.anchors[m.anchor_index] - tag_world).squaredNorm() + eta;
  }
  return out;
}

void save_scenario(const Scenario& scenario, const std::string& path) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"version\": 1,\n";
  os << "  \"dimension\": " << scenario.dimension << ",\n";
  os << "  \"mode\": \"" << to_string(scenario.mode) << "\",\n";
  os << "  \"anchors\": [";
  for (std::size_t i = 0; i < scenario.anchors.size(); ++i) {
    if (i) os << ',';
    write_vector(os, scenario.anchors[i]);
  }
  os << "],\n  \"tags\": [";
  for (std::size_t i = 0; i < scenario.tags.size(); ++i) {
    if (i) os << ',';
    write_vector(os, scenario.tags[i]);
  }
  os << "],\n";
  os << "  \"sigma_r\": " << format_double(scenario.sigma_r) << ",\n";
  os << "  \"window\": {\"t_v\": " << format_double(scenario.window.t_v)
     << ", \"dt_r\": " << format_double(scenario.window.dt_r) << "},\n";
  os << "  \"seed\": " << scenario.seed << ",\n";
  if (!scenario.rotation_sampling.empty()) {
    os << "  \"meta\": {\"rotation_sampling\": \"" << scenario.rotation_sampling << "\"},\n";
  }
  os << "  \"measurements\": [";
  for (std::size_t i = 0; i < scenario.measurements.size(); ++i) {
    const auto& m = scenario.measurements[i];
    if (i) os << ',';
    os << "\n    {\"k\": " << m.time_index << ", \"j\": " << m.anchor_index
       << ", \"l\": " << m.tag_index << ", \"value\": " << format_double(m.value) << "}";
  }
  os << (scenario.measurements.empty() ? "]" : "\n  ]");
  if (scenario.ground_truth) {
    const auto& gt = *scenario.ground_truth;
    os << ",\n  \"ground_truth\": {\"pose\": {\"R\": ";
    write_matrix(os, gt.initial_pose.rotation().matrix());
    os << ", \"p\": ";
    write_vector(os, gt.initial_pose.translation());
    os << "}, \"twist\": {\"w\": ";
    write_vector(os, gt.twist.angular);
    os << ", \"v\": ";
    write_vector(os, gt.twist.linear);
    os << "}}";
  }
  os << "\n}\n";

  std::ofstream file(path);
  if (!file) throw ParseError("cannot open '" + path + "' for writing");
  file << os.str();
  if (!file.good()) throw ParseError("write to '" + path + "' failed");
}

namespace {

Scenario parse_scenario_body(const nlohmann::json& j) {
  Scenario s;
  s.dimension = require_field(j, "dimension").get<int>();
  s.mode = mode_from_string(require_field(j, "mode").get<std::string>());
  for (const auto& row : require_field(j, "anchors")) {
    s.anchors.push_back(parse_vector(row, "anchors"));
  }
  for (const auto& row : require_field(j, "tags")) {
    s.tags.push_back(parse_vector(row, "tags"));
  }
  s.sigma_r = require_field(j, "sigma_r").get<double>();
  const auto& window = require_field(j, "window");
  s.window.t_v = require_field(window, "t_v").get<double>();
  s.window.dt_r = require_field(window, "dt_r").get<double>();
  s.seed = require_field(j, "seed").get<std::uint64_t>();
  if (j.contains("meta") && j["meta"].contains("rotation_sampling")) {
    s.rotation_sampling = j["meta"]["rotation_sampling"].get<std::string>();
  }
  for (const auto& m : require_field(j, "measurements")) {
    Measurement meas;
    meas.time_index = require_field(m, "k").get<int>();
    meas.anchor_index = require_field(m, "j").get<int>();
    meas.tag_index = require_field(m, "l").get<int>();
    meas.value = require_field(m, "value").get<double>();
    s.measurements.push_back(meas);
  }
  if (j.contains("ground_truth")) {
    const auto& gt = j["ground_truth"];
    const auto& pose = require_field(gt, "pose");
    Eigen::MatrixXd r = parse_matrix(require_field(pose, "R"), "ground_truth.pose.R");
    Eigen::VectorXd p = parse_vector(require_field(pose, "p"), "ground_truth.pose.p");
    Rotation rot;
    try {
      rot = Rotation::from_matrix(r);
    } catch (const DegenerateMatrix&) {
      throw ParseError("field 'ground_truth.pose.R' is not a rotation");
    }
    GroundTruth truth;
    truth.initial_pose = Pose(rot, p);
    const auto& twist = require_field(gt, "twist");
    truth.twist.angular = parse_vector(require_field(twist, "w"), "ground_truth.twist.w");
    truth.twist.linear = parse_vector(require_field(twist, "v"), "ground_truth.twist.v");
    const int k_steps = s.num_steps();
    for (int k = 1; k <= k_steps; ++k) {
      truth.poses_at_steps.push_back(truth.initial_pose * exp_se(truth.twist, s.step_time(k)));
    }
    s.ground_truth = std::move(truth);
  }
  return s;
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ParseError("cannot open '" + path + "' for reading");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(file);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("scenario file '") + path + "': " + e.what());
  }

  if (!require_field(j, "version").is_number_integer()) {
    throw ParseError("field 'version' must be an integer");
  }
  const auto version = j["version"].get<int>();
  if (version != 1) {
    throw SchemaVersionMismatch("scenario file version " + std::to_string(version) +
                                " unsupported (expected 1)");
  }
  Scenario s;
  try {
    s = parse_scenario_body(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario file '") + path + "': " + e.what());
  }
  s.validate();
  return s;
}


std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the xor-combined inputs.
  std::uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace roinit
