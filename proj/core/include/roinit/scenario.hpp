#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "roinit/lie.hpp"

namespace roinit {

enum class Mode { Static, Dynamic, Dynamic25 };

std::string to_string(Mode mode);
Mode mode_from_string(std::string_view s);

/// Measurement window for the dynamic modes: constant-velocity horizon t_v
/// with one range sample every dt_r seconds.
struct Window {
  double t_v = 0.0;
  double dt_r = 0.0;
};

/// One squared-range sample: tag tag_index against anchor anchor_index at
/// time step time_index (1-based; always 1 in static mode).
struct Measurement {
  int time_index = 1;
  int anchor_index = 0;
  int tag_index = 0;
  double value = 0.0;  // squared range, m^2
};

/// Reference trajectory: initial pose and the constant body-centric twist
/// that generates the pose at every measurement step.
struct GroundTruth {
  Pose initial_pose;
  Twist twist;
  std::vector<Pose> poses_at_steps;
};

/// A fully specified estimation problem: geometry, noise level, schedule,
/// and (optionally) the simulated measurements and the truth behind them.
struct Scenario {
  int dimension = 2;  // ambient dimension (3 for Dynamic25)
  Mode mode = Mode::Static;
  std::vector<Eigen::VectorXd> anchors;  // world positions, m
  std::vector<Eigen::VectorXd> tags;     // body-frame lever arms, m
  double sigma_r = 0.0;                  // std of the squared-range noise, m^2
  Window window;
  std::uint64_t seed = 0;
  std::vector<Measurement> measurements;
  std::optional<GroundTruth> ground_truth;
  std::string rotation_sampling;  // metadata: how 3D rotations were drawn

  /// Number of measurement steps K: 1 for static, floor(t_v/dt_r)+1 otherwise.
  int num_steps() const;
  /// Offset of step k (1-based) from the window start, (k-1)*dt_r.
  double step_time(int k) const;
  int num_anchors() const { return static_cast<int>(anchors.size()); }
  int num_tags() const { return static_cast<int>(tags.size()); }
  bool is_dynamic() const { return mode != Mode::Static; }

  /// Enforces the anchor/tag count and noncollinearity invariants.
  void validate() const;
};

/// Smallest singular value of the centered anchor matrix; must exceed 1e-9.
double anchor_spread(const std::vector<Eigen::VectorXd>& anchors, int dimension);

struct SamplerConfig {
  int dimension = 2;
  Mode mode = Mode::Static;
  int num_anchors = 3;
  std::vector<Eigen::VectorXd> tags;
  double sigma_r = 0.0;
  Window window;

  /// Named presets: static2d, static3d, dynamic2d, dynamic25d.
  static SamplerConfig preset(std::string_view name);
};

/// Draws anchors, pose, and (for dynamic modes) twist from the uniform
/// sampling ranges: positions in [-4,4]^d m, rotation angles in [-pi,pi] rad,
/// linear velocity in [-1,1] m/s per axis, angular velocity in [-0.3,0.3]
/// rad/s. Anchors are re-drawn until noncollinear; throws SamplerExhausted
/// after 100 rejected sets. Pure function of (config, seed).
std::pair<Scenario, GroundTruth> sample_scenario(const SamplerConfig& config,
                                                 std::uint64_t rng_seed);

/// Deterministic measurement schedule: every anchor-tag pair at k=1 in
/// static mode; one pair per step in dynamic modes, anchors round-robin and
/// the tag cycle staggered by one each full anchor sweep so every tag
/// eventually ranges against every anchor.
std::vector<Measurement> canonical_schedule(const Scenario& scenario);

/// Squared ranges over the canonical schedule. Noise is N(0, sigma_r^2)
/// added to the squared range.
std::vector<Measurement> simulate_measurements(const Scenario& scenario,
                                               const GroundTruth& truth,
                                               std::uint64_t rng_seed);

/// Pose and twist sampling helpers shared with the local solver's random
/// initialization; distributions as in sample_scenario.
Pose sample_pose(std::mt19937_64& rng, int dimension, Mode mode);
Twist sample_twist(std::mt19937_64& rng, int dimension, Mode mode);

/// JSON round trip. Numbers are written with 17 significant digits so the
/// load is bit-exact. load_scenario throws ParseError (naming the offending
/// field) or SchemaVersionMismatch, and re-validates the invariants.
void save_scenario(const Scenario& scenario, const std::string& path);
Scenario load_scenario(const std::string& path);

/// 64-bit seed mixing for derived per-trial streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace roinit
