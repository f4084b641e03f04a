#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "roinit/qcqp.hpp"

namespace roinit {

/// Orthonormal basis (trace inner product) of quadratic forms vanishing on
/// the feasible lifted states of one problem variant. Spans every hand-built
/// equality constraint plus the redundant relations that tighten the
/// relaxation.
struct ConstraintBasis {
  std::vector<Eigen::MatrixXd> matrices;
  Eigen::VectorXd singular_values;  // data-matrix spectrum, descending
  double tolerance = 0.0;           // relative threshold used on the spectrum
  std::string layout_hash;
  int n = 0;
  /// Orthonormal basis (n x n') of the range of the sample moment matrix.
  /// Feasible lifted states obey linear relations (h-coupled lever arms,
  /// rotation symmetries), so feasible PSD X live on this face; solving on
  /// it restores strict feasibility for the interior-point method.
  Eigen::MatrixXd face;
  /// Nullspace basis discovered directly in face coordinates (n' x n'
  /// matrices, orthonormal under trace): the solver-facing constraint set.
  /// Identities acting off the face are already absorbed by the face
  /// restriction, so this set is small and numerically clean.
  std::vector<Eigen::MatrixXd> reduced;

  int size() const { return static_cast<int>(matrices.size()); }
  int face_dim() const { return static_cast<int>(face.cols()); }
  int reduced_size() const { return static_cast<int>(reduced.size()); }
};

struct DiscoveryOptions {
  int n_samples = -1;    // default 3 * n(n+1)/2
  double tol = 1e-8;     // relative singular value threshold
  int check_samples = 1000;
  double check_tol = 1e-8;
};

/// Finds the nullspace of the second-moment data matrix of feasible lifted
/// samples. Samples are drawn from the same pose/twist distributions as the
/// scenario sampler and lifted with the first-order model for the
/// approximate dynamic variants (the relaxation's own feasible set), exactly
/// otherwise. Throws InsufficientSamples / RankDeficientSampling.
ConstraintBasis discover_constraints(const Scenario& scenario_template, Variant variant,
                                     const DiscoveryOptions& options = {});

/// Nullspace extraction from caller-provided lifted states (testing hook and
/// the core of discover_constraints).
ConstraintBasis nullspace_basis(const std::vector<Eigen::VectorXd>& states, int n,
                                double tol);

/// Replaces the problem's solver-facing constraints with the discovered
/// basis; the hand-built set moves to `verification`. An empty basis leaves
/// the problem unchanged. Idempotent in constraint count.
QcqpProblem attach(const QcqpProblem& problem, const ConstraintBasis& basis);

/// Basis cache (text, coordinate format, atomic rename). Location resolves
/// to $RO_INIT_CACHE_DIR, else $XDG_CACHE_HOME/ro-init, else
/// $HOME/.cache/ro-init, else ./.ro-init-cache.
std::filesystem::path default_cache_dir();
void save_basis(const ConstraintBasis& basis, const std::filesystem::path& path);
ConstraintBasis load_basis(const std::filesystem::path& path);

/// Loads the cached basis for (scenario, variant) or discovers and caches it.
ConstraintBasis discover_or_load(const Scenario& scenario_template, Variant variant,
                                 const DiscoveryOptions& options = {},
                                 std::optional<std::filesystem::path> cache_dir = {},
                                 bool* was_cached = nullptr);

}  // namespace roinit
