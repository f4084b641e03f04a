#include "roinit/redundancy.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "roinit/symmat.hpp"

namespace roinit {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Layout construction only needs the (step, tag) schedule, not the values.
std::vector<Measurement> canonical_measurements(const Scenario& scenario) {
  if (!scenario.measurements.empty()) return scenario.measurements;
  return canonical_schedule(scenario);
}

LiftModel discovery_model(Variant variant) {
  // The approximate dynamic relaxations are feasible over first-order lifted
  // states; discovered constraints must hold on that set, not on exact lifts.
  return (variant == Variant::DynamicApprox || variant == Variant::Dynamic25)
             ? LiftModel::FirstOrder
             : LiftModel::Exact;
}

Eigen::VectorXd random_lift(const Scenario& scenario, const StateLayout& layout,
                            Variant variant, std::mt19937_64& rng) {
  const Pose pose = sample_pose(rng, scenario.dimension, scenario.mode);
  const Twist twist = sample_twist(rng, scenario.dimension, scenario.mode);
  return lift_state(scenario, layout, pose, twist, discovery_model(variant));
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

namespace {

// SVD nullspace of a row matrix of svec'd sample moments: column
// equilibration, relative threshold, and a sharp-gap refinement because
// weakly excited moment directions can dip below the threshold while the
// true null cluster sits at the rounding floor.
std::vector<Eigen::MatrixXd> moment_nullspace(Eigen::MatrixXd data, int n, double tol,
                                              Eigen::VectorXd* spectrum) {
  const int nn = svec_dim(n);
  Eigen::VectorXd col_scale = data.colwise().norm().transpose().cwiseMax(1e-300);
  Eigen::VectorXd inv_scale = col_scale.cwiseInverse();
  data = data * inv_scale.asDiagonal();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();  // descending
  if (spectrum) *spectrum = sigma;
  const double sigma_max = sigma(0);
  const double cut = tol * sigma_max;

  int null_count = 0;
  for (int i = nn - 1; i >= 0 && sigma(i) <= cut; --i) ++null_count;
  if (null_count > 1) {
    const double floor_sigma = 1e-14 * sigma_max;
    const int first = nn - null_count;
    int best_index = -1;
    double best_ratio = 1e3;
    for (int i = first; i + 1 < nn; ++i) {
      const double hi = std::max(sigma(i), floor_sigma);
      const double lo = std::max(sigma(i + 1), floor_sigma);
      if (hi / lo > best_ratio) {
        best_ratio = hi / lo;
        best_index = i;
      }
    }
    if (best_index >= 0) null_count = nn - best_index - 1;
  }
  std::vector<Eigen::MatrixXd> out;
  if (null_count == 0) return out;

  // Undo the column scaling, then re-orthonormalize under the trace inner
  // product (svec coordinates).
  Eigen::MatrixXd raw(nn, null_count);
  for (int k = 0; k < null_count; ++k) {
    raw.col(k) = inv_scale.asDiagonal() * svd.matrixV().col(nn - null_count + k);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(nn, null_count);
  out.reserve(null_count);
  for (int k = 0; k < null_count; ++k) {
    Eigen::VectorXd col = q.col(k);
    // Deterministic sign: largest-magnitude coefficient positive.
    int max_idx = 0;
    col.cwiseAbs().maxCoeff(&max_idx);
    if (col(max_idx) < 0.0) col = -col;
    out.push_back(unsvec(col, n));
  }
  return out;
}

}  // namespace

ConstraintBasis nullspace_basis(const std::vector<Eigen::VectorXd>& states, int n,
                                double tol) {
  const int nn = svec_dim(n);
  const int rows = static_cast<int>(states.size());
  if (rows < nn) {
    throw InsufficientSamples("need at least " + std::to_string(nn) + " samples, got " +
                              std::to_string(rows));
  }

  // Data matrix of svec(x x^T) rows, plus the plain moment matrix whose
  // range is the face feasible PSD matrices live on.
  Eigen::MatrixXd data(rows, nn);
  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(n, n);
  {
    Eigen::MatrixXd outer(n, n);
    Eigen::MatrixXd row_buf(nn, 1);
    for (int r = 0; r < rows; ++r) {
      const Eigen::VectorXd& x = states[r];
      if (x.size() != n) throw LayoutMismatch("sample state has wrong dimension");
      outer.noalias() = x * x.transpose();
      moment += outer;
      svec_into(outer, row_buf, 0);
      data.row(r) = row_buf.col(0).transpose();
    }
    moment /= static_cast<double>(rows);
  }

  ConstraintBasis basis;
  basis.n = n;
  basis.tolerance = tol;

  // Face of the PSD cone: range of the moment matrix, detected after
  // diagonal equilibration. Null directions are exact linear relations of
  // the lifted coordinates, so a firm relative threshold separates them.
  {
    Eigen::VectorXd d_scale = moment.diagonal().cwiseMax(1e-300).cwiseSqrt();
    Eigen::VectorXd d_inv = d_scale.cwiseInverse();
    Eigen::MatrixXd moment_scaled = d_inv.asDiagonal() * moment * d_inv.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> meig(moment_scaled);
    const Eigen::VectorXd mvals = meig.eigenvalues();  // ascending
    const double mcut = 1e-10 * mvals(n - 1);
    int keep = 0;
    for (int i = 0; i < n; ++i) {
      if (mvals(i) > mcut) ++keep;
    }
    Eigen::MatrixXd range_raw(n, keep);
    for (int i = 0, k = 0; i < n; ++i) {
      if (mvals(i) > mcut) range_raw.col(k++) = d_scale.asDiagonal() * meig.eigenvectors().col(i);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> fqr(range_raw);
    basis.face = fqr.householderQ() * Eigen::MatrixXd::Identity(n, keep);
  }

  basis.matrices = moment_nullspace(data, n, tol, &basis.singular_values);

  // Same discovery in face coordinates; this is what the solver consumes.
  {
    const int nf = basis.face_dim();
    const int nnf = svec_dim(nf);
    Eigen::MatrixXd reduced_data(rows, nnf);
    Eigen::MatrixXd outer(nf, nf);
    Eigen::MatrixXd row_buf(nnf, 1);
    for (int r = 0; r < rows; ++r) {
      const Eigen::VectorXd xr = basis.face.transpose() * states[r];
      outer.noalias() = xr * xr.transpose();
      svec_into(outer, row_buf, 0);
      reduced_data.row(r) = row_buf.col(0).transpose();
    }
    basis.reduced = moment_nullspace(std::move(reduced_data), nf, tol, nullptr);
  }
  return basis;
}

ConstraintBasis discover_constraints(const Scenario& scenario_template, Variant variant,
                                     const DiscoveryOptions& options) {
  Scenario scenario = scenario_template;
  scenario.measurements = canonical_measurements(scenario);
  const StateLayout layout = StateLayout::build(scenario, scenario.measurements, variant);
  const int nn = svec_dim(layout.n);
  const int n_samples = options.n_samples > 0 ? options.n_samples : 3 * nn;
  if (n_samples < 2 * nn) {
    throw InsufficientSamples("discovery needs at least 2*n(n+1)/2 = " +
                              std::to_string(2 * nn) + " samples");
  }

  const std::string hash = layout.hash(scenario);
  std::mt19937_64 rng(fnv1a("discovery|" + hash));
  std::vector<Eigen::VectorXd> samples;
  samples.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    samples.push_back(random_lift(scenario, layout, variant, rng));
  }

  ConstraintBasis basis = nullspace_basis(samples, layout.n, options.tol);
  basis.layout_hash = hash;

  // Soundness: every discovered form must vanish on fresh feasible states.
  for (int i = 0; i < options.check_samples; ++i) {
    const Eigen::VectorXd x = random_lift(scenario, layout, variant, rng);
    for (const auto& s : basis.matrices) {
      const double r = x.dot(s * x);
      if (std::abs(r) > options.check_tol) {
        throw RankDeficientSampling(
            "discovered constraint fails on fresh samples (residual " + std::to_string(r) +
            "); moment sampling did not span the feasible set");
      }
    }
    const Eigen::VectorXd xr = basis.face.transpose() * x;
    for (const auto& s : basis.reduced) {
      const double r = xr.dot(s * xr);
      if (std::abs(r) > options.check_tol) {
        throw RankDeficientSampling(
            "face-level constraint fails on fresh samples (residual " + std::to_string(r) +
            "); moment sampling did not span the feasible set");
      }
    }
  }
  return basis;
}

QcqpProblem attach(const QcqpProblem& problem, const ConstraintBasis& basis) {
  if (basis.size() == 0) return problem;
  if (basis.n != problem.layout.n) {
    throw LayoutMismatch("basis built for n = " + std::to_string(basis.n) +
                         ", problem has n = " + std::to_string(problem.layout.n));
  }
  QcqpProblem out = problem;
  if (out.verification.empty()) {
    out.verification = out.constraints;
  }
  out.constraints.clear();
  out.constraints.reserve(basis.size());
  for (const auto& s : basis.matrices) {
    out.constraints.push_back({s, 0.0, ConstraintTag::Redundant});
  }
  return out;
}

std::filesystem::path default_cache_dir() {
  if (const char* env = std::getenv("RO_INIT_CACHE_DIR"); env && *env) {
    return env;
  }
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) {
    return std::filesystem::path(xdg) / "ro-init";
  }
  if (const char* home = std::getenv("HOME"); home && *home) {
    return std::filesystem::path(home) / ".cache" / "ro-init";
  }
  return std::filesystem::path(".ro-init-cache");
}

void save_basis(const ConstraintBasis& basis, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
    os << "ro-init-basis v1\n";
    os << "layout " << basis.layout_hash << "\n";
    os << "n " << basis.n << "\n";
    os << "tol " << fmt17(basis.tolerance) << "\n";
    os << "spectrum " << basis.singular_values.size() << "\n";
    for (int i = 0; i < basis.singular_values.size(); ++i) {
      os << fmt17(basis.singular_values(i)) << "\n";
    }
    os << "face " << basis.face.rows() << " " << basis.face.cols() << "\n";
    for (int i = 0; i < basis.face.rows(); ++i) {
      for (int j = 0; j < basis.face.cols(); ++j) {
        os << fmt17(basis.face(i, j)) << (j + 1 == basis.face.cols() ? "\n" : " ");
      }
    }
    auto write_matrices = [&os](const std::vector<Eigen::MatrixXd>& mats) {
      for (std::size_t k = 0; k < mats.size(); ++k) {
        const Eigen::MatrixXd& m = mats[k];
        std::ostringstream body;
        int nnz = 0;
        for (int j = 0; j < m.cols(); ++j) {
          for (int i = 0; i <= j; ++i) {
            if (m(i, j) != 0.0) {
              body << i << " " << j << " " << fmt17(m(i, j)) << "\n";
              ++nnz;
            }
          }
        }
        os << "matrix " << k << " " << nnz << "\n" << body.str();
      }
    };
    os << "count " << basis.size() << "\n";
    write_matrices(basis.matrices);
    os << "reduced " << basis.reduced_size() << "\n";
    write_matrices(basis.reduced);
    if (!os.good()) throw Error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

ConstraintBasis load_basis(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path.string() + "' for reading");
  std::string word;
  is >> word;
  std::string version;
  is >> version;
  if (word != "ro-init-basis" || version != "v1") {
    throw ParseError("'" + path.string() + "' is not a ro-init basis file");
  }
  ConstraintBasis basis;
  std::string key;
  is >> key >> basis.layout_hash;
  if (key != "layout") throw ParseError("basis file: expected 'layout'");
  is >> key >> basis.n;
  if (key != "n") throw ParseError("basis file: expected 'n'");
  is >> key >> basis.tolerance;
  if (key != "tol") throw ParseError("basis file: expected 'tol'");
  int spectrum_len = 0;
  is >> key >> spectrum_len;
  if (key != "spectrum") throw ParseError("basis file: expected 'spectrum'");
  basis.singular_values.resize(spectrum_len);
  for (int i = 0; i < spectrum_len; ++i) is >> basis.singular_values(i);
  int face_rows = 0, face_cols = 0;
  is >> key >> face_rows >> face_cols;
  if (key != "face") throw ParseError("basis file: expected 'face'");
  basis.face.resize(face_rows, face_cols);
  for (int i = 0; i < face_rows; ++i) {
    for (int j = 0; j < face_cols; ++j) is >> basis.face(i, j);
  }
  auto read_matrices = [&is](std::vector<Eigen::MatrixXd>& mats, int count, int dim) {
    std::string word;
    mats.reserve(count);
    for (int k = 0; k < count; ++k) {
      int idx = 0, nnz = 0;
      is >> word >> idx >> nnz;
      if (word != "matrix") throw ParseError("basis file: expected 'matrix'");
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
      for (int e = 0; e < nnz; ++e) {
        int i = 0, j = 0;
        double v = 0.0;
        is >> i >> j >> v;
        m(i, j) = v;
        if (i != j) m(j, i) = v;
      }
      mats.push_back(std::move(m));
    }
  };
  int count = 0;
  is >> key >> count;
  if (key != "count") throw ParseError("basis file: expected 'count'");
  read_matrices(basis.matrices, count, basis.n);
  int reduced_count = 0;
  is >> key >> reduced_count;
  if (key != "reduced") throw ParseError("basis file: expected 'reduced'");
  read_matrices(basis.reduced, reduced_count, basis.face_dim());
  if (!is) throw ParseError("basis file '" + path.string() + "' truncated");
  return basis;
}

ConstraintBasis discover_or_load(const Scenario& scenario_template, Variant variant,
                                 const DiscoveryOptions& options,
                                 std::optional<std::filesystem::path> cache_dir,
                                 bool* was_cached) {
  Scenario scenario = scenario_template;
  scenario.measurements = canonical_measurements(scenario);
  const StateLayout layout = StateLayout::build(scenario, scenario.measurements, variant);
  const std::string hash = layout.hash(scenario);
  const std::filesystem::path dir = cache_dir.value_or(default_cache_dir());
  const std::filesystem::path file = dir / ("basis-" + hash + ".txt");
  if (was_cached) *was_cached = false;
  if (std::filesystem::exists(file)) {
    try {
      ConstraintBasis basis = load_basis(file);
      if (basis.layout_hash == hash && basis.n == layout.n) {
        if (was_cached) *was_cached = true;
        return basis;
      }
    } catch (const Error&) {
      // fall through to rediscovery
    }
  }
  ConstraintBasis basis = discover_constraints(scenario, variant, options);
  try {
    save_basis(basis, file);
  } catch (const Error&) {
    // cache is best-effort; discovery result is still valid
  }
  return basis;
}

}  // namespace roinit
