#include "roinit/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "roinit/symmat.hpp"

namespace roinit {

std::string to_string(SdpStatus status) {
  switch (status) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::MaxIter: return "max-iter";
    case SdpStatus::NumericalFailure: return "numerical-failure";
  }
  return "numerical-failure";
}

void sym_eig(const Eigen::MatrixXd& m, Eigen::VectorXd& eigenvalues,
             Eigen::MatrixXd& eigenvectors) {
  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd a = 0.5 * (m + m.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(1.0, a.norm());

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(2.0 * off) <= 1e-14 * scale) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // A <- J^T A J on rows/columns p and q.
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) > a(j, j); });
  eigenvalues.resize(n);
  eigenvectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    eigenvalues(i) = a(order[i], order[i]);
    eigenvectors.col(i) = v.col(order[i]);
  }
}

namespace {

// Cholesky wrapper returning success; L is lower triangular.
bool cholesky(const Eigen::MatrixXd& m, Eigen::MatrixXd& l) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  l = llt.matrixL();
  return true;
}

// Largest alpha in (0, 1] with S + alpha * dS staying PSD, damped by tau.
double step_length(const Eigen::MatrixXd& l, const Eigen::MatrixXd& ds, double tau) {
  const Eigen::MatrixXd t =
      l.triangularView<Eigen::Lower>().solve(ds).transpose();
  const Eigen::MatrixXd w = l.triangularView<Eigen::Lower>().solve(t);
  Eigen::VectorXd evals;
  Eigen::MatrixXd evecs;
  sym_eig(0.5 * (w + w.transpose()), evals, evecs);
  const double lambda_min = evals(evals.size() - 1);
  if (lambda_min >= -1e-14) return 1.0;
  return std::min(1.0, -tau / lambda_min);
}

}  // namespace

struct SdpSolver::Impl {
  int n = 0;
  int m_original = 0;
  int rank = 0;
  SdpOptions options;
  Eigen::MatrixXd basis;       // N x rank, orthonormal svec directions
  Eigen::VectorXd b_reduced;   // rank
  Eigen::VectorXd b_original;
  Eigen::MatrixXd multiplier_map;  // m x rank: y_original = map * y_reduced

  Eigen::VectorXd apply(const Eigen::MatrixXd& x) const {
    return basis.transpose() * svec(x);
  }
  Eigen::MatrixXd adjoint(const Eigen::VectorXd& y) const {
    return unsvec(basis * y, n);
  }
  Eigen::VectorXd map_multipliers(const Eigen::VectorXd& y_reduced) const {
    return multiplier_map * y_reduced;
  }
};

SdpSolver::SdpSolver(std::vector<Eigen::MatrixXd> constraints, Eigen::VectorXd b,
                     SdpOptions options)
    : impl_(std::make_unique<Impl>()) {
  if (constraints.empty()) throw Error("SDP needs at least one constraint");
  impl_->options = options;
  impl_->n = static_cast<int>(constraints[0].rows());
  impl_->m_original = static_cast<int>(constraints.size());
  impl_->b_original = b;
  const int n = impl_->n;
  const int m = impl_->m_original;
  if (b.size() != m) throw Error("constraint/right-hand-side count mismatch");

  const int nn = svec_dim(n);
  Eigen::MatrixXd stacked(nn, m);
  for (int i = 0; i < m; ++i) {
    const Eigen::MatrixXd& a = constraints[i];
    if (a.rows() != n || a.cols() != n) throw LayoutMismatch("constraint dimension mismatch");
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * (1.0 + a.cwiseAbs().maxCoeff())) {
      throw Error("constraint matrix " + std::to_string(i) + " is not symmetric");
    }
    svec_into(0.5 * (a + a.transpose()), stacked, i);
  }

  // Truncated SVD orthonormalization. Redundant-constraint bases arrive
  // nearly dependent; a backward-stable cut keeps the reduced right-hand
  // side from amplifying roundoff through tiny singular values.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(stacked, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cut = 1e-8 * sigma(0);
  int rank = 0;
  while (rank < sigma.size() && sigma(rank) > cut) ++rank;
  if (rank == 0) throw Error("all constraints are numerically zero");
  impl_->rank = rank;
  impl_->basis = svd.matrixU().leftCols(rank);
  // b_reduced solves the min-norm consistent system; multipliers map back
  // through the same pseudo-inverse.
  impl_->b_reduced =
      sigma.head(rank).cwiseInverse().asDiagonal() * (svd.matrixV().leftCols(rank).transpose() * b);
  impl_->multiplier_map =
      svd.matrixV().leftCols(rank) * sigma.head(rank).cwiseInverse().asDiagonal();

  const Eigen::VectorXd implied =
      svd.matrixV().leftCols(rank) * (sigma.head(rank).asDiagonal() * impl_->b_reduced);
  const double mismatch = (implied - b).cwiseAbs().maxCoeff();
  if (mismatch > 1e-8 * (1.0 + b.cwiseAbs().maxCoeff())) {
    throw Error("dependent constraints carry inconsistent right-hand sides");
  }
}

SdpSolver::~SdpSolver() = default;
SdpSolver::SdpSolver(SdpSolver&&) noexcept = default;
SdpSolver& SdpSolver::operator=(SdpSolver&&) noexcept = default;

int SdpSolver::n() const { return impl_->n; }
int SdpSolver::num_directions() const { return impl_->rank; }
int SdpSolver::num_dropped() const { return impl_->m_original - impl_->rank; }

double SdpSolver::constraint_violation(const Eigen::MatrixXd& x) const {
  return (impl_->b_reduced - impl_->apply(x)).cwiseAbs().maxCoeff();
}

SdpSolution SdpSolver::solve(const Eigen::MatrixXd& cost) const {
  return solve(cost, impl_->options);
}

SdpSolution SdpSolver::solve(const Eigen::MatrixXd& cost, const SdpOptions& options) const {
  const Impl& im = *impl_;
  const int n = im.n;
  const int r = im.rank;
  const int nn = svec_dim(n);
  const Eigen::MatrixXd c = 0.5 * (cost + cost.transpose());
  const double c_norm = c.norm();
  const double b_norm = im.b_reduced.norm();

  // Infeasible interior start; primal feasibility is restored by the
  // residual terms and locked in by the guarded projection below.
  const double xi = std::max(1.0, im.b_reduced.cwiseAbs().maxCoeff()) * 10.0 *
                    std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(n, n) * xi;
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(n, n) *
                      std::max(1.0, c_norm / std::sqrt(static_cast<double>(n)));
  Eigen::VectorXd y = Eigen::VectorXd::Zero(r);

  SdpSolution best;
  best.status = SdpStatus::MaxIter;
  best.dropped_constraints = im.m_original - im.rank;
  double best_metric = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_y_reduced = Eigen::VectorXd::Zero(r);

  auto record = [&](const Eigen::MatrixXd& xs, const Eigen::VectorXd& ys,
                    const SdpResiduals& res, int iter) {
    const double metric = res.max();
    if (metric < best_metric) {
      best_metric = metric;
      best.x = xs;
      best.y = -im.map_multipliers(ys);
      best_y_reduced = ys;
      best.primal_obj = trace_inner(c, xs);
      best.dual_obj = im.b_reduced.dot(ys);
      best.residuals = res;
      best.iterations = iter;
    }
  };

  SdpStatus status = SdpStatus::MaxIter;
  int iter = 0;
  int stalls = 0;
  int tol_iter = -1;
  double polish_prev = std::numeric_limits<double>::infinity();
  double polish_mu = std::numeric_limits<double>::infinity();
  for (; iter < options.max_iter; ++iter) {
    // Snap onto the affine constraint subspace whenever the min-norm
    // correction keeps X positive definite (it always does once the
    // iterates are close to feasible; early on it may not, so roll back).
    {
      const Eigen::VectorXd drift = im.b_reduced - im.apply(x);
      if (drift.norm() > 0.0) {
        const Eigen::MatrixXd projected = x + im.adjoint(drift);
        Eigen::LLT<Eigen::MatrixXd> llt(projected);
        if (llt.info() == Eigen::Success) x = projected;
      }
    }
    const Eigen::VectorXd rp = im.b_reduced - im.apply(x);
    const Eigen::MatrixXd rd = c - z - im.adjoint(y);
    const double pobj = trace_inner(c, x);
    const double dobj = im.b_reduced.dot(y);
    SdpResiduals res;
    res.primal_feas = rp.norm() / (1.0 + b_norm);
    res.dual_feas = rd.norm() / (1.0 + c_norm);
    res.rel_gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    record(x, y, res, iter);
    if (options.iter_log) {
      (*options.iter_log) << "iter " << iter << " pobj " << pobj << " dobj " << dobj
                          << " gap " << res.rel_gap << " pfeas " << res.primal_feas
                          << " dfeas " << res.dual_feas << "\n";
    }
    const double mu = trace_inner(x, z) / n;
    if (res.primal_feas <= options.tol && res.dual_feas <= options.tol &&
        res.rel_gap <= options.tol) {
      status = SdpStatus::Optimal;
      // Polish: drive the complementarity a few steps past the tolerance.
      // The spare accuracy sharpens the eigenvalue-ratio rank certificate
      // and the extraction; the best iterate is kept either way.
      if (tol_iter < 0) tol_iter = iter;
      const bool improving = res.max() < 0.5 * polish_prev || mu < 0.2 * polish_mu;
      polish_prev = std::min(polish_prev, res.max());
      polish_mu = std::min(polish_mu, mu);
      if (iter - tol_iter >= 16 || !improving) break;
    }

    // Nesterov-Todd scaling W with W Z W = X, via X = Lx Lx^T and the
    // eigendecomposition of Lx^T Z Lx.
    Eigen::MatrixXd lx;
    if (!cholesky(x, lx)) {
      status = SdpStatus::NumericalFailure;
      break;
    }
    const Eigen::MatrixXd s = lx.transpose() * z * lx;
    Eigen::VectorXd s_evals;
    Eigen::MatrixXd s_evecs;
    sym_eig(s, s_evals, s_evecs);
    if (s_evals(s_evals.size() - 1) <= 0.0) {
      status = SdpStatus::NumericalFailure;
      break;
    }
    const Eigen::MatrixXd lxu = lx * s_evecs;
    const Eigen::MatrixXd w =
        lxu * s_evals.cwiseSqrt().cwiseInverse().asDiagonal() * lxu.transpose();
    Eigen::MatrixXd g;  // W = G G^T
    if (!cholesky(w, g)) {
      status = SdpStatus::NumericalFailure;
      break;
    }

    // Everything below runs in the NT-scaled space, where the primal and
    // dual iterates coincide: V = G^-1 X G^-T = G^T Z G up to rounding.
    // Balanced magnitudes keep the Mehrotra corrector well conditioned all
    // the way to the boundary.
    Eigen::MatrixXd v = g.triangularView<Eigen::Lower>().solve(x);
    v = g.triangularView<Eigen::Lower>().solve(v.transpose()).eval();
    v = 0.5 * (v + v.transpose()).eval();
    Eigen::MatrixXd lv;
    if (!cholesky(v, lv)) {
      status = SdpStatus::NumericalFailure;
      break;
    }
    Eigen::VectorXd v_evals;
    Eigen::MatrixXd v_evecs;
    sym_eig(v, v_evals, v_evecs);
    if (v_evals(n - 1) <= 0.0) {
      status = SdpStatus::NumericalFailure;
      break;
    }
    // Unique symmetric solution of (D V + V D) / 2 = rhs in V's eigenbasis.
    auto lyapunov = [&](const Eigen::MatrixXd& rhs) {
      Eigen::MatrixXd m = v_evecs.transpose() * rhs * v_evecs;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) *= 2.0 / (v_evals(i) + v_evals(j));
      }
      return Eigen::MatrixXd(v_evecs * m * v_evecs.transpose());
    };

    // Scaled constraints and Schur complement M_ij = tr(A_i W A_j W) with
    // B_k = svec(G^T A_k G).
    Eigen::MatrixXd bmat(nn, r);
    {
      Eigen::MatrixXd ak(n, n), tmp(n, n);
      for (int k = 0; k < r; ++k) {
        ak = unsvec(im.basis.col(k), n);
        tmp.noalias() = g.transpose() * ak * g;
        svec_into(tmp, bmat, k);
      }
    }
    Eigen::MatrixXd schur = Eigen::MatrixXd::Zero(r, r);
    schur.selfadjointView<Eigen::Lower>().rankUpdate(bmat.transpose());
    schur.triangularView<Eigen::StrictlyUpper>() = schur.transpose();

    Eigen::LLT<Eigen::MatrixXd> schur_llt(schur);
    if (schur_llt.info() != Eigen::Success) {
      double ridge = 1e-14 * schur.diagonal().mean();
      for (int attempt = 0; attempt < 4 && schur_llt.info() != Eigen::Success; ++attempt) {
        schur_llt.compute(schur + ridge * Eigen::MatrixXd::Identity(r, r));
        ridge *= 100.0;
      }
      if (schur_llt.info() != Eigen::Success) {
        status = SdpStatus::NumericalFailure;
        break;
      }
    }

    const Eigen::MatrixXd rd_scaled = g.transpose() * rd * g;
    // Scaled-space direction: dXh + dZh = Rc, A_h(dXh) = rp, dZh from the
    // dual residual equation.
    auto direction = [&](const Eigen::MatrixXd& rc, Eigen::VectorXd& dy,
                         Eigen::MatrixXd& dxh, Eigen::MatrixXd& dzh) {
      const Eigen::VectorXd rhs = rp - bmat.transpose() * svec(rc - rd_scaled);
      dy = schur_llt.solve(rhs);
      dy += schur_llt.solve(rhs - schur * dy);  // one refinement step
      dzh = rd_scaled - unsvec(bmat * dy, n);
      dxh = rc - dzh;
      dxh = 0.5 * (dxh + dxh.transpose()).eval();
    };

    // Mehrotra predictor (sigma = 0).
    Eigen::VectorXd dy_a;
    Eigen::MatrixXd dxh_a, dzh_a;
    direction(-v, dy_a, dxh_a, dzh_a);
    const double tau = 0.98;
    const double ap_a = step_length(lv, dxh_a, tau);
    const double ad_a = step_length(lv, dzh_a, tau);
    const double mu_aff =
        trace_inner(v + ap_a * dxh_a, v + ad_a * dzh_a) / n;
    double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
    sigma = std::min(1.0, std::max(1e-8, sigma));

    // Corrector: the centrality target plus the second-order term, mapped
    // through the Lyapunov operator of the scaled complementarity equation.
    const Eigen::MatrixXd cross = dxh_a * dzh_a;
    const Eigen::MatrixXd rc =
        lyapunov(sigma * mu * Eigen::MatrixXd::Identity(n, n) - v * v -
                 0.5 * (cross + cross.transpose()));
    Eigen::VectorXd dy;
    Eigen::MatrixXd dxh, dzh;
    direction(rc, dy, dxh, dzh);

    double ap = step_length(lv, dxh, tau);
    double ad = step_length(lv, dzh, tau);

    // Map back: dX = G dXh G^T, dZ = G^-T dZh G^-1.
    const Eigen::MatrixXd dx = g * dxh * g.transpose();
    Eigen::MatrixXd dz =
        g.transpose().triangularView<Eigen::Upper>().solve(dzh);
    dz = g.transpose()
             .triangularView<Eigen::Upper>()
             .solve(dz.transpose())
             .eval();
    dz = 0.5 * (dz + dz.transpose()).eval();

    // Keep iterates safely positive definite.
    for (int back = 0; back < 8; ++back) {
      Eigen::MatrixXd trial = x + ap * dx;
      Eigen::MatrixXd ltrial;
      if (cholesky(trial, ltrial)) break;
      ap *= 0.7;
    }
    for (int back = 0; back < 8; ++back) {
      Eigen::MatrixXd trial = z + ad * dz;
      Eigen::MatrixXd ltrial;
      if (cholesky(trial, ltrial)) break;
      ad *= 0.7;
    }

    x += ap * dx;
    y += ad * dy;
    z += ad * dz;
    x = 0.5 * (x + x.transpose()).eval();
    z = 0.5 * (z + z.transpose()).eval();

    if (options.iter_log) {
      (*options.iter_log) << "  step ap " << ap << " ad " << ad << " sigma " << sigma << "\n";
    }
    if (ap < 1e-4 && ad < 1e-4) {
      if (++stalls >= 3) break;  // no progress; report best iterate
    } else {
      stalls = 0;
    }
  }

  // A tolerance-satisfying iterate was recorded; later polish breakdowns do
  // not change that.
  if (tol_iter >= 0) status = SdpStatus::Optimal;
  if (status == SdpStatus::NumericalFailure && best_metric <= 1e-6) {
    // Endgame factorization breakdown after the iterate effectively
    // converged; the best iterate is the answer, only the tolerance check
    // failed.
    status = SdpStatus::MaxIter;
  }
  best.status = status == SdpStatus::Optimal ? SdpStatus::Optimal
                : status == SdpStatus::NumericalFailure ? SdpStatus::NumericalFailure
                                                        : SdpStatus::MaxIter;
  {
    const Eigen::MatrixXd slack = c - im.adjoint(best_y_reduced);
    Eigen::VectorXd evals;
    Eigen::MatrixXd evecs;
    sym_eig(slack, evals, evecs);
    best.dual_slack_min_eig = evals(evals.size() - 1);
  }
  return best;
}

SdpSolution solve_sdp(const SdpInstance& instance, const SdpOptions& options) {
  SdpSolver solver(instance.a, instance.b, options);
  return solver.solve(instance.c, options);
}

}  // namespace roinit
