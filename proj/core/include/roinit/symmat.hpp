#pragma once

#include <Eigen/Dense>

namespace roinit {

/// Dimension of the symmetric vectorization of an n x n matrix.
inline int svec_dim(int n) { return n * (n + 1) / 2; }

/// svec packs the upper triangle column by column with off-diagonal entries
/// scaled by sqrt(2), so that svec(A).dot(svec(B)) == trace(A * B) for
/// symmetric A, B.
Eigen::VectorXd svec(const Eigen::MatrixXd& a);
Eigen::MatrixXd unsvec(const Eigen::VectorXd& v, int n);

/// Writes svec(a) into the column `col` of `out` without allocating.
void svec_into(const Eigen::MatrixXd& a, Eigen::Ref<Eigen::MatrixXd> out, int col);

inline double trace_inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.cwiseProduct(b).sum();
}

}  // namespace roinit
