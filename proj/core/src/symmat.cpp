#include "roinit/symmat.hpp"

#include <cmath>

namespace roinit {

namespace {
const double kSqrt2 = std::sqrt(2.0);
}

Eigen::VectorXd svec(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  Eigen::VectorXd v(svec_dim(n));
  int idx = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) v(idx++) = kSqrt2 * a(i, j);
    v(idx++) = a(j, j);
  }
  return v;
}

Eigen::MatrixXd unsvec(const Eigen::VectorXd& v, int n) {
  Eigen::MatrixXd a(n, n);
  int idx = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) {
      const double x = v(idx++) / kSqrt2;
      a(i, j) = x;
      a(j, i) = x;
    }
    a(j, j) = v(idx++);
  }
  return a;
}

void svec_into(const Eigen::MatrixXd& a, Eigen::Ref<Eigen::MatrixXd> out, int col) {
  const int n = static_cast<int>(a.rows());
  int idx = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < j; ++i) out(idx++, col) = kSqrt2 * a(i, j);
    out(idx++, col) = a(j, j);
  }
}

}  // namespace roinit
