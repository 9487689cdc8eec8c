#pragma once

#include <Eigen/Dense>

#include <algorithm>

namespace fpp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Singular values below this fraction of the largest one are treated as zero.
inline constexpr double kPinvRelativeTolerance = 1e-10;

struct Pseudoinverse {
  Matrix inverse;
  Eigen::Index rank = 0;
};

// Moore-Penrose inverse through a thin SVD.
inline Pseudoinverse pseudoinverse(const Matrix& a, double rel_tol = kPinvRelativeTolerance) {
  Pseudoinverse out;
  out.inverse = Matrix::Zero(a.cols(), a.rows());
  if (a.size() == 0) return out;
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  Vector s_inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) {
      s_inv(i) = 1.0 / s(i);
      ++out.rank;
    }
  }
  out.inverse = svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace fpp
