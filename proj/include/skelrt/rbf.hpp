#pragma once

// Gaussian radial basis function interpolant with a constant term:
//
//   f(x) = c + sum_i w_i * exp(-(|x - x_i| / s)^2),   sum_i w_i = 0
//
// The side condition makes a single center reproduce a constant and keeps
// the system well posed for distinct centers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace skelrt {

template <typename Scalar>
class GaussianRbf {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// `centers` holds one point per row. `shape` must be positive.
  GaussianRbf(const Matrix& centers, const Vector& values, Scalar shape) : centers_(centers), shape_(shape) {
    const Eigen::Index n = centers.rows();
    Matrix system = Matrix::Zero(n + 1, n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) system(i, j) = kernel((centers.row(i) - centers.row(j)).norm());
      system(i, n) = Scalar(1);
      system(n, i) = Scalar(1);
    }
    Vector rhs = Vector::Zero(n + 1);
    rhs.head(n) = values;
    Vector solution = system.colPivHouseholderQr().solve(rhs);
    weights_ = solution.head(n);
    constant_ = solution(n);
  }

  Scalar operator()(const Vector& x) const {
    Scalar out = constant_;
    for (Eigen::Index i = 0; i < centers_.rows(); ++i)
      out += weights_(i) * kernel((centers_.row(i).transpose() - x).norm());
    return out;
  }

  const Vector& weights() const { return weights_; }
  Scalar constant() const { return constant_; }

 private:
  Scalar kernel(Scalar r) const {
    Scalar q = r / shape_;
    return std::exp(-q * q);
  }

  Matrix centers_;
  Vector weights_;
  Scalar constant_ = Scalar(0);
  Scalar shape_;
};

/// Median of the pairwise Euclidean distances between rows; 1 when fewer
/// than two distinct rows exist.
template <typename Derived>
typename Derived::Scalar median_pairwise_distance(const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> d;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      Scalar r = (points.row(i) - points.row(j)).norm();
      if (r > Scalar(0)) d.push_back(r);
    }
  if (d.empty()) return Scalar(1);
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size() / 2;
  return d.size() % 2 ? d[m] : (d[m - 1] + d[m]) / Scalar(2);
}

}  // namespace skelrt
