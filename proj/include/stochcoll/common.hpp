#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stochcoll {

template <typename Scalar>
using Vec3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3T = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Mat2T = Eigen::Matrix<Scalar, 2, 2>;

using Vec3 = Vec3T<double>;
using Mat3 = Mat3T<double>;
using Mat2 = Mat2T<double>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Relative tolerance for exact algebraic identities in double precision.
inline constexpr double kIdentityTolerance = 1e-12;

// Axes within this distance of unit length are renormalized, farther ones rejected.
inline constexpr double kAxisRenormalizeTolerance = 1e-9;

/// Relative closeness with an absolute floor given by `scale`.
inline bool close_rel(double a, double b, double tol, double scale = 1.0) {
  const double mag = std::max({std::abs(a), std::abs(b), scale});
  return std::abs(a - b) <= tol * mag;
}

}  // namespace stochcoll
