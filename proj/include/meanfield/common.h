#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace meanfield {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Raised when a numerical precondition of an algorithm fails at run time
/// (non-unique invariant pmf, defective eigenspace, unstable loop, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point of the probability simplex: nonnegative entries summing to one.
class SimplexVector {
 public:
  SimplexVector() = default;

  /// Validates `p`; throws std::invalid_argument if an entry is negative
  /// beyond `tol` or the entries do not sum to one within `tol`.
  explicit SimplexVector(Vector p, double tol = 1e-12);

  static SimplexVector Uniform(int d);

  /// Clips negative entries to zero and renormalizes. Throws if nothing
  /// positive is left.
  static SimplexVector Project(const Vector& v);

  const Vector& vector() const { return p_; }
  int size() const { return static_cast<int>(p_.size()); }
  double operator[](int i) const { return p_(i); }

 private:
  Vector p_;
};

/// Largest violation of the simplex constraints: max(-min entry, |sum-1|).
double simplex_violation(const Vector& v);

/// Clip-and-renormalize projection used after every measurement update.
Vector project_to_simplex(const Vector& v);

/// Max |row sum - 1| and min entry of a candidate stochastic matrix.
double stochastic_violation(const Matrix& P);

void require_stochastic(const Matrix& P, double tol, const char* what);

inline Matrix symmetrized(const Matrix& S) { return 0.5 * (S + S.transpose()); }

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& S);

}  // namespace meanfield
