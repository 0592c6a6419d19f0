#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "meanfield/common.h"

namespace meanfield {

struct ObservabilityReport {
  std::vector<double> spectrum;  // descending, nonnegative
  int numerical_rank = 0;
  double tolerance = 0.0;
  Matrix unobservable_basis;     // orthonormal columns, may be empty
};

/// Rank of a descending list of singular values at `tol`, or at
/// count * eps * max when `tol` is empty.
ObservabilityReport make_report(std::vector<double> singular_values, int count,
                                std::optional<double> tol);

struct ObservabilityMatrix {
  Matrix O;  // row k is C A^k, k = 0..d-1
  ObservabilityReport report;  // spectrum = singular values of O
};

ObservabilityMatrix observability_matrix(const Matrix& A, const RowVector& C,
                                         std::optional<double> tol = std::nullopt);

/// O_G = sum_{t<T} c_t^T c_t with c_t = C Phi(t,0), Phi(t,0) = A_{t-1} ... A_0. `factor`
/// stacks the rows c_t, so O_G = factor^T factor; the spectrum is computed as
/// the squared singular values of the factor and the rank is taken on those
/// singular values.
struct Grammian {
  Matrix G;
  Matrix factor;
  ObservabilityReport report;
};

Grammian observability_grammian(std::span<const Matrix> A_seq, const RowVector& C, int horizon,
                                std::optional<double> tol = std::nullopt);
Grammian observability_grammian(const Matrix& A, const RowVector& C, int horizon,
                                std::optional<double> tol = std::nullopt);

/// Outputs y_t = C Phi(t,0) x0 for t < horizon.
std::vector<double> ltv_outputs(std::span<const Matrix> A_seq, const RowVector& C,
                                const Vector& x0, int horizon);

struct SymmetryReport {
  bool applicable = false;        // d even
  bool is_symmetric_form = false;
  double block_mismatch = 0.0;    // max |A_g - A_g'|, |A_o - A_o'|, C deviation
  Matrix v0_basis;                // (z; z), sum z = 0, orthonormal columns
  double max_response = 0.0;      // max over basis v, k < d of |C A^k v|
  ObservabilityReport observability;
};

/// Tests whether A = [[A_g, A_o], [A_o, A_g]] and C = c [1^T | 0^T] within
/// `tol`, and evaluates the response of the candidate unobservable subspace.
SymmetryReport symmetry_check(const Matrix& A, const RowVector& C, double tol = 1e-10);

/// k real modes of A ordered by |lambda| descending. A complex pair
/// contributes the real and imaginary parts of its representative with
/// positive imaginary part, in that order; if k would split a pair it is
/// raised by one. `dual` is the spectral projector onto the retained modes,
/// built from the matching left eigenvectors, so dual * modes = I and
/// dual * A * modes = `reduced`. Real modes have unit norm with positive sum
/// (or positive first nonzero entry when the sum vanishes).
struct EigenModes {
  Matrix modes;
  Matrix dual;
  Matrix reduced;
  std::vector<std::complex<double>> eigenvalues;  // one per column
};

/// Throws NumericalError naming the eigenvalue cluster if a retained
/// eigenspace is defective at tolerance 1e-8.
EigenModes eigen_modes(const Matrix& A, int k);

}  // namespace meanfield
