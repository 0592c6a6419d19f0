#include "meanfield/analysis.h"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace meanfield {

ObservabilityReport make_report(std::vector<double> singular_values, int count,
                                std::optional<double> tol) {
  std::sort(singular_values.begin(), singular_values.end(), std::greater<>());
  ObservabilityReport r;
  const double smax = singular_values.empty() ? 0.0 : singular_values.front();
  r.tolerance = tol ? *tol : count * std::numeric_limits<double>::epsilon() * smax;
  r.numerical_rank = static_cast<int>(std::count_if(
      singular_values.begin(), singular_values.end(), [&](double s) { return s > r.tolerance; }));
  r.spectrum = std::move(singular_values);
  return r;
}

namespace {

// Singular values (descending) and the right singular vectors beyond `rank`.
ObservabilityReport report_from_rows(const Matrix& F, int d, std::optional<double> tol) {
  Eigen::BDCSVD<Matrix> svd(F, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  std::vector<double> sv(s.data(), s.data() + s.size());
  sv.resize(d, 0.0);  // fewer rows than columns: trailing singular values are zero
  ObservabilityReport r = make_report(sv, d, tol);
  const int null_dim = d - r.numerical_rank;
  if (null_dim > 0) r.unobservable_basis = svd.matrixV().rightCols(null_dim);
  return r;
}

}  // namespace

ObservabilityMatrix observability_matrix(const Matrix& A, const RowVector& C,
                                         std::optional<double> tol) {
  const int d = static_cast<int>(A.rows());
  if (A.cols() != d || C.size() != d) {
    throw std::invalid_argument("observability_matrix: dimension mismatch");
  }
  ObservabilityMatrix out;
  out.O.resize(d, d);
  RowVector row = C;
  for (int k = 0; k < d; ++k) {
    out.O.row(k) = row;
    row = row * A;
  }
  out.report = report_from_rows(out.O, d, tol);
  return out;
}

namespace {

Grammian grammian_from_factor(Matrix factor, std::optional<double> tol) {
  Grammian g;
  g.factor = std::move(factor);
  g.G = g.factor.transpose() * g.factor;
  g.report = report_from_rows(g.factor, static_cast<int>(g.factor.cols()), tol);
  g.report.tolerance *= g.report.tolerance;
  for (double& s : g.report.spectrum) s *= s;
  return g;
}

}  // namespace

Grammian observability_grammian(std::span<const Matrix> A_seq, const RowVector& C, int horizon,
                                std::optional<double> tol) {
  if (horizon < 1) throw std::invalid_argument("observability_grammian: horizon must be >= 1");
  if (static_cast<int>(A_seq.size()) < horizon - 1) {
    throw std::invalid_argument("observability_grammian: need horizon-1 transition matrices");
  }
  const int d = static_cast<int>(C.size());
  Matrix factor(horizon, d);
  // Row t is C Phi(t,0) with Phi(t,0) = A_{t-1} ... A_0, so the state
  // transition is propagated on the left.
  Matrix phi = Matrix::Identity(d, d);
  for (int t = 0; t < horizon; ++t) {
    factor.row(t) = C * phi;
    if (t + 1 < horizon) phi = A_seq[t] * phi;
  }
  return grammian_from_factor(std::move(factor), tol);
}

Grammian observability_grammian(const Matrix& A, const RowVector& C, int horizon,
                                std::optional<double> tol) {
  if (horizon < 1) throw std::invalid_argument("observability_grammian: horizon must be >= 1");
  const int d = static_cast<int>(C.size());
  if (A.rows() != d || A.cols() != d) {
    throw std::invalid_argument("observability_grammian: dimension mismatch");
  }
  // Time-invariant: C A^t, one row-vector product per step.
  Matrix factor(horizon, d);
  RowVector row = C;
  for (int t = 0; t < horizon; ++t) {
    factor.row(t) = row;
    if (t + 1 < horizon) row = row * A;
  }
  return grammian_from_factor(std::move(factor), tol);
}

std::vector<double> ltv_outputs(std::span<const Matrix> A_seq, const RowVector& C,
                                const Vector& x0, int horizon) {
  std::vector<double> y;
  y.reserve(horizon);
  Vector x = x0;
  for (int t = 0; t < horizon; ++t) {
    y.push_back(C.dot(x));
    if (t + 1 < horizon) x = A_seq[t] * x;
  }
  return y;
}

// --- symmetry ---------------------------------------------------------------

SymmetryReport symmetry_check(const Matrix& A, const RowVector& C, double tol) {
  const int d = static_cast<int>(A.rows());
  SymmetryReport r;
  r.observability = observability_matrix(A, C).report;
  if (d % 2 != 0) return r;
  r.applicable = true;
  const int h = d / 2;
  const double mism_g = (A.topLeftCorner(h, h) - A.bottomRightCorner(h, h)).cwiseAbs().maxCoeff();
  const double mism_o = (A.topRightCorner(h, h) - A.bottomLeftCorner(h, h)).cwiseAbs().maxCoeff();
  const double c = C(0);
  const double cmax = std::max(C.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double mism_c = 0.0;
  for (int i = 0; i < d; ++i) {
    mism_c = std::max(mism_c, std::abs(C(i) - (i < h ? c : 0.0)) / cmax);
  }
  r.block_mismatch = std::max({mism_g, mism_o, mism_c});
  r.is_symmetric_form = c != 0.0 && r.block_mismatch <= tol;

  // Orthonormal basis of {z : sum z = 0}: trailing Householder columns of 1.
  const Matrix Qh = Eigen::HouseholderQR<Matrix>(Matrix::Ones(h, 1)).householderQ();
  r.v0_basis.resize(d, h - 1);
  for (int j = 0; j < h - 1; ++j) {
    r.v0_basis.col(j) << Qh.col(j + 1), Qh.col(j + 1);
    r.v0_basis.col(j) /= std::sqrt(2.0);
  }
  for (int j = 0; j < h - 1; ++j) {
    Vector x = r.v0_basis.col(j);
    for (int k = 0; k < d; ++k) {
      r.max_response = std::max(r.max_response, std::abs(C.dot(x)));
      x = A * x;
    }
  }
  return r;
}

// --- eigenmodes -------------------------------------------------------------

namespace {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;

bool is_real(Complex l) { return std::abs(l.imag()) <= 1e-12 * std::max(1.0, std::abs(l)); }

Vector normalized_real(Vector v) {
  v.normalize();
  const double s = v.sum();
  double sign = 1.0;
  if (std::abs(s) > 1e-12) {
    sign = s > 0 ? 1.0 : -1.0;
  } else {
    for (int i = 0; i < v.size(); ++i) {
      if (std::abs(v(i)) > 1e-12) {
        sign = v(i) > 0 ? 1.0 : -1.0;
        break;
      }
    }
  }
  return sign * v;
}

// Unit norm, largest-modulus entry real positive.
CVector normalized_complex(CVector v) {
  v.normalize();
  Eigen::Index imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  const Complex phase = v(imax) / std::abs(v(imax));
  return v / phase;
}

struct Group {
  int index;       // into the eigen solver's output
  bool pair;
};

}  // namespace

EigenModes eigen_modes(const Matrix& A, int k) {
  const int d = static_cast<int>(A.rows());
  if (A.cols() != d) throw std::invalid_argument("eigen_modes: A must be square");
  if (k < 1 || k > d) throw std::invalid_argument("eigen_modes: need 1 <= k <= d");

  Eigen::EigenSolver<Matrix> es(A, true);
  if (es.info() != Eigen::Success) throw NumericalError("eigen_modes: eigensolver failed");
  const Eigen::VectorXcd lambda = es.eigenvalues();
  const Eigen::MatrixXcd vecs = es.eigenvectors();

  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ma = std::abs(lambda(a)), mb = std::abs(lambda(b));
    if (ma != mb) return ma > mb;
    if (lambda(a).real() != lambda(b).real()) return lambda(a).real() > lambda(b).real();
    return lambda(a).imag() > lambda(b).imag();
  });

  std::vector<Group> groups;
  for (int i : order) {
    if (is_real(lambda(i))) {
      groups.push_back({i, false});
    } else if (lambda(i).imag() > 0) {
      groups.push_back({i, true});
    }
  }

  // Full realified basis, in group order.
  Matrix V_full(d, d);
  std::vector<Complex> col_lambda;
  std::vector<int> group_end;
  int col = 0;
  for (const auto& g : groups) {
    if (col >= d) break;
    if (!g.pair) {
      V_full.col(col++) = normalized_real(vecs.col(g.index).real());
      col_lambda.push_back(lambda(g.index).real());
    } else {
      if (col + 2 > d) break;
      const CVector v = normalized_complex(vecs.col(g.index));
      V_full.col(col++) = v.real();
      V_full.col(col++) = v.imag();
      col_lambda.push_back(lambda(g.index));
      col_lambda.push_back(std::conj(lambda(g.index)));
    }
    group_end.push_back(col);
  }
  if (col != d) throw NumericalError("eigen_modes: unpaired complex eigenvalue");

  int kk = 0;
  std::size_t ng = 0;
  while (kk < k) kk = group_end[ng++];

  // Defectiveness of each retained eigenvalue cluster.
  for (std::size_t gi = 0; gi < ng; ++gi) {
    const Complex l0 = lambda(groups[gi].index);
    std::vector<int> cluster;
    for (int j = 0; j < d; ++j) {
      if (std::abs(lambda(j) - l0) <= 1e-6 * std::max(1.0, std::abs(l0))) cluster.push_back(j);
    }
    if (cluster.size() < 2) continue;
    Eigen::MatrixXcd M(d, static_cast<Eigen::Index>(cluster.size()));
    for (std::size_t j = 0; j < cluster.size(); ++j) M.col(j) = vecs.col(cluster[j]).normalized();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
    const double smin = svd.singularValues().minCoeff();
    if (smin < 1e-8) {
      std::ostringstream msg;
      msg << "eigen_modes: defective eigenspace for eigenvalue cluster {";
      for (std::size_t j = 0; j < cluster.size(); ++j) msg << (j ? ", " : "") << lambda(cluster[j]);
      msg << "}";
      throw NumericalError(msg.str());
    }
  }

  EigenModes out;
  out.modes = V_full.leftCols(kk);
  out.eigenvalues.assign(col_lambda.begin(), col_lambda.begin() + kk);
  // Left eigenvectors of the retained eigenvalues give the spectral
  // projector dual = (U^T V)^{-1} U^T, equal to the matching rows of
  // V_full^{-1} without inverting the (often ill-conditioned) full basis.
  Eigen::EigenSolver<Matrix> left(A.transpose(), true);
  if (left.info() != Eigen::Success) throw NumericalError("eigen_modes: eigensolver failed");
  const Eigen::VectorXcd mu = left.eigenvalues();
  std::vector<bool> used(d, false);
  Matrix U(d, kk);
  int uc = 0;
  for (std::size_t gi = 0; gi < ng; ++gi) {
    const Complex l0 = lambda(groups[gi].index);
    int best = -1;
    for (int j = 0; j < d; ++j) {
      if (used[j]) continue;
      if (groups[gi].pair && mu(j).imag() <= 0) continue;
      if (best < 0 || std::abs(mu(j) - l0) < std::abs(mu(best) - l0)) best = j;
    }
    used[best] = true;
    if (!groups[gi].pair) {
      U.col(uc++) = left.eigenvectors().col(best).real().normalized();
    } else {
      const CVector u = normalized_complex(left.eigenvectors().col(best));
      U.col(uc++) = u.real();
      U.col(uc++) = u.imag();
    }
  }
  Eigen::FullPivLU<Matrix> lu(U.transpose() * out.modes);
  if (lu.isInvertible() && lu.rcond() > 1e-12) {
    out.dual = lu.solve(U.transpose());
  } else {
    out.dual = (out.modes.transpose() * out.modes).ldlt().solve(out.modes.transpose());
  }
  out.reduced = out.dual * A * out.modes;
  return out;
}

}  // namespace meanfield
