#include "meanfield/common.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace meanfield {

SimplexVector::SimplexVector(Vector p, double tol) : p_(std::move(p)) {
  if (p_.size() < 1) throw std::invalid_argument("simplex vector is empty");
  if (!p_.allFinite()) throw std::invalid_argument("simplex vector has non-finite entries");
  const double v = simplex_violation(p_);
  if (v > tol) {
    std::ostringstream msg;
    msg << "vector is off the simplex by " << v << " (tolerance " << tol << ")";
    throw std::invalid_argument(msg.str());
  }
}

SimplexVector SimplexVector::Uniform(int d) {
  if (d < 1) throw std::invalid_argument("simplex dimension must be positive");
  return SimplexVector(Vector::Constant(d, 1.0 / d));
}

SimplexVector SimplexVector::Project(const Vector& v) {
  SimplexVector out;
  out.p_ = project_to_simplex(v);
  return out;
}

double simplex_violation(const Vector& v) {
  if (v.size() == 0) return 0.0;
  return std::max(std::max(0.0, -v.minCoeff()), std::abs(v.sum() - 1.0));
}

Vector project_to_simplex(const Vector& v) {
  Vector out = v.cwiseMax(0.0);
  const double total = out.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::invalid_argument("cannot project onto the simplex: no positive mass");
  }
  out /= total;
  return out;
}

double stochastic_violation(const Matrix& P) {
  double worst = 0.0;
  for (int i = 0; i < P.rows(); ++i) {
    worst = std::max(worst, std::abs(P.row(i).sum() - 1.0));
  }
  if (P.size() > 0) worst = std::max(worst, -P.minCoeff());
  return worst;
}

void require_stochastic(const Matrix& P, double tol, const char* what) {
  if (P.rows() != P.cols() || P.rows() == 0) {
    throw std::invalid_argument(std::string(what) + ": matrix must be square and non-empty");
  }
  if (!P.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
  const double v = stochastic_violation(P);
  if (v > tol) {
    std::ostringstream msg;
    msg << what << ": not a stochastic matrix (violation " << v << ")";
    throw std::invalid_argument(msg.str());
  }
}

double min_eigenvalue(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(S), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace meanfield
