#include "meanfield/filtering.h"

#include <cmath>
#include <iostream>
#include <string>

#include "filter_internal.h"

namespace meanfield {

void require_simplex(const Vector& phi, double tol, const char* what) {
  const double v = simplex_violation(phi);
  if (!(v <= tol)) {
    throw std::invalid_argument(std::string(what) + ": vector is off the simplex by " +
                                std::to_string(v));
  }
}

NoiseCovariances conditional_state_noise_cov(const Matrix& A, const Vector& phi, int N) {
  if (N < 1) throw std::invalid_argument("conditional_state_noise_cov: N must be >= 1");
  if (A.rows() != A.cols() || A.rows() != phi.size()) {
    throw std::invalid_argument("conditional_state_noise_cov: dimension mismatch");
  }
  require_simplex(phi, 1e-8, "conditional_state_noise_cov");
  const Vector mean = A * phi;
  Matrix wi = -(A * phi.asDiagonal() * A.transpose());
  wi.diagonal() += mean;
  wi = symmetrized(wi);
  return {wi / static_cast<double>(N), wi};
}

Matrix individual_covariance(const Vector& phi) {
  require_simplex(phi, 1e-8, "individual_covariance");
  Matrix s = -(phi * phi.transpose());
  s.diagonal() += phi;
  return s;
}

IndividualCovariances individual_covariances(const Vector& phi, const Vector& phi_pred) {
  return {individual_covariance(phi), individual_covariance(phi_pred)};
}

double conditional_obs_variance(const RowVector& C, const Matrix& sigma_i_pred,
                                const Matrix& sigma_pred, int n, int N) {
  if (N < 2) throw std::invalid_argument("conditional_obs_variance: N must be >= 2");
  if (n < 1 || n > N) throw std::invalid_argument("conditional_obs_variance: need 1 <= n <= N");
  if (n == N) return 0.0;
  const double factor = (1.0 / n) * static_cast<double>(N - n) / static_cast<double>(N - 1);
  const double raw = factor * (C * (sigma_i_pred - sigma_pred) * C.transpose())(0, 0);
  const double floor = 1e-12 * (C * sigma_i_pred * C.transpose())(0, 0);
  return std::max({raw, floor, 0.0});
}

Matrix steady_state_cov(const Matrix& P0, const SimplexVector& pi0, int N) {
  return conditional_state_noise_cov(P0.transpose(), pi0.vector(), N).sigma_w;
}

Matrix inflate_cov(const Matrix& sigma_star, const Matrix& sigma_inf, double k) {
  if (!(k >= 0.0) || !std::isfinite(k)) {
    throw std::invalid_argument("inflate_cov: inflation factor must be finite and >= 0");
  }
  return sigma_star + k * sigma_inf;
}

// --- transitions ------------------------------------------------------------

StateTransition StateTransition::Homogeneous(Matrix A) {
  StateTransition t;
  t.A = std::move(A);
  return t;
}

StateTransition StateTransition::Blended(std::vector<Matrix> components,
                                         std::vector<double> weights) {
  if (components.empty() || components.size() != weights.size()) {
    throw std::invalid_argument("StateTransition: one weight per component required");
  }
  StateTransition t;
  t.A = Matrix::Zero(components[0].rows(), components[0].cols());
  for (std::size_t k = 0; k < components.size(); ++k) t.A += weights[k] * components[k];
  t.components = std::move(components);
  t.weights = std::move(weights);
  return t;
}

Matrix StateTransition::noise_cov(const Vector& phi, int N) const {
  if (components.empty()) return conditional_state_noise_cov(A, phi, N).sigma_w;
  Matrix s = Matrix::Zero(A.rows(), A.cols());
  for (std::size_t k = 0; k < components.size(); ++k) {
    s += weights[k] * conditional_state_noise_cov(components[k], phi, N).sigma_w;
  }
  return s;
}

double Inflation::k_t(double qos_estimate) const { return k + b * std::abs(qos_estimate); }

namespace detail {

Matrix process_noise(const StateTransition& trans, const Vector& phi, int N,
                     const FilterOptions& options, double qos_estimate) {
  Matrix s = trans.noise_cov(project_to_simplex(phi), N);
  if (options.inflation) {
    s = inflate_cov(s, options.inflation->sigma_inf, options.inflation->k_t(qos_estimate));
  }
  return s;
}

FilterStepInfo scalar_update(const Vector& x_pred, const Matrix& P_pred, const RowVector& h,
                             double y, double r, Vector& x, Matrix& P) {
  FilterStepInfo info;
  info.sigma_v = r;
  const Vector Ph = P_pred * h.transpose();
  const double s = h.dot(Ph) + r;
  info.innovation = y - h.dot(x_pred);
  info.innovation_var = s;
  if (!(s > 0.0) || !std::isfinite(s)) {
    std::cerr << "filter: innovation variance " << s << " <= 0; update skipped\n";
    info.skipped = true;
    x = x_pred;
    P = P_pred;
    return info;
  }
  const Vector K = Ph / s;
  x = x_pred + K * info.innovation;
  P = symmetrized(P_pred - K * Ph.transpose());
  return info;
}

}  // namespace detail

using detail::process_noise;
using detail::scalar_update;

// --- population filter ------------------------------------------------------

PopulationFilterState init_population_filter(const SimplexVector& pi0, int N) {
  if (N < 1) throw std::invalid_argument("init_population_filter: N must be >= 1");
  PopulationFilterState fs;
  fs.phi = pi0.vector();
  fs.sigma = individual_covariance(fs.phi) / static_cast<double>(N);
  fs.phi_pred = fs.phi;
  fs.sigma_pred = fs.sigma;
  return fs;
}

Matrix kf_population_predict(PopulationFilterState& fs, const StateTransition& trans, int N,
                             const FilterOptions& options, double qos_estimate) {
  Matrix sw = process_noise(trans, fs.phi, N, options, qos_estimate);
  fs.phi_pred = trans.A * fs.phi;
  fs.sigma_pred = symmetrized(trans.A * fs.sigma * trans.A.transpose() + sw);
  return sw;
}

FilterStepInfo kf_population_update(PopulationFilterState& fs, const ObservationModel& obs,
                                    double y, int N, const FilterOptions& options) {
  const Matrix si_pred = individual_covariance(project_to_simplex(fs.phi_pred));
  const double r = conditional_obs_variance(obs.C, si_pred, fs.sigma_pred, obs.n, N);
  FilterStepInfo info = scalar_update(fs.phi_pred, fs.sigma_pred, obs.C, y, r, fs.phi, fs.sigma);
  if (options.project) fs.phi = project_to_simplex(fs.phi);
  return info;
}

FilterStepInfo kf_population_step(PopulationFilterState& fs, const StateTransition& trans,
                                  const ObservationModel& obs, double y, int N,
                                  const FilterOptions& options, double qos_estimate) {
  kf_population_predict(fs, trans, N, options, qos_estimate);
  return kf_population_update(fs, obs, y, N, options);
}

// --- joint filter -----------------------------------------------------------

JointFilterState init_joint_filter(const SimplexVector& pi0, int N, double qos0) {
  if (N < 1) throw std::invalid_argument("init_joint_filter: N must be >= 1");
  const int d = pi0.size();
  const Matrix si = individual_covariance(pi0.vector());
  const Matrix s = si / static_cast<double>(N);
  JointFilterState js;
  js.psi = Vector::Zero(2 * d + 1);
  js.psi.head(d) = pi0.vector();
  js.psi.segment(d, d) = pi0.vector();
  js.psi(2 * d) = qos0;
  js.sigma = Matrix::Zero(2 * d + 1, 2 * d + 1);
  js.sigma.topLeftCorner(d, d) = si;
  js.sigma.block(0, d, d, d) = s;
  js.sigma.block(d, 0, d, d) = s;
  js.sigma.block(d, d, d, d) = s;
  js.psi_pred = js.psi;
  js.sigma_pred = js.sigma;
  return js;
}

void kf_joint_predict(JointFilterState& js, const StateTransition& trans, const QosSpec& qos,
                      int N, const FilterOptions& options) {
  const int d = js.d();
  if (trans.A.rows() != d || qos.ell.size() != d) {
    throw std::invalid_argument("kf_joint_predict: dimension mismatch");
  }
  const Vector phi = project_to_simplex(js.population());
  Matrix sw = trans.noise_cov(phi, N);
  if (options.inflation) sw = inflate_cov(sw, options.inflation->sigma_inf,
                                          options.inflation->k_t(js.qos_mean()));
  const Matrix swi = sw * static_cast<double>(N);

  const int D = 2 * d + 1;
  Matrix F = Matrix::Zero(D, D);
  F.topLeftCorner(d, d) = trans.A;
  F.block(d, d, d, d) = trans.A;
  F.block(2 * d, 0, 1, d) = qos.ell.transpose();
  F(2 * d, 2 * d) = qos.beta;

  Matrix Q = Matrix::Zero(D, D);
  Q.topLeftCorner(d, d) = swi;
  Q.block(0, d, d, d) = sw;
  Q.block(d, 0, d, d) = sw;
  Q.block(d, d, d, d) = sw;

  js.psi_pred = F * js.psi;
  js.sigma_pred = symmetrized(F * js.sigma * F.transpose() + Q);
}

FilterStepInfo kf_joint_update(JointFilterState& js, const ObservationModel& obs, double y, int N,
                               const FilterOptions& options) {
  const int d = js.d();
  const Vector phi_pred = js.psi_pred.segment(d, d);
  const Matrix si_pred = individual_covariance(project_to_simplex(phi_pred));
  const double r =
      conditional_obs_variance(obs.C, si_pred, js.sigma_pred.block(d, d, d, d), obs.n, N);
  RowVector h = RowVector::Zero(2 * d + 1);
  h.segment(d, d) = obs.C;
  FilterStepInfo info = scalar_update(js.psi_pred, js.sigma_pred, h, y, r, js.psi, js.sigma);
  if (options.project) {
    js.psi.head(d) = project_to_simplex(js.psi.head(d));
    js.psi.segment(d, d) = project_to_simplex(js.psi.segment(d, d));
  }
  return info;
}

FilterStepInfo kf_joint_step(JointFilterState& js, const StateTransition& trans,
                             const QosSpec& qos, const ObservationModel& obs, double y, int N,
                             const FilterOptions& options) {
  kf_joint_predict(js, trans, qos, N, options);
  return kf_joint_update(js, obs, y, N, options);
}

}  // namespace meanfield
