#include "filter_internal.h"
#include "meanfield/analysis.h"
#include "meanfield/filtering.h"

namespace meanfield {

ReducedOrderObserver::ReducedOrderObserver(const Matrix& A_nominal, const RowVector& C, int k,
                                           const SimplexVector& pi0, int N) {
  EigenModes m = eigen_modes(A_nominal, k);
  V_ = std::move(m.modes);
  W_ = std::move(m.dual);
  H_ = C * V_;
  z_ = W_ * pi0.vector();
  P_ = symmetrized(W_ * (individual_covariance(pi0.vector()) / static_cast<double>(N)) *
                   W_.transpose());
  z_pred_ = z_;
  P_pred_ = P_;
}

Matrix ReducedOrderObserver::predict(const StateTransition& trans, int N,
                                     const FilterOptions& options, double qos_estimate) {
  Matrix sw = detail::process_noise(trans, V_ * z_, N, options, qos_estimate);
  const Matrix Ar = W_ * trans.A * V_;
  z_pred_ = Ar * z_;
  P_pred_ = symmetrized(Ar * P_ * Ar.transpose() + W_ * sw * W_.transpose());
  return sw;
}

FilterStepInfo ReducedOrderObserver::update(const ObservationModel& obs, double y, int N) {
  const Matrix si_pred = individual_covariance(project_to_simplex(V_ * z_pred_));
  const Matrix sigma_pred = V_ * P_pred_ * V_.transpose();
  const double r = conditional_obs_variance(obs.C, si_pred, sigma_pred, obs.n, N);
  return detail::scalar_update(z_pred_, P_pred_, H_, y, r, z_, P_);
}

Vector ReducedOrderObserver::estimate() const { return project_to_simplex(V_ * z_); }

double ReducedOrderObserver::output() const { return H_.dot(z_); }

}  // namespace meanfield
