#pragma once

#include <optional>
#include <span>
#include <vector>

#include "meanfield/common.h"
#include "meanfield/population.h"

namespace meanfield {

struct NoiseCovariances {
  Matrix sigma_w;   // population: Sigma^Wi / N
  Matrix sigma_wi;  // individual: diag(A phi) - A diag(phi) A^T
};

/// `A` is the transposed transition matrix (columns sum to one); `phi` must
/// lie on the simplex within 1e-8.
NoiseCovariances conditional_state_noise_cov(const Matrix& A, const Vector& phi, int N);

/// diag(phi) - phi phi^T.
Matrix individual_covariance(const Vector& phi);

struct IndividualCovariances {
  Matrix sigma_i;
  Matrix sigma_i_pred;
};
IndividualCovariances individual_covariances(const Vector& phi, const Vector& phi_pred);

/// (1/n) (N-n)/(N-1) C (Sigma^i_pred - Sigma_pred) C^T. Zero when n = N;
/// otherwise clamped below by 1e-12 * C Sigma^i_pred C^T.
double conditional_obs_variance(const RowVector& C, const Matrix& sigma_i_pred,
                                const Matrix& sigma_pred, int n, int N);

/// Sigma^W at the invariant pmf: (1/N)[diag(A pi0) - A diag(pi0) A^T], A = P0^T.
Matrix steady_state_cov(const Matrix& P0, const SimplexVector& pi0, int N);

/// sigma_star + k * sigma_inf. Throws for k < 0.
Matrix inflate_cov(const Matrix& sigma_star, const Matrix& sigma_inf, double k);

/// A_t together with what is needed to form its conditional noise covariance.
/// For a blend, Sigma* is the same convex combination of the per-component
/// covariances.
struct StateTransition {
  Matrix A;
  std::vector<Matrix> components;
  std::vector<double> weights;

  static StateTransition Homogeneous(Matrix A);
  static StateTransition Blended(std::vector<Matrix> components, std::vector<double> weights);

  Matrix noise_cov(const Vector& phi, int N) const;
};

/// Sigma^W = Sigma* + k_t Sigma_inf with k_t = k + b |L_hat|.
struct Inflation {
  Matrix sigma_inf;
  double k = 0.0;
  double b = 0.0;

  double k_t(double qos_estimate) const;
};

struct FilterOptions {
  bool project = true;  // clip-and-renormalize the estimate after each update
  std::optional<Inflation> inflation;
};

struct FilterStepInfo {
  double sigma_v = 0.0;
  double innovation = 0.0;
  double innovation_var = 0.0;
  bool skipped = false;
};

/// Estimate and covariance after the last update, with the one-step
/// prediction that the next update consumes.
struct PopulationFilterState {
  Vector phi;
  Matrix sigma;
  Vector phi_pred;
  Matrix sigma_pred;
};

/// Prior at t = 0: phi = pi0, Sigma = (diag(pi0) - pi0 pi0^T) / N.
PopulationFilterState init_population_filter(const SimplexVector& pi0, int N);

/// Returns the Sigma^W used. `qos_estimate` feeds the inflation schedule.
Matrix kf_population_predict(PopulationFilterState& fs, const StateTransition& trans, int N,
                             const FilterOptions& options = {}, double qos_estimate = 0.0);

FilterStepInfo kf_population_update(PopulationFilterState& fs, const ObservationModel& obs,
                                    double y, int N, const FilterOptions& options = {});

/// Predict with `trans`, then update with y.
FilterStepInfo kf_population_step(PopulationFilterState& fs, const StateTransition& trans,
                                  const ObservationModel& obs, double y, int N,
                                  const FilterOptions& options = {}, double qos_estimate = 0.0);

/// State (phi_i; phi; L) of dimension 2d+1. By exchangeability the
/// individual block tracks the population block.
struct JointFilterState {
  Vector psi;
  Matrix sigma;
  Vector psi_pred;
  Matrix sigma_pred;

  int d() const { return static_cast<int>((psi.size() - 1) / 2); }
  Vector individual() const { return psi.head(d()); }
  Vector population() const { return psi.segment(d(), d()); }
  double qos_mean() const { return psi(2 * d()); }
  double qos_var() const { return sigma(2 * d(), 2 * d()); }
};

/// Blocks [[S^i, S, 0], [S, S, 0], [0, 0, 0]] with S^i = diag(pi0) - pi0 pi0^T
/// and S = S^i / N.
JointFilterState init_joint_filter(const SimplexVector& pi0, int N, double qos0 = 0.0);

/// F = [[A, 0, 0], [0, A, 0], [ell^T, 0, beta]],
/// Q = [[S^Wi, S^W, 0], [S^W, S^W, 0], [0, 0, 0]], both noise blocks taken at
/// the projected population estimate.
void kf_joint_predict(JointFilterState& js, const StateTransition& trans, const QosSpec& qos,
                      int N, const FilterOptions& options = {});

/// H = [0, C, 0].
FilterStepInfo kf_joint_update(JointFilterState& js, const ObservationModel& obs, double y, int N,
                               const FilterOptions& options = {});

FilterStepInfo kf_joint_step(JointFilterState& js, const StateTransition& trans,
                             const QosSpec& qos, const ObservationModel& obs, double y, int N,
                             const FilterOptions& options = {});

/// Kalman filter on the span of the k dominant (realified) eigenvectors V of
/// a nominal A, with dual rows W (W V = I). Reduced matrices for a step are
/// W A_t V and W Sigma^W W^T; the output row is C V.
class ReducedOrderObserver {
 public:
  ReducedOrderObserver(const Matrix& A_nominal, const RowVector& C, int k,
                       const SimplexVector& pi0, int N);

  /// Returns the full-space Sigma^W used.
  Matrix predict(const StateTransition& trans, int N, const FilterOptions& options = {},
                 double qos_estimate = 0.0);
  FilterStepInfo update(const ObservationModel& obs, double y, int N);

  /// V z, simplex-projected.
  Vector estimate() const;
  /// C V z (not projected).
  double output() const;

  int order() const { return static_cast<int>(V_.cols()); }
  const Matrix& basis() const { return V_; }
  const Matrix& dual() const { return W_; }

 private:
  Matrix V_, W_;
  RowVector H_;
  Vector z_, z_pred_;
  Matrix P_, P_pred_;
};

/// Guard used by all covariance formulas.
void require_simplex(const Vector& phi, double tol, const char* what);

}  // namespace meanfield
