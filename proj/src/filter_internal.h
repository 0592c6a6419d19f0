#pragma once

#include "meanfield/filtering.h"

namespace meanfield::detail {

/// Sigma* at the projected estimate, inflated when configured.
Matrix process_noise(const StateTransition& trans, const Vector& phi, int N,
                     const FilterOptions& options, double qos_estimate);

/// Scalar-measurement Kalman update of (x, P) along row h with noise r.
/// A non-positive innovation variance skips the update.
FilterStepInfo scalar_update(const Vector& x_pred, const Matrix& P_pred, const RowVector& h,
                             double y, double r, Vector& x, Matrix& P);

}  // namespace meanfield::detail
