#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meanfield/common.h"
#include "meanfield/markov.h"

namespace meanfield {

struct PiGains {
  double kp = 50.0;
  double ki = 1.5;
  std::optional<std::pair<double, double>> saturation;  // [zeta_min, zeta_max]
};

/// Discrete PI law: integ += e; zeta = kp e + ki integ. While the output
/// saturates, the integrator keeps its previous value.
class PiController {
 public:
  explicit PiController(PiGains gains = {});

  double step(double e);
  void reset() { integ_ = 0.0; }

  double integral() const { return integ_; }
  const PiGains& gains() const { return gains_; }

 private:
  PiGains gains_;
  double integ_ = 0.0;
};

inline double pi_step(PiController& ctrl, double e) { return ctrl.step(e); }

enum class ErrorMode { kFiltered, kRaw };

/// e = r/N - (y - ybar), with y = C Phi_hat (filtered) or Y (raw).
double tracking_error(double r, double y, double ybar, int N);

/// RMS over t of (y_t - r_t) / RMS(r). Throws for a zero-energy reference.
double normalized_error_rms(std::span<const double> y, std::span<const double> r);

struct ReferenceSpec {
  enum class Kind { kSynthetic, kFile };
  Kind kind = Kind::kSynthetic;
  int horizon = 2016;
  double step_seconds = 300.0;
  double amplitude_fraction = 0.2;
  /// Synthetic: time constant of the first-order low-pass and the number
  /// of zero-phase (forward-backward) filtering passes.
  double time_constant_hours = 6.0;
  int passes = 1;
  std::uint64_t seed = 1;
  std::string path;  // file mode: CSV with columns t_seconds,r_kw
};

struct ReferenceSignal {
  std::vector<double> samples;  // kW, population scale
  double step_seconds = 300.0;
  std::string provenance;
};

/// Scaled so max |r| = amplitude_fraction * capacity, with capacity = N ybar.
/// The synthetic signal is zero-mean white Gaussian noise, low-pass filtered
/// and re-centered; file samples are held between their time stamps.
ReferenceSignal make_reference(const ReferenceSpec& spec, double capacity);

/// Reads a (t_seconds, r_kw) CSV with a header row.
std::vector<std::pair<double, double>> read_reference_csv(const std::string& path);

/// Closed loop of the PI compensator around the linearized model in
/// deviation coordinates: e_t = r_t/N - C x_t, x_{t+1} = A x_t + B zeta_t.
/// Returns the compensator outputs zeta_t.
std::vector<double> mean_field_prefilter(const PiGains& gains, const LinearizedModel& lin,
                                         std::span<const double> r, int N);

/// Spectral radius of the closed-loop state matrix restricted to the
/// tangent space of the simplex (the simplex-sum direction always carries
/// eigenvalue 1 and is excluded).
double prefilter_spectral_radius(const PiGains& gains, const LinearizedModel& lin);

}  // namespace meanfield
