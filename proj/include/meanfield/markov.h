#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "meanfield/common.h"

namespace meanfield {

enum class Mode : std::uint8_t { kOn, kOff };

inline Mode opposite(Mode m) { return m == Mode::kOn ? Mode::kOff : Mode::kOn; }

/// Mode plus a 1-based phase (pools) or temperature-bin (TCLs) index.
struct StateLabel {
  Mode mode;
  int index;

  bool operator==(const StateLabel&) const = default;
};

/// Labeled finite state space. Pools and TCLs both order the ON states
/// first, so the on-indicator row is [1 ... 1 | 0 ... 0].
class StateSpace {
 public:
  StateSpace() = default;
  explicit StateSpace(std::vector<StateLabel> labels);

  static StateSpace Pool(int phases);
  static StateSpace Tcl(int bins);

  int size() const { return static_cast<int>(labels_.size()); }
  const StateLabel& operator[](int i) const { return labels_[i]; }
  Mode mode(int i) const { return labels_[i].mode; }

  /// "on:12", "off:3", ...
  std::string label(int i) const;
  std::vector<std::string> labels() const;

  /// State with the given mode and index 1; used when a forced switch
  /// has no transition mass in the target mode.
  int entry_state(Mode m) const;

  /// Row vector with 1 on states of mode `m`, 0 elsewhere.
  RowVector indicator(Mode m) const;

  bool operator==(const StateSpace&) const = default;

 private:
  std::vector<StateLabel> labels_;
};

/// A continuous map zeta -> P_zeta of row-stochastic matrices on a fixed
/// state space. Immutable and cheap to copy; safe to share across threads.
class TransitionFamily {
 public:
  class Impl {
   public:
    virtual ~Impl() = default;
    virtual Matrix Evaluate(double zeta) const = 0;
  };

  TransitionFamily(StateSpace states, std::shared_ptr<const Impl> impl);

  /// P_zeta. Throws std::invalid_argument for non-finite zeta.
  Matrix operator()(double zeta) const;

  const StateSpace& state_space() const { return states_; }
  int dim() const { return states_.size(); }

 private:
  StateSpace states_;
  std::shared_ptr<const Impl> impl_;
};

Matrix transition_matrix(const TransitionFamily& family, double zeta);

/// A zeta-independent family (TCL identification, hand-built examples).
TransitionFamily constant_family(StateSpace states, Matrix P);

// ---------------------------------------------------------------------------
// Pool pump model.
//
// Each mode is a chain of `phases` phases. From phase k the unit either
// advances to phase k+1 of the same mode or switches to phase 1 of the other
// mode; the last phase always switches. The nominal switch probabilities are
// the hazard rates of a sojourn length K = 1 + Binomial(phases - 1, p) with
// mean phases * on_fraction (ON) or phases * (1 - on_fraction) (OFF). The
// signal tilts the switch odds by exp(-gain*zeta) (on -> off) and
// exp(+gain*zeta) (off -> on), so a positive zeta raises consumption. The
// lazy version P = (1 - delta) I + delta P_check holds each phase for a
// geometric number of steps.
// ---------------------------------------------------------------------------

struct PoolModelParams {
  int phases = 48;
  double delta = 1.0 / 6.0;
  double on_fraction = 0.5;
  double tilt_gain = 2.5;
  /// Beta-binomial concentration of the sojourn law; 0 selects the binomial
  /// limit. Smaller values spread sojourns over more phases.
  double sojourn_concentration = 0.0;
};

/// Nominal switch probability for each phase 1..phases given the mean
/// sojourn (in phases). The sojourn K satisfies K - 1 ~ BetaBinomial(phases - 1,
/// p kappa, (1 - p) kappa) with E[K] = mean_phases; kappa = 0 is the binomial
/// limit. The last entry is 1.
std::vector<double> sojourn_hazards(int phases, double mean_phases, double concentration = 0.0);

TransitionFamily build_pool_model(const PoolModelParams& params);

/// Duty cycle hours/day -> ON fraction of a pool.
inline double on_fraction_from_hours(double hours_per_day) { return hours_per_day / 24.0; }

// ---------------------------------------------------------------------------

/// Invariant pmf of a stochastic matrix, supported on its unique closed
/// communicating class. States listed in `ignored` (patched self-loop rows)
/// are not counted as competing recurrent classes. Throws NumericalError if
/// the invariant pmf is not unique.
SimplexVector invariant_pmf(const Matrix& P, std::span<const int> ignored = {});

/// Indices of the states in each closed communicating class of P.
std::vector<std::vector<int>> closed_classes(const Matrix& P);

struct LinearizedModel {
  Matrix A;          // P_0^T
  Vector B;          // (d/dzeta P_zeta^T)|_0 pi_0
  RowVector C;
  SimplexVector pi0;
};

/// Central finite difference of P_zeta at zeta = 0, applied to pi_0.
LinearizedModel linearize_mean_field(const TransitionFamily& family, const RowVector& C,
                                     double h = 1e-4);

/// P_zeta = sum_k w_k P_zeta^(k). All families must share one state space.
TransitionFamily blend_families(std::span<const TransitionFamily> families,
                                std::span<const double> weights);

/// Weight on the first class so that w*ybar_first + (1-w)*ybar_second = ybar.
double two_class_weight(double ybar, double ybar_first, double ybar_second);

// ---------------------------------------------------------------------------
// Thermostatically controlled loads (cooling).
// ---------------------------------------------------------------------------

struct TclParams {
  double tau_seconds = 2.0;
  double theta_min = 20.0;
  double theta_max = 21.0;
  double ambient = 32.0;
  double resistance = 2.0;   // degC / kW
  double capacitance = 2.0;  // kWh / degC
  double transfer_rate = 14.0;  // kW
  double noise_var = 2.5e-7;    // degC^2

  /// exp(-tau / (C R)) with tau converted to hours to match C in kWh/degC.
  double a() const;
  void validate() const;
};

struct TclIdentification {
  int bins = 40;
  int mc_loads = 10000;
  int mc_steps = 3600;
  std::uint64_t seed = 1;
  int workers = 1;
  /// Start every load at this temperature (OFF) instead of uniform in band.
  std::optional<double> initial_temperature;
};

struct TclModel {
  TransitionFamily family;
  StateSpace states;
  Matrix joint;                 // Pi(x^j, x^k), empirical, sums to 1
  std::vector<int> unvisited;   // rows patched to self-loops
};

/// One step of the hybrid (dead-band, AR(1) temperature) dynamics.
struct TclState {
  double theta;
  Mode mode;
};
TclState tcl_step(const TclParams& params, const TclState& s, double noise);

int tcl_bin(const TclParams& params, int bins, double theta);

/// Monte-Carlo identification of the 2*bins-state transition matrix via the
/// empirical joint distribution of consecutive states.
TclModel build_tcl_model(const TclParams& params, const TclIdentification& id);

/// Z = theta when OFF, theta_min + theta_max - theta when ON.
double tcl_state_transform(double theta, Mode mode, double theta_min, double theta_max);

}  // namespace meanfield
