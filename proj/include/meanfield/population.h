#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "meanfield/common.h"
#include "meanfield/markov.h"

namespace meanfield {

enum class Forcing : std::uint8_t { kNone, kForceOn, kForceOff };

/// N loads with 0-based state indices, discounted QoS accumulators and
/// per-load class membership. Transition draws for load i at step t use the
/// counter-based stream (seed, i, t).
struct PopulationState {
  std::vector<int> states;
  std::vector<double> qos;
  std::vector<Forcing> forcing;
  std::vector<int> classes;
  std::uint64_t seed = 0;
  std::int64_t t = 0;

  int size() const { return static_cast<int>(states.size()); }
};

/// Draws each load's initial state i.i.d. from `initial[class]`.
/// `class_counts[c]` loads are assigned to class c, in order.
PopulationState make_population(std::span<const int> class_counts,
                                std::span<const SimplexVector> initial, std::uint64_t seed);

/// Row-sparse form of P for inverse-CDF sampling.
struct SparseTransitions {
  std::vector<int> offsets;   // size d+1
  std::vector<int> targets;
  std::vector<double> cdf;    // cumulative within each row
  std::vector<double> prob;

  static SparseTransitions From(const Matrix& P);
  int sample(int from, double u) const;
  /// Sample conditioned on the destination being in mode `m`; returns -1 if
  /// the row has no mass there.
  int sample_in_mode(int from, double u, const StateSpace& states, Mode m) const;
};

/// Advances every load one step under its class's P_zeta (`families[c]`).
/// Loads with an active forcing draw from their row conditioned on the
/// forced mode, falling back to that mode's entry state. The forcing flags
/// are cleared afterwards. Work is split across `workers` threads; results
/// do not depend on the split.
void step_population(PopulationState& pop, std::span<const TransitionFamily> families,
                     double zeta, int workers = 1);

/// Same, with the per-class matrices already evaluated.
void step_population(PopulationState& pop, std::span<const SparseTransitions> rows,
                     const StateSpace& states, int workers = 1);

/// Phi(k) = #{i : state_i = k} / N. Sums to one up to a single rounding.
SimplexVector empirical_distribution(const PopulationState& pop, int d);

/// Integer state counts (exact).
std::vector<std::int64_t> state_counts(const PopulationState& pop, int d);

/// Restricted to loads of one class.
SimplexVector class_distribution(const PopulationState& pop, int d, int cls);

struct ObservationModel {
  int n = 1;        // loads sampled per step, without replacement
  RowVector C;      // per-state consumption (kW)
  double ybar = 0;  // nominal average consumption (kW)
};

/// Average consumption of n distinct loads drawn uniformly.
double observe(const PopulationState& pop, const ObservationModel& obs, std::mt19937_64& rng);

struct QosSpec {
  Vector ell;      // per-state score
  double beta = 1.0;
  std::optional<std::pair<double, double>> bounds;  // [Lmin, Lmax]

  /// sum_x pi(x) ell(x); should vanish for the model's invariant pmf.
  double centering_error(const SimplexVector& pi) const;
};

/// L_{t+1} = beta L_t + ell(X_t), using each load's class spec.
void update_qos(PopulationState& pop, std::span<const QosSpec> per_class);
void update_qos(PopulationState& pop, const QosSpec& spec);

/// L >= Lmax forces OFF, L <= Lmin forces ON for the next transition.
/// Returns the number of loads forced.
int apply_optout(PopulationState& pop, double lmin, double lmax);

struct QosStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};

QosStats qos_population_stats(const PopulationState& pop);
QosStats qos_class_stats(const PopulationState& pop, int cls);

double optout_fraction(const PopulationState& pop);

/// Monte-Carlo check of the martingale-difference property: from a fixed
/// population, repeats one transition + one sample `trials` times and
/// reports the conditional means of W_{t+1} = Phi_{t+1} - A Phi_t and
/// V_t = Y_t - C Phi_t with their standard errors.
struct MartingaleCheck {
  double w_max_abs_mean = 0.0;
  double w_max_z = 0.0;       // max over k of |mean W_k| / se_k (0 when se = 0)
  double v_abs_mean = 0.0;
  double v_z = 0.0;
  double v_max_abs = 0.0;     // max |V| over trials
};

MartingaleCheck martingale_noise_check(const TransitionFamily& family, const PopulationState& pop,
                                       const ObservationModel& obs, double zeta, int trials,
                                       std::uint64_t seed);

}  // namespace meanfield
