#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "meanfield/control.h"
#include "meanfield/markov.h"

namespace meanfield {

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelSpec {
  enum class Kind { kPool, kTcl };
  Kind kind = Kind::kPool;
  int phases = 48;
  double delta = 1.0 / 6.0;
  double duty_cycle_hours = 12.0;
  double tilt_gain = 2.5;
  double sojourn_concentration = 0.0;  // 0: binomial sojourn law
  double kw = 1.0;  // consumption while ON
  TclParams tcl;
  TclIdentification tcl_id;
};

/// A model ready for simulation and filtering.
struct BuiltModel {
  TransitionFamily family;
  RowVector C;
  SimplexVector pi0;
  double ybar = 0.0;
  std::vector<int> unvisited;
};

BuiltModel build_model(const ModelSpec& spec);

struct ClassSpec {
  ModelSpec model;
  int count = 0;
};

enum class ControlMode { kFiltered, kRaw, kPrefilter, kNone };
enum class FilterVariant { kPopulation, kJoint, kReduced };
enum class QosCentering { kClass, kCommon };

struct ScenarioConfig {
  std::string name = "custom";
  std::vector<ClassSpec> classes;

  // Sampling: exactly one of n / fraction; n = max(1, round(fraction N)).
  std::optional<int> n;
  std::optional<double> fraction;

  int horizon = 2016;
  double step_seconds = 300.0;
  int burn_in = 288;

  ControlMode control = ControlMode::kFiltered;
  PiGains gains;

  FilterVariant filter = FilterVariant::kPopulation;
  int reduced_order = 7;
  bool project = true;
  bool track_qos = false;  // run the joint filter alongside another variant
  /// Filter model; empty means the (single) simulated model.
  std::vector<ModelSpec> filter_models;
  std::vector<double> filter_weights;  // empty: equal for 1, from ybar for 2
  bool inflation = false;
  double inflation_k = 0.0;         // absolute part of k
  double inflation_k_per_load = 0.0;  // k += this * N
  double inflation_b = 0.0;

  double qos_beta = 0.9997;
  QosCentering qos_centering = QosCentering::kClass;
  std::optional<std::pair<double, double>> optout_bounds;
  /// Open-loop steps (zeta = 0, opt-out active) run before t = 0 so QoS
  /// starts from its operating distribution rather than from zero.
  int qos_warmup = 0;

  ReferenceSpec reference;
  std::uint64_t seed = 1;
  int workers = 1;

  int population() const;
  int samples() const;
};

/// Checks ranges and cross-field constraints.
void validate(const ScenarioConfig& cfg);

ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
std::string to_json(const ScenarioConfig& cfg);

/// Named experiment configurations.
ScenarioConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Applies the keys of `json_text` on top of `base`.
ScenarioConfig apply_overrides(const ScenarioConfig& base, const std::string& json_text);

ModelSpec parse_model(const std::string& json_text);
ModelSpec load_model(const std::string& path);

/// Scales class counts to total `N` by largest remainder; every class keeps
/// at least one load when N allows.
std::vector<int> scale_counts(const std::vector<int>& counts, int N);

}  // namespace meanfield
