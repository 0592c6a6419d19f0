#pragma once

#include <string>
#include <vector>

#include "meanfield/config.h"

namespace meanfield {

struct ScenarioTrace {
  std::vector<double> aggregate;      // N C Phi_t (kW)
  std::vector<double> observed;       // Y_t (kW per load)
  std::vector<double> zeta;
  std::vector<double> reference;      // r_t (kW)
  std::vector<double> qos_mean;       // empirical, across loads
  std::vector<double> qos_var;
  std::vector<double> optout;         // fraction forced at step t
  std::vector<double> estimate;       // C Phi_hat_t (kW per load)
  std::vector<double> qos_estimate;   // L_hat (NaN without QoS tracking)
  std::vector<double> qos_estimate_var;
  std::vector<double> sigma_trace;
  std::vector<double> innovation;
  std::vector<double> sigma_v;
  std::vector<double> state_error_l1;  // || Phi_hat - Phi ||_1
  std::vector<double> prior_error_l1;  // || pi0 - Phi ||_1
};

struct ScenarioSummary {
  std::string name;
  int N = 0;
  int n = 0;
  int horizon = 0;
  int burn_in = 0;
  std::uint64_t seed = 0;
  double ybar = 0.0;
  double normalized_rms = 0.0;     // over t >= burn_in
  double qos_mean_rel_error = 0.0;  // RMS(L_hat - mean) / mean(sd); NaN without QoS tracking
  double qos_var_rel_error = 0.0;   // RMS(Var_hat - var) / RMS(var)
  double max_optout = 0.0;
  double mean_optout = 0.0;
  double mean_state_error_l1 = 0.0;
  double mean_prior_error_l1 = 0.0;
  int skipped_updates = 0;
  double wall_seconds = 0.0;
  std::vector<std::string> notes;
};

struct ScenarioResult {
  ScenarioConfig config;
  ScenarioTrace trace;
  ScenarioSummary summary;
  std::vector<std::int64_t> final_state_counts;
  std::vector<std::string> state_labels;
  std::vector<double> final_qos;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

/// trajectory.csv, filter.csv, summary.txt, state_histogram.csv,
/// qos_histogram.csv and config.json under `dir` (created if missing).
void write_outputs(const ScenarioResult& result, const std::string& dir);

/// Text rendering of the summary.
std::string format_summary(const ScenarioSummary& s);

enum class SweepAxis { kPopulation, kFraction };

struct SweepRow {
  double value = 0.0;
  int N = 0;
  int n = 0;
  double normalized_rms = 0.0;
};

/// One run per value with the base seed. Population sweeps rescale the class
/// counts and keep the sampling fraction n/N of the base configuration.
std::vector<SweepRow> sweep(const ScenarioConfig& base, SweepAxis axis,
                            const std::vector<double>& values);

void write_sweep(const std::vector<SweepRow>& rows, SweepAxis axis, const std::string& path);

}  // namespace meanfield
