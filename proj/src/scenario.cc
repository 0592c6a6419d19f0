#include "meanfield/scenario.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <sstream>

#include "meanfield/csv.h"
#include "meanfield/filtering.h"
#include "meanfield/population.h"
#include "meanfield/rng.h"

namespace meanfield {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

StateTransition filter_transition(std::span<const TransitionFamily> fams,
                                  const std::vector<double>& weights, double zeta) {
  if (fams.size() == 1) return StateTransition::Homogeneous(fams[0](zeta).transpose());
  std::vector<Matrix> comps;
  comps.reserve(fams.size());
  for (const auto& f : fams) comps.push_back(f(zeta).transpose());
  return StateTransition::Blended(std::move(comps), weights);
}

double mean_of(const std::vector<double>& x, int from) {
  double s = 0.0;
  for (std::size_t t = from; t < x.size(); ++t) s += x[t];
  return s / static_cast<double>(x.size() - from);
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  validate(cfg);
  const auto wall0 = std::chrono::steady_clock::now();
  ScenarioResult res;
  res.config = cfg;
  ScenarioSummary& sum = res.summary;
  ScenarioTrace& tr = res.trace;

  // Simulated classes.
  std::vector<BuiltModel> classes;
  classes.reserve(cfg.classes.size());
  for (const auto& c : cfg.classes) classes.push_back(build_model(c.model));
  const StateSpace& states = classes[0].family.state_space();
  const int d = states.size();
  const RowVector& C = classes[0].C;
  for (std::size_t c = 1; c < classes.size(); ++c) {
    if (!(classes[c].family.state_space() == states)) {
      throw ConfigError("classes[" + std::to_string(c) + "].model: state space differs from class 0");
    }
    if ((classes[c].C - C).cwiseAbs().maxCoeff() > 0.0) {
      throw ConfigError("classes[" + std::to_string(c) + "].model.kw: must match class 0");
    }
  }
  const int N = cfg.population();
  const int n = cfg.samples();
  std::vector<int> counts;
  double ybar = 0.0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    counts.push_back(cfg.classes[c].count);
    ybar += cfg.classes[c].count * classes[c].ybar;
  }
  ybar /= N;

  // Filter model.
  std::vector<TransitionFamily> ffams;
  std::vector<double> fweights = cfg.filter_weights;
  if (cfg.filter_models.empty()) {
    ffams.push_back(classes[0].family);
  } else {
    std::vector<double> ybars;
    for (const auto& m : cfg.filter_models) {
      BuiltModel b = build_model(m);
      if (!(b.family.state_space() == states)) {
        throw ConfigError("filter.models: state space differs from the simulated classes");
      }
      ybars.push_back(b.ybar);
      ffams.push_back(std::move(b.family));
    }
    if (fweights.empty()) {
      if (ffams.size() == 1) {
        fweights = {1.0};
      } else {
        const double a = two_class_weight(ybar, ybars[0], ybars[1]);
        fweights = {a, 1.0 - a};
        std::ostringstream note;
        note << "filter blend weights from ybar=" << ybar << ": (" << a << ", " << 1.0 - a << ")";
        sum.notes.push_back(note.str());
      }
    }
  }
  if (fweights.empty()) fweights = {1.0};
  const TransitionFamily filter_family =
      ffams.size() == 1 ? ffams[0] : blend_families(ffams, fweights);
  const Matrix P0f = filter_family(0.0);
  const SimplexVector pi0f = invariant_pmf(P0f);

  // Reference and control.
  ReferenceSpec rs = cfg.reference;
  rs.horizon = cfg.horizon;
  rs.step_seconds = cfg.step_seconds;
  const ReferenceSignal ref = make_reference(rs, N * ybar);
  sum.notes.push_back("reference " + ref.provenance);
  PiController ctrl(cfg.gains);
  std::vector<double> zeta_pre;
  if (cfg.control == ControlMode::kPrefilter) {
    const LinearizedModel lin = linearize_mean_field(filter_family, C);
    zeta_pre = mean_field_prefilter(cfg.gains, lin, ref.samples, N);
  }

  // Population and QoS.
  std::vector<SimplexVector> initial;
  for (const auto& c : classes) initial.push_back(c.pi0);
  PopulationState pop = make_population(counts, initial, cfg.seed);
  std::vector<QosSpec> qos_specs;
  for (const auto& c : classes) {
    const double centre = cfg.qos_centering == QosCentering::kClass ? c.ybar : ybar;
    qos_specs.push_back({(C.array() - centre).matrix().transpose(), cfg.qos_beta, cfg.optout_bounds});
  }
  if (cfg.qos_warmup > 0) {
    std::vector<SparseTransitions> nominal;
    for (const auto& c : classes) nominal.push_back(SparseTransitions::From(c.family(0.0)));
    for (int w = 0; w < cfg.qos_warmup; ++w) {
      if (cfg.optout_bounds) apply_optout(pop, cfg.optout_bounds->first, cfg.optout_bounds->second);
      update_qos(pop, qos_specs);
      step_population(pop, nominal, states, cfg.workers);
    }
  }
  const QosSpec joint_qos{(C.array() - ybar).matrix().transpose(), cfg.qos_beta, cfg.optout_bounds};

  const ObservationModel obs{n, C, ybar};
  std::mt19937_64 sampler(rng::derive(cfg.seed, rng::kSampling));

  // Filters.
  FilterOptions opts;
  opts.project = cfg.project;
  if (cfg.inflation) {
    opts.inflation = Inflation{steady_state_cov(P0f, pi0f, N),
                               cfg.inflation_k + cfg.inflation_k_per_load * N, cfg.inflation_b};
  }
  const bool use_joint = cfg.filter == FilterVariant::kJoint || cfg.track_qos;
  PopulationFilterState pf;
  JointFilterState jf;
  std::unique_ptr<ReducedOrderObserver> rf;
  if (cfg.filter == FilterVariant::kPopulation) pf = init_population_filter(pi0f, N);
  if (cfg.filter == FilterVariant::kReduced) {
    rf = std::make_unique<ReducedOrderObserver>(P0f.transpose(), C, cfg.reduced_order, pi0f, N);
  }
  if (use_joint) jf = init_joint_filter(pi0f, N);

  const int T = cfg.horizon;
  for (auto* v : {&tr.aggregate, &tr.observed, &tr.zeta, &tr.reference, &tr.qos_mean, &tr.qos_var,
                  &tr.optout, &tr.estimate, &tr.qos_estimate, &tr.qos_estimate_var,
                  &tr.sigma_trace, &tr.innovation, &tr.sigma_v, &tr.state_error_l1,
                  &tr.prior_error_l1}) {
    v->reserve(T);
  }

  std::vector<SparseTransitions> rows(classes.size());
  for (int t = 0; t < T; ++t) {
    const auto cnt = state_counts(pop, d);
    Vector phi(d);
    for (int k = 0; k < d; ++k) phi(k) = static_cast<double>(cnt[k]) / N;
    const double y = observe(pop, obs, sampler);

    // Measurement update.
    FilterStepInfo info;
    Vector phi_hat;
    double y_hat = 0.0;
    if (use_joint) {
      const FilterStepInfo ji = kf_joint_update(jf, obs, y, N, opts);
      if (cfg.filter == FilterVariant::kJoint) info = ji;
      sum.skipped_updates += ji.skipped;
    }
    switch (cfg.filter) {
      case FilterVariant::kPopulation:
        info = kf_population_update(pf, obs, y, N, opts);
        sum.skipped_updates += info.skipped;
        phi_hat = pf.phi;
        y_hat = C.dot(phi_hat);
        tr.sigma_trace.push_back(pf.sigma.trace());
        break;
      case FilterVariant::kJoint:
        phi_hat = jf.population();
        y_hat = C.dot(phi_hat);
        tr.sigma_trace.push_back(jf.sigma.block(d, d, d, d).trace());
        break;
      case FilterVariant::kReduced:
        info = rf->update(obs, y, N);
        sum.skipped_updates += info.skipped;
        phi_hat = rf->estimate();
        y_hat = rf->output();
        tr.sigma_trace.push_back(kNaN);
        break;
    }

    // Control.
    double zeta = 0.0;
    switch (cfg.control) {
      case ControlMode::kFiltered:
        zeta = ctrl.step(tracking_error(ref.samples[t], y_hat, ybar, N));
        break;
      case ControlMode::kRaw:
        zeta = ctrl.step(tracking_error(ref.samples[t], y, ybar, N));
        break;
      case ControlMode::kPrefilter:
        zeta = zeta_pre[t];
        break;
      case ControlMode::kNone:
        break;
    }

    const int forced = cfg.optout_bounds
                           ? apply_optout(pop, cfg.optout_bounds->first, cfg.optout_bounds->second)
                           : 0;
    const QosStats qs = qos_population_stats(pop);

    tr.aggregate.push_back(N * C.dot(phi));
    tr.observed.push_back(y);
    tr.zeta.push_back(zeta);
    tr.reference.push_back(ref.samples[t]);
    tr.qos_mean.push_back(qs.mean);
    tr.qos_var.push_back(qs.variance);
    tr.optout.push_back(static_cast<double>(forced) / N);
    tr.estimate.push_back(y_hat);
    tr.qos_estimate.push_back(use_joint ? jf.qos_mean() : kNaN);
    tr.qos_estimate_var.push_back(use_joint ? jf.qos_var() : kNaN);
    tr.innovation.push_back(info.innovation);
    tr.sigma_v.push_back(info.sigma_v);
    tr.state_error_l1.push_back((phi_hat - phi).lpNorm<1>());
    tr.prior_error_l1.push_back((pi0f.vector() - phi).lpNorm<1>());

    // Dynamics: QoS accumulates from X_t, then X_t -> X_{t+1} under zeta_t.
    update_qos(pop, qos_specs);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      rows[c] = SparseTransitions::From(classes[c].family(zeta));
    }
    step_population(pop, rows, states, cfg.workers);

    // Time update with A_t.
    if (t + 1 < T) {
      const StateTransition trans = filter_transition(ffams, fweights, zeta);
      const double lhat = use_joint ? jf.qos_mean() : 0.0;
      if (use_joint) kf_joint_predict(jf, trans, joint_qos, N, opts);
      if (cfg.filter == FilterVariant::kPopulation) kf_population_predict(pf, trans, N, opts, lhat);
      if (cfg.filter == FilterVariant::kReduced) rf->predict(trans, N, opts, lhat);
    }
  }

  // Summary.
  sum.name = cfg.name;
  sum.N = N;
  sum.n = n;
  sum.horizon = T;
  sum.burn_in = cfg.burn_in;
  sum.seed = cfg.seed;
  sum.ybar = ybar;
  {
    std::vector<double> yd, rr;
    for (int t = cfg.burn_in; t < T; ++t) {
      yd.push_back(tr.aggregate[t] - N * ybar);
      rr.push_back(tr.reference[t]);
    }
    sum.normalized_rms = normalized_error_rms(yd, rr);
  }
  if (use_joint) {
    double e2 = 0.0, sd = 0.0, v2 = 0.0, ve2 = 0.0;
    const int m = T - cfg.burn_in;
    for (int t = cfg.burn_in; t < T; ++t) {
      e2 += std::pow(tr.qos_estimate[t] - tr.qos_mean[t], 2);
      sd += std::sqrt(tr.qos_var[t]);
      v2 += tr.qos_var[t] * tr.qos_var[t];
      ve2 += std::pow(tr.qos_estimate_var[t] - tr.qos_var[t], 2);
    }
    sum.qos_mean_rel_error = std::sqrt(e2 / m) / (sd / m);
    sum.qos_var_rel_error = std::sqrt(ve2 / v2);
  } else {
    sum.qos_mean_rel_error = kNaN;
    sum.qos_var_rel_error = kNaN;
  }
  sum.max_optout = *std::max_element(tr.optout.begin(), tr.optout.end());
  sum.mean_optout = mean_of(tr.optout, 0);
  sum.mean_state_error_l1 = mean_of(tr.state_error_l1, cfg.burn_in);
  sum.mean_prior_error_l1 = mean_of(tr.prior_error_l1, cfg.burn_in);
  sum.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

  res.final_state_counts = state_counts(pop, d);
  res.state_labels = states.labels();
  res.final_qos = pop.qos;
  return res;
}

std::string format_summary(const ScenarioSummary& s) {
  std::ostringstream o;
  o.precision(6);
  o << "scenario            " << s.name << '\n'
    << "N                   " << s.N << '\n'
    << "n                   " << s.n << '\n'
    << "horizon             " << s.horizon << '\n'
    << "burn_in             " << s.burn_in << '\n'
    << "seed                " << s.seed << '\n'
    << "ybar_kw             " << s.ybar << '\n'
    << "normalized_rms      " << s.normalized_rms << '\n'
    << "qos_mean_rel_error  " << s.qos_mean_rel_error << '\n'
    << "qos_var_rel_error   " << s.qos_var_rel_error << '\n'
    << "max_optout          " << s.max_optout << '\n'
    << "mean_optout         " << s.mean_optout << '\n'
    << "state_error_l1      " << s.mean_state_error_l1 << '\n'
    << "prior_error_l1      " << s.mean_prior_error_l1 << '\n'
    << "skipped_updates     " << s.skipped_updates << '\n'
    << "wall_seconds        " << s.wall_seconds << '\n';
  for (const auto& n : s.notes) o << "note                " << n << '\n';
  return o.str();
}

void write_outputs(const ScenarioResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const auto path = [&](const char* f) { return (std::filesystem::path(dir) / f).string(); };
  using csv::format;
  {
    std::ofstream o(path("trajectory.csv"));
    if (!o) throw std::runtime_error("cannot write " + path("trajectory.csv"));
    o << "t,aggregate_kw,observed_kw,zeta,qos_mean,qos_var,optout_fraction,reference_kw\n";
    const auto& t = r.trace;
    for (std::size_t k = 0; k < t.aggregate.size(); ++k) {
      o << k << ',' << format(t.aggregate[k]) << ',' << format(t.observed[k]) << ','
        << format(t.zeta[k]) << ',' << format(t.qos_mean[k]) << ',' << format(t.qos_var[k]) << ','
        << format(t.optout[k]) << ',' << format(t.reference[k]) << '\n';
    }
  }
  {
    std::ofstream o(path("filter.csv"));
    if (!o) throw std::runtime_error("cannot write " + path("filter.csv"));
    o << "t,observed_kw,estimate_kw,qos_estimate,qos_estimate_var,sigma_trace,innovation,sigma_v\n";
    const auto& t = r.trace;
    for (std::size_t k = 0; k < t.aggregate.size(); ++k) {
      o << k << ',' << format(t.observed[k]) << ',' << format(t.estimate[k]) << ','
        << format(t.qos_estimate[k]) << ',' << format(t.qos_estimate_var[k]) << ','
        << format(t.sigma_trace[k]) << ',' << format(t.innovation[k]) << ','
        << format(t.sigma_v[k]) << '\n';
    }
  }
  {
    std::ofstream o(path("summary.txt"));
    o << format_summary(r.summary);
  }
  {
    std::ofstream o(path("config.json"));
    o << to_json(r.config) << '\n';
  }
  csv::write_state_histogram(path("state_histogram.csv"), r.final_state_counts, r.state_labels);
  csv::write_value_histogram(path("qos_histogram.csv"), r.final_qos, 50);
}

std::vector<SweepRow> sweep(const ScenarioConfig& base, SweepAxis axis,
                            const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep.values: at least one value required");
  const int N0 = base.population();
  const double frac0 = static_cast<double>(base.samples()) / N0;
  std::vector<SweepRow> out;
  for (double v : values) {
    ScenarioConfig cfg = base;
    cfg.fraction.reset();
    if (axis == SweepAxis::kPopulation) {
      const int N = static_cast<int>(std::lround(v));
      if (N < static_cast<int>(cfg.classes.size()) || N < 2) {
        throw ConfigError("sweep.values: population too small for the class count");
      }
      std::vector<int> counts;
      for (const auto& c : cfg.classes) counts.push_back(c.count);
      counts = scale_counts(counts, N);
      for (std::size_t c = 0; c < counts.size(); ++c) cfg.classes[c].count = counts[c];
      cfg.n = std::max(1, static_cast<int>(std::lround(frac0 * N)));
    } else {
      if (!(v > 0.0 && v <= 1.0)) throw ConfigError("sweep.values: fractions must lie in (0, 1]");
      cfg.n = std::max(1, static_cast<int>(std::lround(v * N0)));
    }
    const ScenarioResult r = run_scenario(cfg);
    out.push_back({v, r.summary.N, r.summary.n, r.summary.normalized_rms});
  }
  return out;
}

void write_sweep(const std::vector<SweepRow>& rows, SweepAxis axis, const std::string& path) {
  std::ofstream o(path);
  if (!o) throw std::runtime_error("cannot write " + path);
  o << (axis == SweepAxis::kPopulation ? "N_value" : "fraction") << ",N,n,normalized_rms\n";
  for (const auto& r : rows) {
    o << csv::format(r.value) << ',' << r.N << ',' << r.n << ',' << csv::format(r.normalized_rms)
      << '\n';
  }
}

}  // namespace meanfield
