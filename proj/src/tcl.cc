#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <thread>

#include "meanfield/markov.h"
#include "meanfield/rng.h"

namespace meanfield {

double TclParams::a() const {
  const double tau_hours = tau_seconds / 3600.0;
  return std::exp(-tau_hours / (capacitance * resistance));
}

void TclParams::validate() const {
  if (!(theta_min < theta_max)) throw std::invalid_argument("TCL: dead-band must satisfy min < max");
  if (!(tau_seconds > 0.0 && resistance > 0.0 && capacitance > 0.0)) {
    throw std::invalid_argument("TCL: tau, R and C must be positive");
  }
  if (!(noise_var >= 0.0)) throw std::invalid_argument("TCL: noise variance must be >= 0");
  const double alpha = a();
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("TCL: a must lie in (0, 1)");
}

TclState tcl_step(const TclParams& p, const TclState& s, double noise) {
  const double a = p.a();
  const double m = s.mode == Mode::kOn ? 1.0 : 0.0;
  TclState next{};
  next.theta = a * s.theta + (1.0 - a) * (p.ambient - m * p.resistance * p.transfer_rate) + noise;
  if (next.theta < p.theta_min) {
    next.mode = Mode::kOff;
  } else if (next.theta > p.theta_max) {
    next.mode = Mode::kOn;
  } else {
    next.mode = s.mode;
  }
  return next;
}

int tcl_bin(const TclParams& p, int bins, double theta) {
  const double u = (theta - p.theta_min) / (p.theta_max - p.theta_min);
  const int b = static_cast<int>(std::floor(u * bins));
  return std::clamp(b, 0, bins - 1);
}

double tcl_state_transform(double theta, Mode mode, double theta_min, double theta_max) {
  return mode == Mode::kOff ? theta : theta_min + theta_max - theta;
}

namespace {

int tcl_index(Mode m, int bin, int bins) { return m == Mode::kOn ? bin : bins + bin; }

using Counts = std::vector<std::int64_t>;

void simulate_loads(const TclParams& p, const TclIdentification& id, int first, int last,
                    Counts& counts) {
  const int bins = id.bins;
  const int d = 2 * bins;
  const double sd = std::sqrt(p.noise_var);
  for (int i = first; i < last; ++i) {
    std::mt19937_64 eng(rng::key(rng::derive(id.seed, rng::kTcl), static_cast<std::uint64_t>(i), 0));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    TclState s{};
    if (id.initial_temperature) {
      s = {*id.initial_temperature, Mode::kOff};
    } else {
      s.theta = p.theta_min + (p.theta_max - p.theta_min) * unif(eng);
      s.mode = unif(eng) < 0.5 ? Mode::kOn : Mode::kOff;
    }
    int from = tcl_index(s.mode, tcl_bin(p, bins, s.theta), bins);
    for (int t = 0; t < id.mc_steps; ++t) {
      const double eta = sd > 0.0 ? sd * noise(eng) : 0.0;
      s = tcl_step(p, s, eta);
      const int to = tcl_index(s.mode, tcl_bin(p, bins, s.theta), bins);
      ++counts[static_cast<std::size_t>(from) * d + to];
      from = to;
    }
  }
}

}  // namespace

TclModel build_tcl_model(const TclParams& params, const TclIdentification& id) {
  params.validate();
  if (id.bins < 2) throw std::invalid_argument("TCL: bins must be >= 2");
  if (id.mc_loads < 1 || id.mc_steps < 1) {
    throw std::invalid_argument("TCL: mc_loads and mc_steps must be >= 1");
  }
  const int bins = id.bins;
  const int d = 2 * bins;
  const int workers = std::max(1, std::min(id.workers, id.mc_loads));

  // Integer counts per worker, summed afterwards: independent of worker count.
  std::vector<Counts> partial(workers, Counts(static_cast<std::size_t>(d) * d, 0));
  if (workers == 1) {
    simulate_loads(params, id, 0, id.mc_loads, partial[0]);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      const int first = static_cast<int>(static_cast<std::int64_t>(id.mc_loads) * w / workers);
      const int last = static_cast<int>(static_cast<std::int64_t>(id.mc_loads) * (w + 1) / workers);
      pool.emplace_back(simulate_loads, std::cref(params), std::cref(id), first, last,
                        std::ref(partial[w]));
    }
    for (auto& t : pool) t.join();
  }

  Matrix joint = Matrix::Zero(d, d);
  double total = 0.0;
  for (const auto& c : partial) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) joint(j, k) += static_cast<double>(c[static_cast<std::size_t>(j) * d + k]);
    }
  }
  total = joint.sum();
  joint /= total;

  TclModel model{constant_family(StateSpace::Tcl(bins), Matrix::Identity(d, d)),
                 StateSpace::Tcl(bins), joint, {}};
  Matrix P(d, d);
  for (int j = 0; j < d; ++j) {
    const double pij = joint.row(j).sum();
    if (pij > 0.0) {
      P.row(j) = joint.row(j) / pij;
      P.row(j) /= P.row(j).sum();
    } else {
      std::cerr << "tcl: state " << j << " (" << model.states.label(j)
                << ") never visited; patched with a self-loop\n";
      P.row(j).setZero();
      P(j, j) = 1.0;
      model.unvisited.push_back(j);
    }
  }
  model.family = constant_family(model.states, std::move(P));
  return model;
}

}  // namespace meanfield
