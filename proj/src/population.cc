#include "meanfield/population.h"

#include <algorithm>
#include <cmath>
#include <thread>
#include <unordered_set>

#include "meanfield/rng.h"

namespace meanfield {

namespace {

int sample_cdf(const Vector& pmf, double u) {
  double acc = 0.0;
  const int d = static_cast<int>(pmf.size());
  int last_positive = 0;
  for (int k = 0; k < d; ++k) {
    if (pmf(k) <= 0.0) continue;
    acc += pmf(k);
    last_positive = k;
    if (u <= acc) return k;
  }
  return last_positive;
}

template <typename Body>
void parallel_for(int n, int workers, Body&& body) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int first = static_cast<int>(static_cast<std::int64_t>(n) * w / workers);
    const int last = static_cast<int>(static_cast<std::int64_t>(n) * (w + 1) / workers);
    threads.emplace_back([&body, first, last] { body(first, last); });
  }
  for (auto& t : threads) t.join();
}

}  // namespace

PopulationState make_population(std::span<const int> class_counts,
                                std::span<const SimplexVector> initial, std::uint64_t seed) {
  if (class_counts.size() != initial.size()) {
    throw std::invalid_argument("make_population: one initial pmf per class required");
  }
  PopulationState pop;
  pop.seed = seed;
  const std::uint64_t s = rng::derive(seed, rng::kInitialStates);
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    if (class_counts[c] < 0) throw std::invalid_argument("make_population: negative class count");
    for (int j = 0; j < class_counts[c]; ++j) {
      const auto i = static_cast<std::uint64_t>(pop.states.size());
      pop.states.push_back(sample_cdf(initial[c].vector(), rng::uniform(s, i, 0)));
      pop.classes.push_back(static_cast<int>(c));
    }
  }
  if (pop.states.empty()) throw std::invalid_argument("make_population: empty population");
  pop.qos.assign(pop.states.size(), 0.0);
  pop.forcing.assign(pop.states.size(), Forcing::kNone);
  return pop;
}

// --- sparse rows ------------------------------------------------------------

SparseTransitions SparseTransitions::From(const Matrix& P) {
  SparseTransitions s;
  const int d = static_cast<int>(P.rows());
  s.offsets.reserve(d + 1);
  s.offsets.push_back(0);
  for (int i = 0; i < d; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      const double p = P(i, j);
      if (p > 0.0) {
        acc += p;
        s.targets.push_back(j);
        s.prob.push_back(p);
        s.cdf.push_back(acc);
      }
    }
    s.offsets.push_back(static_cast<int>(s.targets.size()));
  }
  return s;
}

int SparseTransitions::sample(int from, double u) const {
  const int b = offsets[from];
  const int e = offsets[from + 1];
  for (int k = b; k < e; ++k) {
    if (u <= cdf[k]) return targets[k];
  }
  return targets[e - 1];
}

int SparseTransitions::sample_in_mode(int from, double u, const StateSpace& states, Mode m) const {
  const int b = offsets[from];
  const int e = offsets[from + 1];
  double mass = 0.0;
  for (int k = b; k < e; ++k) {
    if (states.mode(targets[k]) == m) mass += prob[k];
  }
  if (!(mass > 0.0)) return -1;
  const double threshold = u * mass;
  double acc = 0.0;
  int last = -1;
  for (int k = b; k < e; ++k) {
    if (states.mode(targets[k]) != m) continue;
    acc += prob[k];
    last = targets[k];
    if (threshold <= acc) return last;
  }
  return last;
}

// --- stepping ---------------------------------------------------------------

void step_population(PopulationState& pop, std::span<const SparseTransitions> rows,
                     const StateSpace& states, int workers) {
  const std::uint64_t s = rng::derive(pop.seed, rng::kTransitions);
  const auto t = static_cast<std::uint64_t>(pop.t);
  parallel_for(pop.size(), workers, [&](int first, int last) {
    for (int i = first; i < last; ++i) {
      const double u = rng::uniform(s, static_cast<std::uint64_t>(i), t);
      const auto& row = rows[pop.classes[i]];
      const int from = pop.states[i];
      int to = from;
      switch (pop.forcing[i]) {
        case Forcing::kNone:
          to = row.sample(from, u);
          break;
        case Forcing::kForceOn:
        case Forcing::kForceOff: {
          const Mode m = pop.forcing[i] == Forcing::kForceOn ? Mode::kOn : Mode::kOff;
          to = row.sample_in_mode(from, u, states, m);
          if (to < 0) to = states.entry_state(m);
          break;
        }
      }
      pop.states[i] = to;
      pop.forcing[i] = Forcing::kNone;
    }
  });
  ++pop.t;
}

void step_population(PopulationState& pop, std::span<const TransitionFamily> families, double zeta,
                     int workers) {
  if (families.empty()) throw std::invalid_argument("step_population: no families");
  std::vector<SparseTransitions> rows;
  rows.reserve(families.size());
  for (const auto& f : families) rows.push_back(SparseTransitions::From(f(zeta)));
  step_population(pop, rows, families[0].state_space(), workers);
}

// --- aggregates -------------------------------------------------------------

std::vector<std::int64_t> state_counts(const PopulationState& pop, int d) {
  std::vector<std::int64_t> counts(d, 0);
  for (int s : pop.states) ++counts.at(s);
  return counts;
}

SimplexVector empirical_distribution(const PopulationState& pop, int d) {
  const auto counts = state_counts(pop, d);
  Vector phi(d);
  const double n = pop.size();
  for (int k = 0; k < d; ++k) phi(k) = static_cast<double>(counts[k]) / n;
  return SimplexVector(phi);
}

SimplexVector class_distribution(const PopulationState& pop, int d, int cls) {
  Vector phi = Vector::Zero(d);
  int n = 0;
  for (int i = 0; i < pop.size(); ++i) {
    if (pop.classes[i] == cls) {
      phi(pop.states[i]) += 1.0;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("class_distribution: empty class");
  return SimplexVector(phi / n);
}

double observe(const PopulationState& pop, const ObservationModel& obs, std::mt19937_64& rng) {
  const int N = pop.size();
  if (obs.n < 1 || obs.n > N) throw std::invalid_argument("observe: need 1 <= n <= N");
  double total = 0.0;
  if (obs.n == N) {
    for (int s : pop.states) total += obs.C(s);
    return total / N;
  }
  // Floyd's algorithm: n distinct indices, uniformly.
  std::unordered_set<int> chosen;
  chosen.reserve(static_cast<std::size_t>(obs.n) * 2);
  for (int j = N - obs.n; j < N; ++j) {
    std::uniform_int_distribution<int> pick(0, j);
    const int k = pick(rng);
    const int idx = chosen.insert(k).second ? k : j;
    if (idx == j) chosen.insert(j);
    total += obs.C(pop.states[idx]);
  }
  return total / obs.n;
}

// --- QoS --------------------------------------------------------------------

double QosSpec::centering_error(const SimplexVector& pi) const {
  return std::abs(pi.vector().dot(ell));
}

void update_qos(PopulationState& pop, std::span<const QosSpec> per_class) {
  for (int i = 0; i < pop.size(); ++i) {
    const auto& spec = per_class[pop.classes[i]];
    pop.qos[i] = spec.beta * pop.qos[i] + spec.ell(pop.states[i]);
  }
}

void update_qos(PopulationState& pop, const QosSpec& spec) {
  for (int i = 0; i < pop.size(); ++i) {
    pop.qos[i] = spec.beta * pop.qos[i] + spec.ell(pop.states[i]);
  }
}

int apply_optout(PopulationState& pop, double lmin, double lmax) {
  if (!(lmin < lmax)) throw std::invalid_argument("apply_optout: need Lmin < Lmax");
  int forced = 0;
  for (int i = 0; i < pop.size(); ++i) {
    if (pop.qos[i] >= lmax) {
      pop.forcing[i] = Forcing::kForceOff;
      ++forced;
    } else if (pop.qos[i] <= lmin) {
      pop.forcing[i] = Forcing::kForceOn;
      ++forced;
    } else {
      pop.forcing[i] = Forcing::kNone;
    }
  }
  return forced;
}

double optout_fraction(const PopulationState& pop) {
  const auto forced = std::count_if(pop.forcing.begin(), pop.forcing.end(),
                                    [](Forcing f) { return f != Forcing::kNone; });
  return static_cast<double>(forced) / pop.size();
}

namespace {

QosStats stats_of(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("QoS statistics need at least 2 loads");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, ss / static_cast<double>(x.size() - 1)};
}

}  // namespace

QosStats qos_population_stats(const PopulationState& pop) { return stats_of(pop.qos); }

QosStats qos_class_stats(const PopulationState& pop, int cls) {
  std::vector<double> x;
  for (int i = 0; i < pop.size(); ++i) {
    if (pop.classes[i] == cls) x.push_back(pop.qos[i]);
  }
  return stats_of(x);
}

// --- martingale check -------------------------------------------------------

MartingaleCheck martingale_noise_check(const TransitionFamily& family, const PopulationState& pop,
                                       const ObservationModel& obs, double zeta, int trials,
                                       std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("martingale_noise_check: trials must be >= 1");
  const int d = family.dim();
  const int N = pop.size();
  const Matrix P = family(zeta);
  const auto rows = SparseTransitions::From(P);
  const Vector phi = empirical_distribution(pop, d).vector();
  const Vector mean_next = P.transpose() * phi;
  const double cphi = obs.C.dot(phi);

  Vector sum = Vector::Zero(d);
  Vector sumsq = Vector::Zero(d);
  double vsum = 0.0, vsumsq = 0.0, vmax = 0.0;
  std::mt19937_64 sampler(rng::derive(seed, rng::kSampling));
  const std::uint64_t s = rng::derive(seed, rng::kTrials);
  Vector next(d);
  for (int r = 0; r < trials; ++r) {
    next.setZero();
    for (int i = 0; i < N; ++i) {
      const double u = rng::uniform(s, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(r));
      next(rows.sample(pop.states[i], u)) += 1.0;
    }
    const Vector w = next / N - mean_next;
    sum += w;
    sumsq += w.cwiseProduct(w);
    const double v = observe(pop, obs, sampler) - cphi;
    vsum += v;
    vsumsq += v * v;
    vmax = std::max(vmax, std::abs(v));
  }
  MartingaleCheck out;
  const double T = trials;
  for (int k = 0; k < d; ++k) {
    const double m = sum(k) / T;
    const double var = std::max(0.0, sumsq(k) / T - m * m);
    const double se = std::sqrt(var / T);
    out.w_max_abs_mean = std::max(out.w_max_abs_mean, std::abs(m));
    if (se > 0.0) {
      out.w_max_z = std::max(out.w_max_z, std::abs(m) / se);
    } else if (std::abs(m) > 1e-12) {
      out.w_max_z = std::numeric_limits<double>::infinity();
    }
  }
  const double vm = vsum / T;
  const double vse = std::sqrt(std::max(0.0, vsumsq / T - vm * vm) / T);
  out.v_abs_mean = std::abs(vm);
  out.v_z = vse > 0.0 ? std::abs(vm) / vse : (std::abs(vm) > 1e-12 ? INFINITY : 0.0);
  out.v_max_abs = vmax;
  return out;
}

}  // namespace meanfield
