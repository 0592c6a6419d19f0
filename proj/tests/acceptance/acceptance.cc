// Acceptance gate: one [PASS]/[FAIL] line per criterion with its measured
// value and pinned tolerance. Exit status is nonzero if any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "meanfield/analysis.h"
#include "meanfield/config.h"
#include "meanfield/control.h"
#include "meanfield/filtering.h"
#include "meanfield/markov.h"
#include "meanfield/population.h"
#include "meanfield/rng.h"
#include "meanfield/scenario.h"
#include "oracles.h"

namespace mf = meanfield;
using mf::Matrix;
using mf::RowVector;
using mf::Vector;

namespace {

int g_failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<int> random_states(int N, int d, std::mt19937_64& rng) {
  const Vector pmf = oracle::random_simplex(d, rng);
  std::discrete_distribution<int> pick(pmf.data(), pmf.data() + d);
  std::vector<int> s(N);
  for (int& x : s) x = pick(rng);
  return s;
}

// --- 1. covariance formulas ---------------------------------------------

void criterion1() {
  const mf::TransitionFamily family = mf::build_pool_model({});
  const int d = family.dim(), N = 100;
  constexpr int kTrials = 100000;
  std::mt19937_64 rng(101);
  const std::vector<int> states = random_states(N, d, rng);
  Vector phi = Vector::Zero(d);
  for (int s : states) phi(s) += 1.0 / N;
  const double zeta = 0.37;
  const Matrix P = family(zeta);
  const Matrix A = P.transpose();
  const mf::SparseTransitions rows = mf::SparseTransitions::From(P);
  const Vector mean = A * phi;

  Matrix sum = Matrix::Zero(d, d), sumsq = Matrix::Zero(d, d);
  Vector next(d);
  const std::uint64_t seed = mf::rng::derive(102, mf::rng::kTrials);
  for (int r = 0; r < kTrials; ++r) {
    next.setZero();
    for (int i = 0; i < N; ++i) {
      next(rows.sample(states[i], mf::rng::uniform(seed, i, r))) += 1.0;
    }
    const Vector w = next / N - mean;
    const Matrix outer = w * w.transpose();
    sum += outer;
    sumsq += outer.cwiseProduct(outer);
  }
  const Matrix exact = mf::conditional_state_noise_cov(A, phi, N).sigma_w;
  double max_z = 0.0, max_zero_dev = 0.0, sum_z2 = 0.0;
  int tested = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double m = sum(i, j) / kTrials;
      const double var = std::max(0.0, sumsq(i, j) / kTrials - m * m);
      const double se = std::sqrt(var / kTrials);
      if (se > 0.0) {
        const double z = std::abs(m - exact(i, j)) / se;
        max_z = std::max(max_z, z);
        sum_z2 += z * z;
        ++tested;
      } else {
        max_zero_dev = std::max(max_zero_dev, std::abs(m - exact(i, j)));
      }
    }
  }
  report("C1a state-noise covariance vs 1e5-trial Monte Carlo (pool-96)", max_z < 4.0 && max_zero_dev < 1e-15,
         fmt("max |emp - formula| / se = %.3f over %.0f random entries (tol 4 se), mean z^2 = %.3f",
             max_z, tested, sum_z2 / tested) +
             fmt("; deterministic entries dev %.1e", max_zero_dev));

  double worst = 0.0;
  int cases = 0;
  for (int Npop : {5, 6, 8}) {
    for (int rep = 0; rep < 5; ++rep) {
      const std::vector<int> st = random_states(Npop, d, rng);
      const RowVector C = rep % 2 == 0 ? family.state_space().indicator(mf::Mode::kOn)
                                       : RowVector(RowVector::Random(d).cwiseAbs());
      Vector p = Vector::Zero(d);
      std::vector<double> values;
      for (int s : st) {
        p(s) += 1.0 / Npop;
        values.push_back(C(s));
      }
      const Matrix si = mf::individual_covariance(p);
      const Matrix zero = Matrix::Zero(d, d);
      for (int n = 1; n <= Npop; ++n) {
        const double exact_var = oracle::subset_mean_variance(values, n);
        const double got = mf::conditional_obs_variance(C, si, zero, n, Npop);
        // A constant sample has zero variance on both routes.
        const double rel = exact_var == 0.0 ? std::abs(got) : std::abs(got - exact_var) / exact_var;
        worst = std::max(worst, rel);
        ++cases;
      }
    }
  }
  report("C1b observation variance vs exhaustive subset enumeration (N in {5,6,8}, all n)", worst < 1e-12,
         fmt("max relative error %.2e over %.0f cases (tol 1e-12)", worst, cases));
}

// --- 2. symmetric models -------------------------------------------------

void criterion2() {
  const Matrix A8 = oracle::symmetric_eight_state();
  const RowVector C8{{1, 1, 1, 1, 0, 0, 0, 0}};
  const mf::SymmetryReport s8 = mf::symmetry_check(A8, C8);
  report("C2a 8-state symmetric example: V0 response and rank",
         s8.is_symmetric_form && s8.max_response < 1e-9 && s8.observability.numerical_rank <= 5,
         fmt("max_k |C A^k v| = %.2e (tol 1e-9), rank %.0f (bound 5), dim V0 = %.0f", s8.max_response,
             s8.observability.numerical_rank, static_cast<double>(s8.v0_basis.cols())));

  const mf::TransitionFamily pool = mf::build_pool_model({});
  const mf::SymmetryReport sp =
      mf::symmetry_check(pool(0.0).transpose(), pool.state_space().indicator(mf::Mode::kOn));
  report("C2b pool-96 (12 h duty): V0 response and rank",
         sp.is_symmetric_form && sp.max_response < 1e-9 && sp.observability.numerical_rank <= 49,
         fmt("max_k |C A^k v| = %.2e (tol 1e-9), rank %.0f (bound 49), dim V0 = %.0f", sp.max_response,
             sp.observability.numerical_rank, static_cast<double>(sp.v0_basis.cols())));
}

// --- 3. Grammian identity ------------------------------------------------

void criterion3() {
  std::mt19937_64 rng(301);
  std::uniform_int_distribution<int> dim(2, 20), horizon(2, 200);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = dim(rng), T = horizon(rng);
    std::vector<Matrix> seq;
    for (int t = 0; t + 1 < T; ++t) seq.push_back(oracle::random_stochastic(d, rng).transpose());
    const RowVector C = RowVector::Random(d);
    const mf::Grammian g = mf::observability_grammian(seq, C, T);
    for (int rep = 0; rep < 5; ++rep) {
      const Vector x = Vector::Random(d);
      double energy = 0.0;
      for (double y : oracle::simulate_outputs(seq, C, x, T)) energy += y * y;
      worst = std::max(worst, std::abs(x.dot(g.G * x) - energy) / energy);
    }
  }
  report("C3 Grammian quadratic form = output energy (20 random LTV, d <= 20, T <= 200)", worst < 1e-8,
         fmt("max relative error %.2e (tol 1e-8)", worst));
}

// --- 4. Kalman filter oracle ---------------------------------------------

void criterion4() {
  const int d = 4, N = 200, n = 20, T = 100;
  std::vector<mf::StateLabel> labels{{mf::Mode::kOn, 1}, {mf::Mode::kOn, 2}, {mf::Mode::kOff, 1}, {mf::Mode::kOff, 2}};
  const mf::StateSpace space(labels);
  mf::ObservationModel obs;
  obs.n = n;
  obs.C = space.indicator(mf::Mode::kOn);
  double worst = 0.0;
  for (std::uint64_t seed = 401; seed < 411; ++seed) {
    std::mt19937_64 rng(seed);
    const std::vector<int> counts{N};
    const std::vector<mf::SimplexVector> init{mf::SimplexVector::Uniform(d)};
    mf::PopulationState pop = mf::make_population(counts, init, seed);
    const mf::SimplexVector pi0 = mf::SimplexVector::Uniform(d);
    mf::PopulationFilterState fs = mf::init_population_filter(pi0, N);
    oracle::TextbookKf kf{pi0.vector(), mf::individual_covariance(pi0.vector()) / N};
    mf::FilterOptions opt;
    opt.project = false;
    for (int t = 0; t < T; ++t) {
      const Matrix P = oracle::random_stochastic(d, rng);
      const std::vector<mf::TransitionFamily> fams{mf::constant_family(space, P)};
      mf::step_population(pop, fams, 0.0);
      const double y = mf::observe(pop, obs, rng);
      const Matrix A = P.transpose();
      const Matrix Q = mf::conditional_state_noise_cov(A, mf::project_to_simplex(kf.x), N).sigma_w;
      const Matrix Pp = A * kf.P * A.transpose() + Q;
      const double r = mf::conditional_obs_variance(
          obs.C, mf::individual_covariance(mf::project_to_simplex(A * kf.x)), Pp, n, N);
      kf.step(A, Q, obs.C, r, y);
      mf::kf_population_step(fs, mf::StateTransition::Homogeneous(A), obs, y, N, opt);
      worst = std::max({worst, (fs.phi - kf.x).cwiseAbs().maxCoeff(), (fs.sigma - kf.P).cwiseAbs().maxCoeff()});
    }
  }
  report("C4 kf_population_step vs textbook Kalman recursion (d=4, T=100, 10 instances, no projection)",
         worst < 1e-10, fmt("max abs deviation %.2e (tol 1e-10)", worst));
}

// --- 5-7. scenarios ------------------------------------------------------

mf::ScenarioSummary run(mf::ScenarioConfig cfg) { return mf::run_scenario(cfg).summary; }

void criterion5() {
  const mf::ScenarioSummary s = run(mf::preset("fig5"));
  report("C5a QoS mean estimate (N=1e4, n=10, joint filter, prefiltered zeta)", s.qos_mean_rel_error < 0.15,
         fmt("RMS(L_hat - mean) / mean sd = %.4f (tol 0.15)", s.qos_mean_rel_error));
  report("C5b QoS variance estimate", s.qos_var_rel_error < 0.3,
         fmt("relative RMS error %.4f (tol 0.3)", s.qos_var_rel_error));
}

void criterion6() {
  mf::ScenarioConfig full = mf::preset("tracking");
  full.n = full.population();
  const double e_full = run(full).normalized_rms;
  report("C6a closed-loop tracking with n=N (N=1e4, 20% reference, PI(50, 1.5))", e_full < 0.05,
         fmt("normalized RMS %.4f (tol 0.05)", e_full));

  const double e_filtered = run(mf::preset("tracking")).normalized_rms;
  const double e_raw = run(mf::preset("tracking-raw")).normalized_rms;
  report("C6b filtered-error mode beats raw-measurement mode at n=10", e_filtered < e_raw,
         fmt("filtered %.4f < raw %.4f", e_filtered, e_raw));

  const std::vector<double> fractions{0.001, 0.01, 0.1, 1.0};
  std::vector<double> mean(fractions.size(), 0.0);
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  for (std::uint64_t seed : seeds) {
    mf::ScenarioConfig base = mf::preset("tracking");
    base.seed = seed;
    const auto rows = mf::sweep(base, mf::SweepAxis::kFraction, fractions);
    for (std::size_t k = 0; k < rows.size(); ++k) mean[k] += rows[k].normalized_rms / seeds.size();
  }
  bool monotone = true;
  for (std::size_t k = 1; k < mean.size(); ++k) monotone = monotone && mean[k] <= mean[k - 1];
  std::string detail = "mean normalized RMS over seeds 1-3 at 0.1%, 1%, 10%, 100%:";
  for (double m : mean) detail += fmt(" %.4f", m);
  report("C6c error non-increasing in sampling fraction", monotone, detail);
}

void criterion7() {
  const mf::ScenarioSummary s = run(mf::preset("optout"));
  report("C7a opt-out fraction (N=3e4, bounds +-50, k=N/100, b=300, 0.1% sampling)", s.max_optout < 0.02,
         fmt("max opt-out fraction %.4f, mean %.4f (tol 0.02)", s.max_optout, s.mean_optout));
  report("C7b tracking under opt-out", s.normalized_rms < 0.2,
         fmt("normalized RMS %.4f (tol 0.2)", s.normalized_rms));
}

// --- 8. invariants -------------------------------------------------------

void criterion8() {
  std::mt19937_64 rng(801);
  const mf::TransitionFamily pool = mf::build_pool_model({});
  const int d = pool.dim();

  // Covariance algebra on random chains and points of the simplex.
  double psd = 0.0, ones = 0.0, scale = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int dd = trial % 2 == 0 ? 2 + trial % 17 : d;
    const Matrix A = dd == d ? Matrix(pool(std::normal_distribution<double>(0, 1)(rng)).transpose())
                             : Matrix(oracle::random_stochastic(dd, rng).transpose());
    const Vector phi = oracle::random_simplex(dd, rng);
    const int N = 2 + trial * 13;
    const mf::NoiseCovariances nc = mf::conditional_state_noise_cov(A, phi, N);
    psd = std::min(psd, mf::min_eigenvalue(nc.sigma_wi));
    ones = std::max(ones, (nc.sigma_w * Vector::Ones(dd)).cwiseAbs().maxCoeff());
    scale = std::max(scale, (nc.sigma_wi - N * nc.sigma_w).cwiseAbs().maxCoeff());
  }
  report("C8a Sigma_W PSD", psd > -1e-13, fmt("min eigenvalue %.2e (tol -1e-13)", psd));
  report("C8b Sigma_W 1 = 0", ones < 1e-14, fmt("max |Sigma_W 1| %.2e (tol 1e-14)", ones));
  report("C8c Sigma_Wi = N Sigma_W", scale < 1e-12, fmt("max deviation %.2e (tol 1e-12)", scale));

  // Filter estimates stay on the simplex with PSD covariance.
  {
    const std::vector<int> counts{2000};
    const mf::SimplexVector pi0 = mf::invariant_pmf(pool(0.0));
    const std::vector<mf::SimplexVector> init{pi0};
    mf::PopulationState pop = mf::make_population(counts, init, 802);
    const std::vector<mf::TransitionFamily> fams{pool};
    mf::ObservationModel obs;
    obs.n = 5;
    obs.C = pool.state_space().indicator(mf::Mode::kOn);
    mf::PopulationFilterState fs = mf::init_population_filter(pi0, 2000);
    double simplex = 0.0, minev = 0.0;
    for (int t = 0; t < 300; ++t) {
      const double z = 0.5 * std::sin(0.05 * t);
      mf::step_population(pop, fams, z);
      mf::kf_population_step(fs, mf::StateTransition::Homogeneous(pool(z).transpose()), obs,
                             mf::observe(pop, obs, rng), 2000);
      simplex = std::max(simplex, mf::simplex_violation(fs.phi));
      minev = std::min(minev, mf::min_eigenvalue(fs.sigma));
    }
    report("C8d filter estimate on the simplex", simplex < 1e-12, fmt("max violation %.2e (tol 1e-12)", simplex));
    report("C8e filter covariance PSD", minev > -1e-12, fmt("min eigenvalue %.2e (tol -1e-12)", minev));
  }

  // Martingale-difference noise: conditional means vanish within 4 sigma.
  {
    const std::vector<int> counts{300};
    const std::vector<mf::SimplexVector> init{mf::SimplexVector::Uniform(d)};
    const mf::PopulationState pop = mf::make_population(counts, init, 803);
    mf::ObservationModel obs;
    obs.n = 30;
    obs.C = pool.state_space().indicator(mf::Mode::kOn);
    const mf::MartingaleCheck m = mf::martingale_noise_check(pool, pop, obs, 0.4, 20000, 804);
    report("C8f martingale mean of W and V", m.w_max_z < 4.0 && m.v_z < 4.0,
           fmt("max |mean W_k| / se = %.3f, |mean V| / se = %.3f (tol 4)", m.w_max_z, m.v_z));
  }

  // Determinism under parallelism.
  {
    mf::ScenarioConfig cfg = mf::preset("tracking");
    cfg.horizon = 400;
    cfg.burn_in = 100;
    cfg.reference.horizon = 400;
    const mf::ScenarioResult a = mf::run_scenario(cfg);
    cfg.workers = 8;
    const mf::ScenarioResult b = mf::run_scenario(cfg);
    const bool same = a.trace.aggregate == b.trace.aggregate && a.trace.zeta == b.trace.zeta &&
                      a.final_state_counts == b.final_state_counts;
    report("C8g scenario bit-identical for 1 and 8 workers", same, same ? "traces identical" : "traces differ");
  }

  // PI and metric algebra.
  {
    mf::PiController c1, c2, c12;
    double lin = 0.0;
    std::normal_distribution<double> g;
    for (int t = 0; t < 500; ++t) {
      const double e1 = g(rng), e2 = g(rng);
      const double z = 3.0 * c1.step(e1) + 0.5 * c2.step(e2);
      lin = std::max(lin, std::abs(c12.step(3.0 * e1 + 0.5 * e2) - z) / (1.0 + std::abs(z)));
    }
    mf::PiController imp({50.0, 1.5, std::nullopt});
    const bool impulse = imp.step(1.0) == 51.5 && imp.step(0.0) == 1.5;
    report("C8h PI linearity and impulse response", lin < 1e-12 && impulse,
           fmt("max relative superposition error %.2e (tol 1e-12), impulse ", lin) +
               (impulse ? "(51.5, 1.5)" : "wrong"));

    std::vector<double> r(200), y(200), ys(200), rs(200);
    for (int t = 0; t < 200; ++t) {
      r[t] = g(rng);
      y[t] = r[t] + 0.1 * g(rng);
      ys[t] = 4.0 * y[t];
      rs[t] = 4.0 * r[t];
    }
    const double self = mf::normalized_error_rms(r, r);
    const double inv = std::abs(mf::normalized_error_rms(y, r) - mf::normalized_error_rms(ys, rs));
    const double e = mf::tracking_error(300.0, 0.6, 0.5, 1000) - 0.2;
    report("C8i metric identities", self == 0.0 && inv < 1e-14 && std::abs(e) < 1e-15,
           fmt("rms(r, r) = %.1e, scale dependence %.1e, tracking_error offset %.1e", self, inv, e));
  }
}

// --- 9. TCL identification -----------------------------------------------

void criterion9() {
  mf::TclIdentification id;
  id.bins = 40;
  id.seed = 1;
  id.workers = 4;
  const auto t0 = std::chrono::steady_clock::now();
  const mf::TclModel m = mf::build_tcl_model({}, id);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Matrix P = m.family(0.0);
  const double viol = mf::stochastic_violation(P);
  int recurrent = 0;
  for (const auto& cls : mf::closed_classes(P)) {
    const bool patched = cls.size() == 1 &&
                         std::find(m.unvisited.begin(), m.unvisited.end(), cls[0]) != m.unvisited.end();
    if (!patched) ++recurrent;
  }
  bool unique = true;
  try {
    mf::invariant_pmf(P, m.unvisited);
  } catch (const mf::NumericalError&) {
    unique = false;
  }
  const RowVector C = m.states.indicator(mf::Mode::kOn);
  const mf::Grammian g = mf::observability_grammian(P.transpose(), C, 2016);
  const double l1 = g.report.spectrum.front(), l40 = g.report.spectrum[39];
  report("C9a TCL P0 stochastic (default parameters, 40 bins, seed 1)", viol < 1e-12,
         fmt("stochastic violation %.2e (tol 1e-12), identification %.1f s", viol, secs));
  report("C9b TCL P0 has one recurrent class", recurrent == 1 && unique,
         fmt("closed classes (excluding %.0f unvisited) = %.0f", static_cast<double>(m.unvisited.size()), recurrent));
  report("C9c TCL Grammian spectrum decays >= 6 orders over the first 40 eigenvalues", l1 >= 1e6 * l40,
         fmt("lambda_1 = %.4g, lambda_40 = %.4g (need lambda_1 >= 1e6 lambda_40)", l1, l40));
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d failing line(s), %.1f s\n", g_failures, secs);
  return g_failures == 0 ? 0 : 1;
}
