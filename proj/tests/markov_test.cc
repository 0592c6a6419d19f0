#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "meanfield/markov.h"
#include "meanfield/population.h"
#include "oracles.h"

namespace meanfield {
namespace {

TransitionFamily pool(double hours = 12.0, double delta = 1.0 / 6.0) {
  PoolModelParams p;
  p.on_fraction = on_fraction_from_hours(hours);
  p.delta = delta;
  return build_pool_model(p);
}

// Power iteration, independent of the library's null-space solve.
Vector power_iteration(const Matrix& P, int iters) {
  Vector pi = Vector::Constant(P.rows(), 1.0 / P.rows());
  const Matrix lazy = 0.5 * (Matrix::Identity(P.rows(), P.rows()) + P);
  for (int k = 0; k < iters; ++k) pi = (pi.transpose() * lazy).transpose();
  return pi / pi.sum();
}

TEST(InvariantPmf, TwoStateChain) {
  Matrix P(2, 2);
  P << 0.9, 0.1, 0.2, 0.8;
  const SimplexVector pi = invariant_pmf(P);
  EXPECT_NEAR(pi[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(pi[1], 1.0 / 3.0, 1e-12);
}

TEST(InvariantPmf, DoublyStochasticIsUniform) {
  Matrix P(3, 3);
  P << 0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2;
  const SimplexVector pi = invariant_pmf(P);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(pi[i], 1.0 / 3.0, 1e-12);
}

TEST(InvariantPmf, RejectsTwoClosedClasses) {
  const Matrix P = Matrix::Identity(3, 3);
  EXPECT_THROW(invariant_pmf(P), NumericalError);
}

TEST(InvariantPmf, RestrictsToTheClosedClass) {
  Matrix P(3, 3);
  P << 0.5, 0.5, 0.0, 0.0, 0.3, 0.7, 0.0, 0.6, 0.4;
  const SimplexVector pi = invariant_pmf(P);
  EXPECT_NEAR(pi[0], 0.0, 1e-14);
  EXPECT_LT((pi.vector().transpose() * P - pi.vector().transpose()).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(InvariantPmf, PoolResidualAgainstPowerIteration) {
  const Matrix P0 = pool()(0.0);
  const SimplexVector pi = invariant_pmf(P0);
  EXPECT_LT((pi.vector().transpose() * P0 - pi.vector().transpose()).lpNorm<Eigen::Infinity>(), 1e-10);
  EXPECT_LT((power_iteration(P0, 200000) - pi.vector()).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(PoolModel, NinetySixStates) {
  const TransitionFamily f = pool();
  EXPECT_EQ(f.dim(), 96);
  EXPECT_EQ(f.state_space().label(0), "on:1");
  EXPECT_EQ(f.state_space().label(48), "off:1");
  EXPECT_EQ(f.state_space().entry_state(Mode::kOff), 48);
}

TEST(PoolModel, StochasticOverSignalGrid) {
  const TransitionFamily f = pool();
  for (double z = -4.0; z <= 4.0; z += 0.25) {
    const Matrix P = f(z);
    EXPECT_LT((P.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12) << "zeta " << z;
    EXPECT_GE(P.minCoeff(), 0.0);
    EXPECT_LE(P.maxCoeff(), 1.0);
  }
}

TEST(PoolModel, SelfLoopWeightIsOneMinusDelta) {
  const Matrix P = pool()(0.0);
  for (int i = 0; i < P.rows(); ++i) EXPECT_NEAR(P(i, i), 1.0 - 1.0 / 6.0, 1e-15);
}

TEST(PoolModel, LazyFormOfDeltaOne) {
  const Matrix P1 = pool(12.0, 1.0)(0.3);
  const Matrix P = pool(12.0, 0.25)(0.3);
  const Matrix I = Matrix::Identity(96, 96);
  EXPECT_LT((P - (0.75 * I + 0.25 * P1)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(P1.diagonal().cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(PoolModel, ContinuousInSignal) {
  const TransitionFamily f = pool();
  EXPECT_LT((f(0.0) - f(1e-9)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(PoolModel, RejectsInvalidParameters) {
  PoolModelParams p;
  p.delta = 0.0;
  EXPECT_THROW(build_pool_model(p), std::invalid_argument);
  p.delta = 1.5;
  EXPECT_THROW(build_pool_model(p), std::invalid_argument);
  p = {};
  p.phases = 1;
  EXPECT_THROW(build_pool_model(p), std::invalid_argument);
  p = {};
  p.tilt_gain = 0.0;
  EXPECT_THROW(build_pool_model(p), std::invalid_argument);
  EXPECT_THROW(pool()(std::nan("")), std::invalid_argument);
}

TEST(PoolModel, DutyCycleMatchesHours) {
  for (double h : {4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0}) {
    const TransitionFamily f = pool(h);
    const SimplexVector pi = invariant_pmf(f(0.0));
    const double on = f.state_space().indicator(Mode::kOn).dot(pi.vector());
    EXPECT_NEAR(on, h / 24.0, 1e-10) << h << " h";
  }
}

TEST(PoolModel, TwelveHourCycleIsModeSymmetric) {
  const Matrix A = pool()(0.0).transpose();
  const Matrix Ag = A.topLeftCorner(48, 48), Ao = A.topRightCorner(48, 48);
  EXPECT_LT((A.bottomRightCorner(48, 48) - Ag).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((A.bottomLeftCorner(48, 48) - Ao).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PoolModel, PositiveSignalRaisesMeanPower) {
  const TransitionFamily f = pool();
  const SimplexVector pi = invariant_pmf(f(0.0));
  const RowVector C = f.state_space().indicator(Mode::kOn);
  const std::vector<TransitionFamily> fams{f};
  double mean_plus = 0.0, mean_zero = 0.0;
  for (double zeta : {0.0, 1.0}) {
    const std::vector<int> counts{500};
    const std::vector<SimplexVector> init{pi};
    PopulationState pop = make_population(counts, init, 7);
    double acc = 0.0;
    constexpr int kSteps = 10000;
    for (int t = 0; t < kSteps; ++t) {
      step_population(pop, fams, zeta);
      acc += C.dot(empirical_distribution(pop, 96).vector());
    }
    (zeta > 0 ? mean_plus : mean_zero) = acc / kSteps;
  }
  EXPECT_GT(mean_plus, mean_zero + 0.05);
}

TEST(SojournHazards, LastPhaseAlwaysSwitches) {
  const auto h = sojourn_hazards(48, 24.0);
  ASSERT_EQ(h.size(), 48u);
  EXPECT_EQ(h.back(), 1.0);
  for (double x : h) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(SojournHazards, MeanSojournIsExact) {
  for (double kappa : {0.0, 2.0, 20.0}) {
    for (double mean : {1.0, 7.5, 24.0, 40.0}) {
      const auto h = sojourn_hazards(48, mean, kappa);
      double survival = 1.0, expected = 0.0;
      for (double x : h) {
        expected += survival;
        survival *= 1.0 - x;
      }
      EXPECT_NEAR(expected, mean, 1e-9) << "kappa " << kappa << " mean " << mean;
    }
  }
  EXPECT_THROW(sojourn_hazards(48, 0.5), std::invalid_argument);
  EXPECT_THROW(sojourn_hazards(48, 24.0, -1.0), std::invalid_argument);
}

TEST(Linearize, SignalIndependentFamilyHasZeroInput) {
  Matrix P(2, 2);
  P << 0.9, 0.1, 0.2, 0.8;
  const StateSpace s({{Mode::kOn, 1}, {Mode::kOff, 1}});
  const LinearizedModel lin = linearize_mean_field(constant_family(s, P), s.indicator(Mode::kOn));
  EXPECT_LT(lin.B.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Linearize, PoolInputConservesMassWithPositiveDcGain) {
  const TransitionFamily f = pool();
  const RowVector C = f.state_space().indicator(Mode::kOn);
  const LinearizedModel lin = linearize_mean_field(f, C);
  EXPECT_LT(std::abs(lin.B.sum()), 1e-8);
  EXPECT_GT(std::abs(C.dot(lin.B)), 1e-6);
  // Step response from pi0 in deviation coordinates.
  Vector x = Vector::Zero(96);
  for (int t = 0; t < 20000; ++t) x = lin.A * x + lin.B;
  const Vector x2 = lin.A * x + lin.B;
  EXPECT_GT(C.dot(x), 0.0);
  EXPECT_LT(std::abs(C.dot(x2) - C.dot(x)), 1e-9 * std::abs(C.dot(x)));
}

TEST(Blend, UnitWeightReturnsFirstFamily) {
  const std::vector<TransitionFamily> fams{pool(8), pool(12)};
  const std::vector<double> w{1.0, 0.0};
  const TransitionFamily b = blend_families(fams, w);
  EXPECT_EQ((b(0.4) - fams[0](0.4)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Blend, EqualWeightsOnCopiesAreIdentical) {
  const std::vector<TransitionFamily> fams{pool(10), pool(10)};
  const std::vector<double> w{0.5, 0.5};
  EXPECT_LT((blend_families(fams, w)(-0.7) - fams[0](-0.7)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Blend, RandomConvexWeightsStayStochastic) {
  std::mt19937_64 rng(11);
  const std::vector<TransitionFamily> fams{pool(4), pool(12), pool(20)};
  for (int trial = 0; trial < 20; ++trial) {
    const Vector w = oracle::random_simplex(3, rng);
    const std::vector<double> wv(w.data(), w.data() + 3);
    std::uniform_real_distribution<double> z(-2.0, 2.0);
    const Matrix P = blend_families(fams, wv)(z(rng));
    EXPECT_LT((P.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GE(P.minCoeff(), 0.0);
  }
}

TEST(Blend, RejectsInvalidInputs) {
  const std::vector<TransitionFamily> fams{pool(8), pool(12)};
  const std::vector<double> bad_sum{0.5, 0.6}, negative{1.5, -0.5}, short_w{1.0};
  EXPECT_THROW(blend_families(fams, bad_sum), std::invalid_argument);
  EXPECT_THROW(blend_families(fams, negative), std::invalid_argument);
  EXPECT_THROW(blend_families(fams, short_w), std::invalid_argument);
  PoolModelParams small;
  small.phases = 24;
  const std::vector<TransitionFamily> mixed{pool(12), build_pool_model(small)};
  const std::vector<double> w{0.5, 0.5};
  EXPECT_THROW(blend_families(mixed, w), std::invalid_argument);
}

TEST(Blend, TwoClassWeightForNineClassMix) {
  // 318 pool-hours per 720 pools: ybar = 318/720.
  const double ybar = 318.0 / 720.0;
  const double alpha = two_class_weight(ybar, 1.0 / 3.0, 0.5);
  EXPECT_NEAR(alpha, 0.35, 1e-12);
  EXPECT_NEAR(alpha / 3.0 + (1.0 - alpha) / 2.0, ybar, 1e-12);
  EXPECT_THROW(two_class_weight(0.4, 0.5, 0.5), std::invalid_argument);
}

TEST(Tcl, DiscreteTimeCoefficient) {
  TclParams p;
  EXPECT_DOUBLE_EQ(p.a(), std::exp(-(2.0 / 3600.0) / 4.0));
  EXPECT_GT(p.a(), 0.0);
  EXPECT_LT(p.a(), 1.0);
}

TEST(Tcl, StateTransform) {
  EXPECT_DOUBLE_EQ(tcl_state_transform(20.5, Mode::kOff, 20.0, 21.0), 20.5);
  EXPECT_DOUBLE_EQ(tcl_state_transform(20.5, Mode::kOn, 20.0, 21.0), 20.5);
  EXPECT_DOUBLE_EQ(tcl_state_transform(21.0, Mode::kOn, 20.0, 21.0), 20.0);
}

TEST(Tcl, DeadbandSwitching) {
  TclParams p;
  const TclState hot = tcl_step(p, {21.0 + 1e-3, Mode::kOff}, 0.0);
  EXPECT_EQ(hot.mode, Mode::kOn);
  const TclState cold = tcl_step(p, {20.0 - 1e-3, Mode::kOn}, 0.0);
  EXPECT_EQ(cold.mode, Mode::kOff);
  const TclState mid = tcl_step(p, {20.5, Mode::kOn}, 0.0);
  EXPECT_EQ(mid.mode, Mode::kOn);
  EXPECT_LT(mid.theta, 20.5);  // cooling while ON
  EXPECT_EQ(tcl_bin(p, 40, 19.0), 0);
  EXPECT_EQ(tcl_bin(p, 40, 22.0), 39);
  EXPECT_EQ(tcl_bin(p, 40, 20.5), 20);
}

TclIdentification small_id(std::uint64_t seed, int workers = 1) {
  TclIdentification id;
  id.mc_loads = 200;
  id.mc_steps = 2000;
  id.seed = seed;
  id.workers = workers;
  return id;
}

TEST(Tcl, EightyStatesAndStochastic) {
  const TclModel m = build_tcl_model({}, small_id(3));
  EXPECT_EQ(m.states.size(), 80);
  const Matrix P = m.family(0.0);
  EXPECT_LT(stochastic_violation(P), 1e-12);
  EXPECT_NEAR(m.joint.sum(), 1.0, 1e-12);
}

TEST(Tcl, BitReproducibleAndWorkerIndependent) {
  const TclModel a = build_tcl_model({}, small_id(5));
  const TclModel b = build_tcl_model({}, small_id(5));
  const TclModel c = build_tcl_model({}, small_id(5, 3));
  EXPECT_EQ((a.joint - b.joint).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.family(0.0) - c.family(0.0)).cwiseAbs().maxCoeff(), 0.0);
  const TclModel d = build_tcl_model({}, small_id(6));
  EXPECT_GT((a.joint - d.joint).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Tcl, NoiselessSingleLoadVisitsFewerTransitions) {
  TclParams quiet;
  quiet.noise_var = 0.0;
  TclIdentification id;
  id.mc_loads = 1;
  id.mc_steps = 20000;
  id.initial_temperature = 20.5;
  const TclModel q1 = build_tcl_model(quiet, id);
  const TclModel q2 = build_tcl_model(quiet, id);
  EXPECT_EQ((q1.joint - q2.joint).cwiseAbs().maxCoeff(), 0.0);
  const TclModel noisy = build_tcl_model({}, id);
  const auto support = [](const Matrix& J) { return (J.array() > 0.0).count(); };
  EXPECT_LE(support(q1.joint), support(noisy.joint));
  EXPECT_LT(stochastic_violation(q1.family(0.0)), 1e-12);
}

TEST(Tcl, RejectsInvalidInputs) {
  TclParams p;
  p.theta_max = p.theta_min;
  EXPECT_THROW(build_tcl_model(p, small_id(1)), std::invalid_argument);
  TclIdentification id = small_id(1);
  id.bins = 1;
  EXPECT_THROW(build_tcl_model({}, id), std::invalid_argument);
  id = small_id(1);
  id.mc_steps = 0;
  EXPECT_THROW(build_tcl_model({}, id), std::invalid_argument);
}

}  // namespace
}  // namespace meanfield
