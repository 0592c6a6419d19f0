#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

#include "meanfield/analysis.h"
#include "meanfield/markov.h"
#include "oracles.h"

namespace meanfield {
namespace {

const RowVector kEightC{{1, 1, 1, 1, 0, 0, 0, 0}};

TEST(Report, RankAtDefaultAndExplicitTolerance) {
  const ObservabilityReport r = make_report({1e-20, 3.0, 1e-3}, 3, std::nullopt);
  EXPECT_EQ(r.spectrum, (std::vector<double>{3.0, 1e-3, 1e-20}));
  EXPECT_EQ(r.numerical_rank, 2);
  EXPECT_DOUBLE_EQ(r.tolerance, 3 * std::numeric_limits<double>::epsilon() * 3.0);
  EXPECT_EQ(make_report({3.0, 1e-3}, 2, 1e-2).numerical_rank, 1);
}

TEST(ObservabilityMatrix, RowsArePowers) {
  std::mt19937_64 rng(1);
  const Matrix A = oracle::random_stochastic(5, rng).transpose();
  const RowVector C = RowVector::Random(5);
  const ObservabilityMatrix om = observability_matrix(A, C);
  RowVector row = C;
  for (int k = 0; k < 5; ++k) {
    EXPECT_LT((om.O.row(k) - row).cwiseAbs().maxCoeff(), 1e-14);
    row = row * A;
  }
  EXPECT_THROW(observability_matrix(A, RowVector::Ones(4)), std::invalid_argument);
}

TEST(ObservabilityMatrix, DiagonalSystemRanks) {
  const Matrix A = Vector{{0.9, 0.5, 0.1, -0.3}}.asDiagonal();
  EXPECT_EQ(observability_matrix(A, RowVector::Ones(4)).report.numerical_rank, 4);
  const ObservabilityMatrix hidden = observability_matrix(A, RowVector{{1, 1, 0, 1}});
  EXPECT_EQ(hidden.report.numerical_rank, 3);
  ASSERT_EQ(hidden.report.unobservable_basis.cols(), 1);
  EXPECT_NEAR(std::abs(hidden.report.unobservable_basis(2, 0)), 1.0, 1e-12);
}

TEST(Grammian, QuadraticFormEqualsOutputEnergy) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(2, 20), horizon(1, 200);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = dim(rng), T = horizon(rng);
    std::vector<Matrix> seq;
    for (int t = 0; t + 1 < T; ++t) seq.push_back(oracle::random_stochastic(d, rng).transpose());
    const RowVector C = RowVector::Random(d);
    const Grammian g = observability_grammian(seq, C, T);
    for (int rep = 0; rep < 3; ++rep) {
      const Vector x = Vector::Random(d);
      const auto y = oracle::simulate_outputs(seq, C, x, T);
      double energy = 0.0;
      for (double v : y) energy += v * v;
      EXPECT_NEAR(x.dot(g.G * x), energy, 1e-8 * energy) << "d " << d << " T " << T;
    }
    EXPECT_EQ(ltv_outputs(seq, C, Vector::Ones(d), T), oracle::simulate_outputs(seq, C, Vector::Ones(d), T));
  }
}

TEST(Grammian, SpectrumIsSquaredFactorSpectrum) {
  std::mt19937_64 rng(3);
  const Matrix A = oracle::random_stochastic(6, rng).transpose();
  const RowVector C = RowVector::Random(6);
  const Grammian g = observability_grammian(A, C, 30);
  EXPECT_LT((g.G - g.factor.transpose() * g.factor).cwiseAbs().maxCoeff(), 1e-13);
  Eigen::SelfAdjointEigenSolver<Matrix> es(g.G);
  EXPECT_NEAR(g.report.spectrum.front(), es.eigenvalues().maxCoeff(), 1e-10 * es.eigenvalues().maxCoeff());
  for (std::size_t i = 1; i < g.report.spectrum.size(); ++i) {
    EXPECT_GE(g.report.spectrum[i - 1], g.report.spectrum[i]);
    EXPECT_GE(g.report.spectrum[i], 0.0);
  }
  // One-step horizon: only C^T C.
  const Grammian one = observability_grammian(A, C, 1);
  EXPECT_LT((one.G - C.transpose() * C).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(one.report.numerical_rank, 1);
  EXPECT_THROW(observability_grammian(A, C, 0), std::invalid_argument);
  const std::vector<Matrix> short_seq{A};
  EXPECT_THROW(observability_grammian(short_seq, C, 5), std::invalid_argument);
}

TEST(Grammian, LtiOverloadMatchesRepeatedSequence) {
  std::mt19937_64 rng(4);
  const Matrix A = oracle::random_stochastic(5, rng).transpose();
  const RowVector C = RowVector::Random(5);
  const std::vector<Matrix> seq(19, A);
  EXPECT_LT((observability_grammian(A, C, 20).G - observability_grammian(seq, C, 20).G).cwiseAbs().maxCoeff(),
            1e-13);
}

TEST(Symmetry, EightStateExampleHasHiddenModes) {
  const Matrix A = oracle::symmetric_eight_state();
  EXPECT_LT((A.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-15);
  const SymmetryReport r = symmetry_check(A, kEightC);
  EXPECT_TRUE(r.applicable);
  EXPECT_TRUE(r.is_symmetric_form);
  EXPECT_EQ(r.v0_basis.cols(), 3);
  EXPECT_LT((r.v0_basis.transpose() * r.v0_basis - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(r.max_response, 1e-9);
  EXPECT_LE(r.observability.numerical_rank, 5);
}

TEST(Symmetry, V0IsInvariantUnderA) {
  // A maps (z; z) to ((Ag + Ao) z; (Ag + Ao) z), so residuals after
  // projecting back onto the basis vanish.
  const Matrix A = oracle::symmetric_eight_state();
  const SymmetryReport r = symmetry_check(A, kEightC);
  const Matrix image = A * r.v0_basis;
  const Matrix residual = image - r.v0_basis * (r.v0_basis.transpose() * image);
  EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Symmetry, PoolModelAtTwelveHours) {
  const TransitionFamily f = build_pool_model({});
  const Matrix A = f(0.0).transpose();
  const SymmetryReport r = symmetry_check(A, f.state_space().indicator(Mode::kOn));
  EXPECT_TRUE(r.is_symmetric_form);
  EXPECT_EQ(r.v0_basis.cols(), 47);
  EXPECT_LT(r.max_response, 1e-9);
  EXPECT_LE(r.observability.numerical_rank, 49);
}

TEST(Symmetry, BrokenSymmetryIsDetected) {
  Matrix A = oracle::symmetric_eight_state();
  A(1, 0) += 0.01;
  A(0, 0) -= 0.01;
  const SymmetryReport r = symmetry_check(A, kEightC);
  EXPECT_FALSE(r.is_symmetric_form);
  EXPECT_GT(r.max_response, 1e-6);
  EXPECT_FALSE(symmetry_check(Matrix::Identity(3, 3), RowVector::Ones(3)).applicable);
  RowVector C = kEightC;
  C(7) = 0.5;
  EXPECT_FALSE(symmetry_check(oracle::symmetric_eight_state(), C).is_symmetric_form);
}

void expect_modes_consistent(const Matrix& A, const EigenModes& m) {
  const int k = static_cast<int>(m.modes.cols());
  EXPECT_LT((m.dual * m.modes - Matrix::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((m.dual * A * m.modes - m.reduced).cwiseAbs().maxCoeff(), 1e-9);
  // The span is invariant: A V = V R.
  EXPECT_LT((A * m.modes - m.modes * m.reduced).cwiseAbs().maxCoeff(), 1e-9);
  for (int j = 1; j < k; ++j) {
    EXPECT_GE(std::abs(m.eigenvalues[j - 1]) + 1e-12, std::abs(m.eigenvalues[j]));
  }
}

TEST(EigenModes, RandomStochasticMatrices) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 3 + trial % 8;
    const Matrix A = oracle::random_stochastic(d, rng).transpose();
    for (int k = 1; k <= d; ++k) {
      const EigenModes m = eigen_modes(A, k);
      EXPECT_GE(m.modes.cols(), k);
      EXPECT_LE(m.modes.cols(), k + 1);
      EXPECT_NEAR(m.eigenvalues[0].real(), 1.0, 1e-12);
      EXPECT_GT(m.modes.col(0).sum(), 0.0);
      EXPECT_NEAR(m.modes.col(0).norm(), 1.0, 1e-12);
      expect_modes_consistent(A, m);
    }
  }
}

TEST(EigenModes, PoolModel) {
  const Matrix A = build_pool_model({})(0.0).transpose();
  for (int k : {1, 7, 15}) expect_modes_consistent(A, eigen_modes(A, k));
}

TEST(EigenModes, DefectiveEigenspaceIsReported) {
  Matrix J(3, 3);
  J << 0.5, 1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.1;
  EXPECT_THROW(eigen_modes(J, 2), NumericalError);
  EXPECT_NO_THROW(eigen_modes(J.bottomRightCorner(1, 1), 1));
  EXPECT_THROW(eigen_modes(J, 0), std::invalid_argument);
  EXPECT_THROW(eigen_modes(J, 4), std::invalid_argument);
}

}  // namespace
}  // namespace meanfield
