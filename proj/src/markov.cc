#include "meanfield/markov.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace meanfield {

// --- StateSpace -------------------------------------------------------------

StateSpace::StateSpace(std::vector<StateLabel> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw std::invalid_argument("state space needs at least 2 states");
  std::set<std::pair<int, int>> seen;
  for (const auto& l : labels_) {
    if (!seen.emplace(static_cast<int>(l.mode), l.index).second) {
      throw std::invalid_argument("duplicate state label");
    }
  }
}

StateSpace StateSpace::Pool(int phases) {
  if (phases < 2) throw std::invalid_argument("pool model needs at least 2 phases");
  std::vector<StateLabel> labels;
  labels.reserve(2 * phases);
  for (int k = 1; k <= phases; ++k) labels.push_back({Mode::kOn, k});
  for (int k = 1; k <= phases; ++k) labels.push_back({Mode::kOff, k});
  return StateSpace(std::move(labels));
}

StateSpace StateSpace::Tcl(int bins) {
  if (bins < 2) throw std::invalid_argument("TCL model needs at least 2 bins");
  return Pool(bins);
}

std::string StateSpace::label(int i) const {
  const auto& l = labels_.at(i);
  return std::string(l.mode == Mode::kOn ? "on:" : "off:") + std::to_string(l.index);
}

std::vector<std::string> StateSpace::labels() const {
  std::vector<std::string> out;
  out.reserve(labels_.size());
  for (int i = 0; i < size(); ++i) out.push_back(label(i));
  return out;
}

int StateSpace::entry_state(Mode m) const {
  for (int i = 0; i < size(); ++i) {
    if (labels_[i].mode == m && labels_[i].index == 1) return i;
  }
  for (int i = 0; i < size(); ++i) {
    if (labels_[i].mode == m) return i;
  }
  throw std::invalid_argument("state space has no state in the requested mode");
}

RowVector StateSpace::indicator(Mode m) const {
  RowVector r = RowVector::Zero(size());
  for (int i = 0; i < size(); ++i) {
    if (labels_[i].mode == m) r(i) = 1.0;
  }
  return r;
}

// --- TransitionFamily -------------------------------------------------------

TransitionFamily::TransitionFamily(StateSpace states, std::shared_ptr<const Impl> impl)
    : states_(std::move(states)), impl_(std::move(impl)) {
  if (!impl_) throw std::invalid_argument("transition family without implementation");
}

Matrix TransitionFamily::operator()(double zeta) const {
  if (!std::isfinite(zeta)) throw std::invalid_argument("signal value must be finite");
  return impl_->Evaluate(zeta);
}

Matrix transition_matrix(const TransitionFamily& family, double zeta) { return family(zeta); }

namespace {

class ConstantImpl final : public TransitionFamily::Impl {
 public:
  explicit ConstantImpl(Matrix P) : P_(std::move(P)) {}
  Matrix Evaluate(double) const override { return P_; }

 private:
  Matrix P_;
};

class PoolImpl final : public TransitionFamily::Impl {
 public:
  PoolImpl(const PoolModelParams& p, std::vector<double> q_on, std::vector<double> q_off)
      : params_(p), q_on_(std::move(q_on)), q_off_(std::move(q_off)) {}

  Matrix Evaluate(double zeta) const override {
    const int I = params_.phases;
    const int d = 2 * I;
    const double delta = params_.delta;
    Matrix P = Matrix::Zero(d, d);
    P.diagonal().setConstant(1.0 - delta);
    // Tilt exponents: on -> off is a decrease (du = -1), off -> on an increase.
    fill_mode(P, 0, I, q_on_, -params_.tilt_gain * zeta, delta);
    fill_mode(P, I, 0, q_off_, params_.tilt_gain * zeta, delta);
    return P;
  }

 private:
  void fill_mode(Matrix& P, int first, int other_first, const std::vector<double>& q,
                 double tilt, double delta) const {
    const int I = params_.phases;
    for (int k = 0; k < I; ++k) {
      const double ps = tilted_switch(q[k], tilt);
      const int row = first + k;
      P(row, other_first) += delta * ps;
      if (k + 1 < I) P(row, row + 1) += delta * (1.0 - ps);
    }
  }

  static double tilted_switch(double q, double tilt) {
    if (q >= 1.0) return 1.0;
    if (q <= 0.0) return 0.0;
    const double log_odds = std::log(q) - std::log1p(-q) + tilt;
    return 1.0 / (1.0 + std::exp(-log_odds));
  }

  PoolModelParams params_;
  std::vector<double> q_on_;
  std::vector<double> q_off_;
};

class BlendImpl final : public TransitionFamily::Impl {
 public:
  BlendImpl(std::vector<TransitionFamily> f, std::vector<double> w)
      : families_(std::move(f)), weights_(std::move(w)) {}

  Matrix Evaluate(double zeta) const override {
    Matrix P = weights_[0] * families_[0](zeta);
    for (std::size_t k = 1; k < families_.size(); ++k) {
      if (weights_[k] != 0.0) P += weights_[k] * families_[k](zeta);
    }
    return P;
  }

 private:
  std::vector<TransitionFamily> families_;
  std::vector<double> weights_;
};

}  // namespace

TransitionFamily constant_family(StateSpace states, Matrix P) {
  if (P.rows() != states.size()) throw std::invalid_argument("matrix does not match state space");
  require_stochastic(P, 1e-10, "constant_family");
  return TransitionFamily(std::move(states), std::make_shared<ConstantImpl>(std::move(P)));
}

// --- pool model -------------------------------------------------------------

std::vector<double> sojourn_hazards(int phases, double mean_phases, double concentration) {
  if (phases < 2) throw std::invalid_argument("need at least 2 phases");
  if (!(mean_phases >= 1.0 && mean_phases <= phases)) {
    throw std::invalid_argument("mean sojourn must lie in [1, phases]");
  }
  if (!(concentration >= 0.0) || !std::isfinite(concentration)) {
    throw std::invalid_argument("sojourn concentration must be finite and >= 0");
  }
  const int n = phases - 1;
  const double p = (mean_phases - 1.0) / n;
  // pmf of K - 1 in log space.
  std::vector<double> pmf(phases, 0.0);
  for (int j = 0; j <= n; ++j) {
    if (p == 0.0) {
      pmf[j] = (j == 0) ? 1.0 : 0.0;
    } else if (p == 1.0) {
      pmf[j] = (j == n) ? 1.0 : 0.0;
    } else {
      const double lc = std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
      if (concentration == 0.0) {
        pmf[j] = std::exp(lc + j * std::log(p) + (n - j) * std::log1p(-p));
      } else {
        const double a = p * concentration, b = (1.0 - p) * concentration;
        const double lbeta_ab = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
        const double lbeta = std::lgamma(j + a) + std::lgamma(n - j + b) - std::lgamma(n + a + b);
        pmf[j] = std::exp(lc + lbeta - lbeta_ab);
      }
    }
  }
  std::vector<double> hazard(phases, 1.0);
  double survival = 0.0;
  std::vector<double> surv(phases, 0.0);
  for (int j = n; j >= 0; --j) {
    survival += pmf[j];
    surv[j] = survival;
  }
  for (int j = 0; j < n; ++j) {
    hazard[j] = surv[j] > 0.0 ? std::clamp(pmf[j] / surv[j], 0.0, 1.0) : 1.0;
  }
  hazard[n] = 1.0;
  return hazard;
}

TransitionFamily build_pool_model(const PoolModelParams& params) {
  if (params.phases < 2) throw std::invalid_argument("pool model: phase count must be >= 2");
  if (!(params.delta > 0.0 && params.delta <= 1.0)) {
    throw std::invalid_argument("pool model: delta must lie in (0, 1]");
  }
  if (!(params.tilt_gain > 0.0) || !std::isfinite(params.tilt_gain)) {
    throw std::invalid_argument("pool model: tilt gain must be positive");
  }
  const double I = params.phases;
  const double mean_on = I * params.on_fraction;
  const double mean_off = I * (1.0 - params.on_fraction);
  if (!(mean_on >= 1.0 && mean_off >= 1.0)) {
    std::ostringstream msg;
    msg << "pool model: on fraction " << params.on_fraction << " must lie in [1/" << params.phases
        << ", 1 - 1/" << params.phases << "]";
    throw std::invalid_argument(msg.str());
  }
  return TransitionFamily(StateSpace::Pool(params.phases),
                          std::make_shared<PoolImpl>(
                              params, sojourn_hazards(params.phases, mean_on, params.sojourn_concentration),
                              sojourn_hazards(params.phases, mean_off, params.sojourn_concentration)));
}

// --- invariant pmf ----------------------------------------------------------

namespace {

std::vector<std::vector<bool>> reachability(const Matrix& P) {
  const int d = static_cast<int>(P.rows());
  std::vector<std::vector<bool>> reach(d, std::vector<bool>(d, false));
  std::vector<int> stack;
  for (int s = 0; s < d; ++s) {
    auto& r = reach[s];
    r[s] = true;
    stack.assign(1, s);
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < d; ++j) {
        if (P(i, j) > 0.0 && !r[j]) {
          r[j] = true;
          stack.push_back(j);
        }
      }
    }
  }
  return reach;
}

}  // namespace

std::vector<std::vector<int>> closed_classes(const Matrix& P) {
  const int d = static_cast<int>(P.rows());
  const auto reach = reachability(P);
  std::vector<bool> assigned(d, false);
  std::vector<std::vector<int>> out;
  for (int i = 0; i < d; ++i) {
    if (assigned[i]) continue;
    bool closed = true;
    for (int j = 0; j < d && closed; ++j) {
      if (reach[i][j] && !reach[j][i]) closed = false;
    }
    if (!closed) continue;
    std::vector<int> cls;
    for (int j = 0; j < d; ++j) {
      if (reach[i][j]) {
        cls.push_back(j);
        assigned[j] = true;
      }
    }
    out.push_back(std::move(cls));
  }
  return out;
}

SimplexVector invariant_pmf(const Matrix& P, std::span<const int> ignored) {
  require_stochastic(P, 1e-10, "invariant_pmf");
  const int d = static_cast<int>(P.rows());
  std::set<int> skip(ignored.begin(), ignored.end());

  std::vector<std::vector<int>> candidates;
  for (auto& cls : closed_classes(P)) {
    const bool all_ignored =
        std::all_of(cls.begin(), cls.end(), [&](int s) { return skip.count(s) > 0; });
    if (!all_ignored) candidates.push_back(std::move(cls));
  }
  if (candidates.size() != 1) {
    std::ostringstream msg;
    msg << "invariant pmf is not unique: " << candidates.size() << " closed classes";
    throw NumericalError(msg.str());
  }
  const auto& cls = candidates.front();
  const int m = static_cast<int>(cls.size());
  Matrix Q(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) Q(a, b) = P(cls[a], cls[b]);
  }
  if (m > 1) {
    Eigen::EigenSolver<Matrix> es(Q, false);
    int unit = 0;
    for (int i = 0; i < m; ++i) {
      if (std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0)) < 1e-8) ++unit;
    }
    if (unit > 1) {
      std::ostringstream msg;
      msg << "invariant pmf is not unique: eigenvalue 1 has multiplicity " << unit
          << " at tolerance 1e-8";
      throw NumericalError(msg.str());
    }
  }

  // pi (Q - I) = 0 with the last equation replaced by sum(pi) = 1.
  Matrix M = Q.transpose() - Matrix::Identity(m, m);
  M.row(m - 1).setOnes();
  Vector rhs = Vector::Zero(m);
  rhs(m - 1) = 1.0;
  Vector sol = M.fullPivLu().solve(rhs);

  Vector pi = Vector::Zero(d);
  for (int a = 0; a < m; ++a) pi(cls[a]) = sol(a);
  pi = project_to_simplex(pi);
  // One refinement sweep keeps the residual at roundoff level.
  for (int it = 0; it < 2; ++it) {
    const double res = (pi.transpose() * P - pi.transpose()).cwiseAbs().maxCoeff();
    if (res < 1e-13) break;
    pi = project_to_simplex((pi.transpose() * P).transpose());
  }
  return SimplexVector(pi, 1e-12);
}

// --- linearization ----------------------------------------------------------

LinearizedModel linearize_mean_field(const TransitionFamily& family, const RowVector& C,
                                     double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  if (C.size() != family.dim()) throw std::invalid_argument("C does not match state dimension");
  const Matrix P0 = family(0.0);
  LinearizedModel lin{P0.transpose(), Vector(), C, invariant_pmf(P0)};
  const Matrix dP = (family(h) - family(-h)) / (2.0 * h);
  lin.B = dP.transpose() * lin.pi0.vector();
  return lin;
}

// --- blending ---------------------------------------------------------------

TransitionFamily blend_families(std::span<const TransitionFamily> families,
                                std::span<const double> weights) {
  if (families.empty()) throw std::invalid_argument("blend of zero families");
  if (families.size() != weights.size()) {
    throw std::invalid_argument("blend: one weight per family required");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("blend: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("blend: weights must sum to 1");
  for (const auto& f : families) {
    if (f.dim() != families[0].dim() || !(f.state_space() == families[0].state_space())) {
      throw std::invalid_argument("blend: families must share one state space");
    }
  }
  return TransitionFamily(
      families[0].state_space(),
      std::make_shared<BlendImpl>(std::vector<TransitionFamily>(families.begin(), families.end()),
                                  std::vector<double>(weights.begin(), weights.end())));
}

double two_class_weight(double ybar, double ybar_first, double ybar_second) {
  if (ybar_first == ybar_second) throw std::invalid_argument("two classes with equal means");
  return (ybar_second - ybar) / (ybar_second - ybar_first);
}

}  // namespace meanfield
