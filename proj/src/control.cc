#include "meanfield/control.h"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "meanfield/rng.h"

namespace meanfield {

PiController::PiController(PiGains gains) : gains_(gains) {
  if (gains_.saturation && !(gains_.saturation->first < gains_.saturation->second)) {
    throw std::invalid_argument("PiController: saturation bounds must satisfy min < max");
  }
}

double PiController::step(double e) {
  if (!std::isfinite(e)) throw std::invalid_argument("PiController: non-finite error");
  const double integ = integ_ + e;
  const double zeta = gains_.kp * e + gains_.ki * integ;
  if (gains_.saturation) {
    const auto [lo, hi] = *gains_.saturation;
    if (zeta < lo) return lo;
    if (zeta > hi) return hi;
  }
  integ_ = integ;
  return zeta;
}

double tracking_error(double r, double y, double ybar, int N) {
  if (N < 1) throw std::invalid_argument("tracking_error: N must be >= 1");
  return r / N - (y - ybar);
}

double normalized_error_rms(std::span<const double> y, std::span<const double> r) {
  if (y.size() != r.size() || r.empty()) {
    throw std::invalid_argument("normalized_error_rms: traces must be non-empty and equal length");
  }
  double rr = 0.0, ee = 0.0;
  for (std::size_t t = 0; t < r.size(); ++t) {
    rr += r[t] * r[t];
    ee += (y[t] - r[t]) * (y[t] - r[t]);
  }
  if (!(rr > 0.0)) throw std::invalid_argument("normalized_error_rms: zero-energy reference");
  return std::sqrt(ee / rr);
}

// --- reference --------------------------------------------------------------

std::vector<std::pair<double, double>> read_reference_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("reference file not found: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::pair<double, double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected t_seconds,r_kw");
    }
    try {
      rows.emplace_back(std::stod(a), std::stod(b));
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": not a number");
    }
    if (rows.size() > 1 && !(rows.back().first > rows[rows.size() - 2].first)) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": time stamps must increase");
    }
  }
  return rows;
}

namespace {

void lowpass_inplace(std::vector<double>& x, double alpha, bool backward) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  if (n == 0) return;
  if (!backward) {
    for (std::ptrdiff_t i = 1; i < n; ++i) x[i] = alpha * x[i - 1] + (1.0 - alpha) * x[i];
  } else {
    for (std::ptrdiff_t i = n - 2; i >= 0; --i) x[i] = alpha * x[i + 1] + (1.0 - alpha) * x[i];
  }
}

void scale_to_peak(std::vector<double>& x, double peak) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  if (!(m > 0.0)) throw std::invalid_argument("make_reference: reference is identically zero");
  for (double& v : x) v *= peak / m;
}

}  // namespace

ReferenceSignal make_reference(const ReferenceSpec& spec, double capacity) {
  if (!(spec.amplitude_fraction > 0.0 && spec.amplitude_fraction < 1.0)) {
    throw std::invalid_argument("make_reference: amplitude_fraction must lie in (0, 1)");
  }
  if (spec.horizon < 1) throw std::invalid_argument("make_reference: horizon must be >= 1");
  if (!(spec.step_seconds > 0.0)) throw std::invalid_argument("make_reference: step must be > 0");
  ReferenceSignal out;
  out.step_seconds = spec.step_seconds;
  const double peak = spec.amplitude_fraction * capacity;

  if (spec.kind == ReferenceSpec::Kind::kFile) {
    const auto rows = read_reference_csv(spec.path);
    if (rows.empty()) throw std::runtime_error("reference file is empty: " + spec.path);
    const double t0 = rows.front().first;
    const double t_end = t0 + (spec.horizon - 1) * spec.step_seconds;
    if (rows.back().first < t_end) {
      throw std::runtime_error("reference file too short: " + spec.path + " covers " +
                               std::to_string(rows.back().first - t0) + " s, need " +
                               std::to_string(t_end - t0) + " s");
    }
    out.samples.resize(spec.horizon);
    std::size_t j = 0;
    for (int k = 0; k < spec.horizon; ++k) {
      const double t = t0 + k * spec.step_seconds;
      while (j + 1 < rows.size() && rows[j + 1].first <= t) ++j;
      out.samples[k] = rows[j].second;
    }
    scale_to_peak(out.samples, peak);
    out.provenance = "file:" + spec.path;
    return out;
  }

  if (!(spec.time_constant_hours > 0.0)) {
    throw std::invalid_argument("make_reference: time constant must be > 0");
  }
  if (spec.passes < 1) throw std::invalid_argument("make_reference: passes must be >= 1");
  const double alpha = std::exp(-spec.step_seconds / (3600.0 * spec.time_constant_hours));
  // Pad both ends by ten time constants so the crop has no start-up transient.
  const int pad = static_cast<int>(std::ceil(10.0 * 3600.0 * spec.time_constant_hours /
                                             spec.step_seconds));
  std::vector<double> x(spec.horizon + 2 * pad);
  std::mt19937_64 eng(rng::derive(spec.seed, rng::kReference));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : x) v = noise(eng);
  for (int p = 0; p < spec.passes; ++p) {
    lowpass_inplace(x, alpha, false);
    lowpass_inplace(x, alpha, true);
  }
  out.samples.assign(x.begin() + pad, x.begin() + pad + spec.horizon);
  double mean = 0.0;
  for (double v : out.samples) mean += v;
  mean /= spec.horizon;
  for (double& v : out.samples) v -= mean;
  scale_to_peak(out.samples, peak);
  std::ostringstream prov;
  prov << "synthetic: zero-phase first-order low-pass, tau=" << spec.time_constant_hours
       << " h, passes=" << spec.passes << ", seed=" << spec.seed;
  out.provenance = prov.str();
  return out;
}

// --- prefilter --------------------------------------------------------------

double prefilter_spectral_radius(const PiGains& gains, const LinearizedModel& lin) {
  const int d = static_cast<int>(lin.A.rows());
  // Orthonormal basis of the tangent space {x : 1^T x = 0}.
  const Matrix Qh = Eigen::HouseholderQR<Matrix>(Matrix::Ones(d, 1)).householderQ();
  const Matrix Q = Qh.rightCols(d - 1);
  const Matrix At = Q.transpose() * lin.A * Q;
  const Vector Bt = Q.transpose() * lin.B;
  const RowVector Ct = lin.C * Q;
  Matrix M = Matrix::Zero(d, d);
  M.topLeftCorner(d - 1, d - 1) = At - (gains.kp + gains.ki) * Bt * Ct;
  M.block(0, d - 1, d - 1, 1) = gains.ki * Bt;
  M.block(d - 1, 0, 1, d - 1) = -Ct;
  M(d - 1, d - 1) = 1.0;
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> mean_field_prefilter(const PiGains& gains, const LinearizedModel& lin,
                                         std::span<const double> r, int N) {
  if (N < 1) throw std::invalid_argument("mean_field_prefilter: N must be >= 1");
  const double rho = prefilter_spectral_radius(gains, lin);
  if (!(rho < 1.0)) {
    throw NumericalError("mean_field_prefilter: closed loop unstable, spectral radius " +
                         std::to_string(rho));
  }
  PiController ctrl(PiGains{gains.kp, gains.ki, std::nullopt});
  std::vector<double> zeta(r.size());
  Vector x = Vector::Zero(lin.A.rows());
  for (std::size_t t = 0; t < r.size(); ++t) {
    zeta[t] = ctrl.step(r[t] / N - lin.C.dot(x));
    x = lin.A * x + lin.B * zeta[t];
  }
  return zeta;
}

}  // namespace meanfield
