#include "epdc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>

#include "epdc/photon_statistics.hpp"

namespace epdc {

namespace {

constexpr double kEtaMin = 1e-12;
constexpr double kLogEtaMin = -27.631021115928547;  // ln(1e-12)
// Logit box edge. exp(-40) ~ 4e-18 is below double rounding relative to any
// click rate, so a coordinate parked at the edge reproduces p = 0 or p = 1
// exactly: boundary optima (dark-count-free or saturated orders) are genuine
// minima of the boxed problem rather than being held 1e-8 away from the edge,
// which would bend the remaining parameters off their true values. The
// optimizer's monotone damping scale keeps such all-but-dead coordinates
// priced at their historic stiffness, so the edge is only reached through
// runs of genuinely cost-decreasing steps, never by one wild extrapolation.
constexpr double kLogitClamp = 40.0;
constexpr double kBoundarySnap = 2e-8;  // generous cover for edge-parked values

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// p(1-p) computed as sig(v)sig(-v): immune to the 1 - p cancellation near
// the upper clamp.
double logistic_slope(double v) { return logistic(v) * logistic(-v); }

double logit_clamped(double p) {
  const double floor = logistic(-kLogitClamp);
  const double ceil = 1.0 - floor;
  if (p <= floor) return -kLogitClamp;
  if (p >= ceil) return kLogitClamp;
  return std::log(p / (1.0 - p));
}

double radical_inverse(std::uint64_t index, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % static_cast<std::uint64_t>(base));
    index /= static_cast<std::uint64_t>(base);
    f *= inv;
  }
  return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

// Signed binomial deviance residual and its derivative in the model rate.
struct DevianceResidual {
  double r;
  double dr_dm;
};

DevianceResidual deviance_residual(long long clicks, long long trials, double m) {
  const double n = static_cast<double>(trials);
  const double c = static_cast<double>(clicks);
  const double m_lo = 1e-300;
  const double m_hi = 1.0 - 1.1e-16;
  if (m < m_lo) m = m_lo;
  if (m > m_hi) m = m_hi;

  double d = 0.0;
  if (clicks > 0) d += c * std::log(c / (n * m));
  if (clicks < trials) d += (n - c) * std::log((n - c) / (n * (1.0 - m)));
  d = std::max(2.0 * d, 0.0);

  const double f = c / n;
  const double sd = std::sqrt(d);
  DevianceResidual out;
  out.r = (f >= m) ? sd : -sd;
  if (sd < 1e-150) {
    out.dr_dm = -std::sqrt(n / (m * (1.0 - m)));
  } else {
    out.dr_dm = -std::abs(n * m - c) / (m * (1.0 - m) * sd);
  }
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

FitProblem::FitProblem(std::vector<ClickStatistics> data, int i_max, const FitConfig& config)
    : data_(std::move(data)), i_max_(i_max), config_(config) {
  n_free_ = 1 + (i_max_ + 1) - (config_.pin_p0 ? 1 : 0);
  lo_.resize(n_free_);
  hi_.resize(n_free_);
  if (config_.parameterization == Parameterization::transformed) {
    lo_[0] = kLogEtaMin;
    hi_[0] = 0.0;
    for (int j = 1; j < n_free_; ++j) {
      lo_[j] = -kLogitClamp;
      hi_[j] = kLogitClamp;
    }
  } else {
    lo_[0] = kEtaMin;
    hi_[0] = 1.0;
    for (int j = 1; j < n_free_; ++j) {
      lo_[j] = 0.0;
      hi_[j] = 1.0;
    }
  }
}

EpdcModel FitProblem::model_at(const Eigen::VectorXd& theta) const {
  EpdcModel m;
  const bool transformed = config_.parameterization == Parameterization::transformed;
  m.eta = transformed ? std::exp(theta[0]) : theta[0];
  m.p.assign(static_cast<std::size_t>(i_max_) + 1, 0.0);
  int j = 1;
  for (int i = config_.pin_p0 ? 1 : 0; i <= i_max_; ++i, ++j) {
    m.p[static_cast<std::size_t>(i)] = transformed ? logistic(theta[j]) : theta[j];
  }
  return m;
}

Eigen::VectorXd FitProblem::theta_of(const EpdcModel& model) const {
  Eigen::VectorXd theta(n_free_);
  const bool transformed = config_.parameterization == Parameterization::transformed;
  const double eta = std::min(std::max(model.eta, kEtaMin), 1.0);
  theta[0] = transformed ? std::log(eta) : eta;
  int j = 1;
  for (int i = config_.pin_p0 ? 1 : 0; i <= i_max_; ++i, ++j) {
    const double p = std::min(std::max(model.p[static_cast<std::size_t>(i)], 0.0), 1.0);
    theta[j] = transformed ? logit_clamped(p) : p;
  }
  return theta;
}

Eigen::MatrixXd FitProblem::raw_jacobian(const EpdcModel& model) const {
  const int n = static_cast<int>(data_.size());
  Eigen::MatrixXd jac(n, n_free_);
  for (int k = 0; k < n; ++k) {
    const auto& pt = data_[static_cast<std::size_t>(k)];
    const auto g = click_probability_gradient(model, pt.mean_photons);
    double factor;  // d r_k / d m
    if (config_.estimator == Estimator::weighted_least_squares) {
      factor = -1.0 / pt.sigma;
    } else {
      factor = deviance_residual(pt.clicks, pt.trials, g.value).dr_dm;
    }
    jac(k, 0) = factor * g.d_eta;
    int j = 1;
    for (int i = config_.pin_p0 ? 1 : 0; i <= i_max_; ++i, ++j) {
      jac(k, j) = factor * g.d_p[static_cast<std::size_t>(i)];
    }
  }
  return jac;
}

void FitProblem::evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd& residuals,
                          Eigen::MatrixXd& jacobian) const {
  const EpdcModel model = model_at(theta);
  const int n = static_cast<int>(data_.size());
  residuals.resize(n);
  jacobian.resize(n, n_free_);

  // Chain-rule factors from raw (eta, p) to the optimization coordinates.
  Eigen::VectorXd scale(n_free_);
  if (config_.parameterization == Parameterization::transformed) {
    scale[0] = model.eta;  // d eta / d log(eta)
    int j = 1;
    for (int i = config_.pin_p0 ? 1 : 0; i <= i_max_; ++i, ++j) {
      scale[j] = logistic_slope(theta[j]);
    }
  } else {
    scale.setOnes();
  }

  for (int k = 0; k < n; ++k) {
    const auto& pt = data_[static_cast<std::size_t>(k)];
    const auto g = click_probability_gradient(model, pt.mean_photons);
    double factor;
    if (config_.estimator == Estimator::weighted_least_squares) {
      residuals[k] = (pt.rate - g.value) / pt.sigma;
      factor = -1.0 / pt.sigma;
    } else {
      const auto dev = deviance_residual(pt.clicks, pt.trials, g.value);
      residuals[k] = dev.r;
      factor = dev.dr_dm;
    }
    jacobian(k, 0) = factor * g.d_eta * scale[0];
    int j = 1;
    for (int i = config_.pin_p0 ? 1 : 0; i <= i_max_; ++i, ++j) {
      jacobian(k, j) = factor * g.d_p[static_cast<std::size_t>(i)] * scale[j];
    }
  }
}

double FitProblem::cost(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd r;
  Eigen::MatrixXd j;
  evaluate(theta, r, j);
  return r.squaredNorm();
}

Eigen::VectorXd FitProblem::heuristic_start() const {
  // eta_0 from the small-N slope of R/N (exact for a linear detector),
  // p ramp p_i = min(1, i / (i_max + 1)).
  std::vector<const ClickStatistics*> pts;
  pts.reserve(data_.size());
  for (const auto& pt : data_) pts.push_back(&pt);
  std::sort(pts.begin(), pts.end(), [](const ClickStatistics* a, const ClickStatistics* b) {
    return a->mean_photons < b->mean_photons;
  });
  std::vector<double> slopes;
  for (const auto* pt : pts) {
    if (pt->mean_photons > 0.0 && pt->rate > 0.0) {
      slopes.push_back(pt->rate / pt->mean_photons);
      if (slopes.size() == 3) break;
    }
  }
  double eta0 = slopes.empty() ? 1e-6 : median_of(slopes);
  eta0 = std::min(std::max(eta0, 1e-9), 1.0);

  EpdcModel start;
  start.eta = eta0;
  start.p.assign(static_cast<std::size_t>(i_max_) + 1, 0.0);
  for (int i = 0; i <= i_max_; ++i) {
    // Keep the ramp strictly inside (0, 1): a start on the boundary of the
    // logit transform has no gradient to leave it.
    const double ramp = static_cast<double>(i) / static_cast<double>(i_max_ + 1);
    start.p[static_cast<std::size_t>(i)] = std::min(std::max(ramp, 0.02), 0.98);
  }
  return theta_of(start);
}

Eigen::VectorXd FitProblem::dominant_start(int order) const {
  // For an order-dominant detector R ~ p_d c_d(eta N) rises as the d-th
  // power of N while mu << 1, so the small-N slope of R/N (the generic
  // heuristic) underestimates eta by orders of magnitude and the true basin
  // can be missed. Invert the leading term R = p (eta N)^d / d! with p = 1/2
  // at the first point measured well above its counting noise.
  const ClickStatistics* pick = nullptr;
  const ClickStatistics* fallback = nullptr;
  std::vector<const ClickStatistics*> pts;
  pts.reserve(data_.size());
  for (const auto& pt : data_) pts.push_back(&pt);
  std::sort(pts.begin(), pts.end(), [](const ClickStatistics* a, const ClickStatistics* b) {
    return a->mean_photons < b->mean_photons;
  });
  for (const auto* pt : pts) {
    if (pt->mean_photons <= 0.0 || pt->rate <= 0.0) continue;
    if (fallback == nullptr || pt->rate > fallback->rate) fallback = pt;
    if (pt->rate >= 3.0 * pt->sigma) {
      pick = pt;
      break;
    }
  }
  if (pick == nullptr) pick = fallback;
  if (pick == nullptr) return heuristic_start();  // no positive rate anywhere

  double d_factorial = 1.0;
  for (int k = 2; k <= order; ++k) d_factorial *= static_cast<double>(k);
  const double mu = std::pow(2.0 * d_factorial * pick->rate, 1.0 / static_cast<double>(order));

  EpdcModel start;
  start.eta = std::min(std::max(mu / pick->mean_photons, 1e-9), 1.0);
  start.p.assign(static_cast<std::size_t>(i_max_) + 1, 0.0);
  for (int i = 0; i <= i_max_; ++i) {
    start.p[static_cast<std::size_t>(i)] = i < order ? 0.02 : (i == order ? 0.5 : 0.98);
  }
  return theta_of(start);
}

Eigen::VectorXd FitProblem::halton_start(std::uint64_t index) const {
  EpdcModel m;
  m.p.assign(static_cast<std::size_t>(i_max_) + 1, 0.0);
  const double q0 = radical_inverse(index, kPrimes[0]);
  m.eta = std::exp(kLogEtaMin * (1.0 - q0));  // log-uniform over the eta box
  int j = 1;
  for (int i = config_.pin_p0 ? 1 : 0; i <= i_max_; ++i, ++j) {
    m.p[static_cast<std::size_t>(i)] =
        radical_inverse(index, kPrimes[j % (sizeof(kPrimes) / sizeof(kPrimes[0]))]);
  }
  return theta_of(m);
}

namespace {

struct CovarianceResult {
  Eigen::MatrixXd covariance;
  std::vector<int> unidentifiable;
};

CovarianceResult covariance_from_jacobian(const Eigen::MatrixXd& raw_jac, double scale) {
  const Eigen::Index n = raw_jac.cols();
  const Eigen::MatrixXd a = raw_jac.transpose() * raw_jac;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd& vals = eig.eigenvalues();
  const Eigen::MatrixXd& vecs = eig.eigenvectors();
  const double lmax = std::max(vals.maxCoeff(), 0.0);
  const double cutoff = lmax * 1e-13;

  CovarianceResult out;
  Eigen::VectorXd inv(n);
  std::vector<bool> dead(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (vals[i] <= cutoff) {
      inv[i] = 0.0;  // pseudo-inverse over the identifiable subspace
      for (Eigen::Index j = 0; j < n; ++j) {
        if (std::abs(vecs(j, i)) >= 0.25) dead[static_cast<std::size_t>(j)] = true;
      }
    } else {
      inv[i] = 1.0 / vals[i];
    }
  }
  Eigen::MatrixXd cov = vecs * inv.asDiagonal() * vecs.transpose() * scale;
  out.covariance = 0.5 * (cov + cov.transpose());
  for (Eigen::Index j = 0; j < n; ++j) {
    if (dead[static_cast<std::size_t>(j)]) out.unidentifiable.push_back(static_cast<int>(j));
  }
  return out;
}

}  // namespace

CandidateFit fit_candidate(const std::vector<ClickStatistics>& data, int i_max,
                           const FitConfig& config) {
  if (i_max < 0) throw validation_error("fit_candidate: i_max must be >= 0");
  validate_dataset(data);
  const int n = static_cast<int>(data.size());
  const int n_free = 1 + (i_max + 1) - (config.pin_p0 ? 1 : 0);
  if (n < i_max + 3) {
    std::ostringstream msg;
    msg << "fit_candidate: need at least " << (i_max + 3) << " data points for i_max = "
        << i_max << ", got " << n;
    throw arity_error(msg.str());
  }

  double n_min = 0.0, n_max = 0.0;
  bool have_positive = false;
  for (const auto& pt : data) {
    if (pt.mean_photons <= 0.0) continue;
    if (!have_positive) {
      n_min = n_max = pt.mean_photons;
      have_positive = true;
    } else {
      n_min = std::min(n_min, pt.mean_photons);
      n_max = std::max(n_max, pt.mean_photons);
    }
  }
  if (!have_positive || n_max / n_min < 100.0 * (1.0 - 1e-9)) {
    throw validation_error(
        "fit_candidate: data must span at least two decades of mean_photons");
  }

  bool all_equal = true;
  for (const auto& pt : data) {
    if (pt.rate != data.front().rate) {
      all_equal = false;
      break;
    }
  }
  if (all_equal) {
    throw identifiability_error(
        "fit_candidate: degenerate data (all rates identical); eta and p are not "
        "jointly identifiable");
  }

  FitProblem problem(data, i_max, config);
  TrustRegionOptions opts;
  opts.gradient_tol = config.gradient_tol;
  opts.step_tol = config.step_tol;
  opts.max_iterations = config.max_iterations;

  auto eval = [&problem](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    problem.evaluate(x, r, j);
  };

  const std::uint64_t halton_base = 1 + 977 * (config.seed % 4096);
  int total_iterations = 0;
  bool have_best = false, have_converged = false;
  TrustRegionResult best;

  // Start roster: the generic slope heuristic, one dominant-order start per
  // candidate order (cheap insurance against multi-photon-dominant data whose
  // small-N slope is uninformative), then the Halton block.
  const int n_structured = 1 + i_max;
  const int n_starts = n_structured + std::max(config.multistart_count, 0);
  for (int s = 0; s < n_starts; ++s) {
    const Eigen::VectorXd x0 =
        s == 0 ? problem.heuristic_start()
        : s < n_structured
            ? problem.dominant_start(s)
            : problem.halton_start(halton_base +
                                   static_cast<std::uint64_t>(s - n_structured + 1));
    TrustRegionResult run =
        minimize_least_squares(eval, x0, problem.lower(), problem.upper(), opts);
    total_iterations += run.iterations;
    const bool better = !have_best || run.cost < best.cost * (1.0 - 1e-12);
    if (run.converged && (!have_converged || better)) {
      best = run;
      have_converged = true;
      have_best = true;
    } else if (!have_converged && better) {
      best = run;
      have_best = true;
    }
  }

  // Assemble the fit at the best optimum, snapping parameters that landed
  // within the snap width of a box bound and recomputing chi^2 at the
  // reported model.
  EpdcModel model = problem.model_at(best.x);
  CandidateFit fit;
  fit.p0_pinned = config.pin_p0;
  fit.n_points = n;
  fit.n_free = n_free;
  fit.at_boundary.assign(static_cast<std::size_t>(n_free), false);
  fit.free_names.push_back("eta");

  if (1.0 - model.eta < kBoundarySnap) {
    model.eta = 1.0;
    fit.at_boundary[0] = true;
  } else if (model.eta <= kEtaMin * (1.0 + 1e-6)) {
    // At the numerical floor of the eta box; flagged but not snapped, the
    // floor is an optimizer guard rather than a physical bound.
    fit.at_boundary[0] = true;
  }
  int j = 1;
  for (int i = config.pin_p0 ? 1 : 0; i <= i_max; ++i, ++j) {
    double& p = model.p[static_cast<std::size_t>(i)];
    if (p < kBoundarySnap) {
      p = 0.0;
      fit.at_boundary[static_cast<std::size_t>(j)] = true;
    } else if (1.0 - p < kBoundarySnap) {
      p = 1.0;
      fit.at_boundary[static_cast<std::size_t>(j)] = true;
    }
    std::ostringstream name;
    name << "p_" << i;
    fit.free_names.push_back(name.str());
  }

  fit.model = model;
  // theta_of saturates p = 0/1 at the logit clamp; evaluate chi2 at the
  // exact snapped model through the raw parameterization instead.
  {
    FitConfig raw_cfg = config;
    raw_cfg.parameterization = Parameterization::raw;
    FitProblem raw_problem(data, i_max, raw_cfg);
    fit.chi2 = raw_problem.cost(raw_problem.theta_of(model));
  }
  fit.chi2_reduced = fit.chi2 / static_cast<double>(n - n_free);
  fit.converged = have_converged;
  fit.iterations = total_iterations;
  fit.termination = termination_name(best.termination);
  fit.projected_gradient_norm = best.projected_gradient_norm;

  const double scale = config.estimator == Estimator::weighted_least_squares
                           ? fit.chi2_reduced
                           : 1.0;
  auto cov = covariance_from_jacobian(problem.raw_jacobian(model), scale);
  fit.covariance = std::move(cov.covariance);
  fit.unidentifiable = std::move(cov.unidentifiable);

  if (!have_converged) {
    std::ostringstream msg;
    msg << "fit_candidate: optimizer did not converge from any of " << n_starts
        << " starts (best termination: " << fit.termination
        << ", chi2 = " << fit.chi2 << ")";
    throw convergence_error(msg.str(), fit);
  }
  return fit;
}

std::vector<double> standard_errors(const CandidateFit& fit) {
  if (!fit.converged) {
    throw validation_error("standard_errors: fit did not converge");
  }
  if (!fit.unidentifiable.empty()) {
    std::ostringstream msg;
    msg << "standard_errors: covariance is singular; unidentifiable parameters:";
    for (int idx : fit.unidentifiable) {
      msg << ' ' << fit.free_names[static_cast<std::size_t>(idx)];
    }
    throw identifiability_error(msg.str());
  }
  std::vector<double> out(static_cast<std::size_t>(fit.covariance.rows()));
  for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = std::sqrt(std::max(fit.covariance(i, i), 0.0));
  }
  return out;
}

}  // namespace epdc
