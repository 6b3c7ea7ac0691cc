// ============================================================================
// estimation.hpp -- box-constrained weighted least-squares model fitting
//
// Fits an EpdcModel of fixed truncation order to click statistics by
// minimizing chi^2 = sum_k ((R_k - R_model(N_k)) / sigma_k)^2 with
// eta in (1e-12, 1] and every p_i in [0, 1].
//
// The default path optimizes in transformed coordinates (log eta, logit p_i
// clamped at +/-40) where the box constraints all but disappear; a raw
// box-projected parameterization is available for cross-checks. Fits are
// deterministic: a slope heuristic start, one dominant-order start per
// candidate order, and a block of low-discrepancy (Halton) multi-starts
// selected by the config seed.
// ============================================================================
#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "epdc/click_data.hpp"
#include "epdc/errors.hpp"
#include "epdc/model.hpp"
#include "epdc/trust_region.hpp"

namespace epdc {

enum class Estimator {
  weighted_least_squares,  // chi^2 on (rate, sigma)
  binomial_ml,             // binomial deviance on raw counts
};

enum class Parameterization { transformed, raw };

struct FitConfig {
  double gradient_tol = 1e-10;
  double step_tol = 1e-12;
  int max_iterations = 500;  // per start
  int multistart_count = 8;  // Halton starts in addition to the heuristic one
  WeightScheme weights = WeightScheme::poisson_counts;
  Estimator estimator = Estimator::weighted_least_squares;
  Parameterization parameterization = Parameterization::transformed;
  bool pin_p0 = false;  // fix p_0 = 0 instead of fitting dark counts
  std::uint64_t seed = 0;  // shifts the low-discrepancy multi-start block
};

/// Result of fitting one truncation order.
struct CandidateFit {
  EpdcModel model;
  double chi2 = 0.0;          // weighted RSS (binomial deviance in ML mode)
  double chi2_reduced = 0.0;  // chi2 / (n_points - n_free)
  Eigen::MatrixXd covariance;  // over free parameters, order (eta, p_0, ..)
  bool converged = false;
  int iterations = 0;  // summed over all starts
  std::string termination;
  double projected_gradient_norm = 0.0;
  int n_points = 0;
  int n_free = 0;
  bool p0_pinned = false;
  std::vector<bool> at_boundary;        // per free parameter
  std::vector<int> unidentifiable;      // free-parameter indices, empty if well-posed
  std::vector<std::string> free_names;  // "eta", "p_0", ...
};

/// Optimizer failed to converge from every start; carries the best state
/// reached so callers can inspect the near-miss.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, CandidateFit best)
      : std::runtime_error(what), best_so_far(std::move(best)) {}
  CandidateFit best_so_far;
};

/// Residual/Jacobian assembly for one dataset and truncation order, in the
/// configured parameterization. Exposed so tests can check gradients
/// against finite differences.
class FitProblem {
 public:
  FitProblem(std::vector<ClickStatistics> data, int i_max, const FitConfig& config);

  int dimension() const { return n_free_; }
  const Eigen::VectorXd& lower() const { return lo_; }
  const Eigen::VectorXd& upper() const { return hi_; }

  /// Residuals and Jacobian at theta (see class comment for the layout:
  /// theta[0] is the eta coordinate, then one coordinate per free p_i).
  void evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd& residuals,
                Eigen::MatrixXd& jacobian) const;

  double cost(const Eigen::VectorXd& theta) const;

  EpdcModel model_at(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd theta_of(const EpdcModel& model) const;

  Eigen::VectorXd heuristic_start() const;

  /// Start tailored to a detector dominated by `order`-photon clicks, with
  /// eta obtained by inverting the leading term R = p (eta N)^order / order!
  /// at the first well-measured data point.
  Eigen::VectorXd dominant_start(int order) const;

  Eigen::VectorXd halton_start(std::uint64_t index) const;

  /// Jacobian of the residuals with respect to the raw free parameters
  /// (eta, p_i) at the given model; used for covariance estimation.
  Eigen::MatrixXd raw_jacobian(const EpdcModel& model) const;

  const std::vector<ClickStatistics>& data() const { return data_; }
  int i_max() const { return i_max_; }

 private:
  std::vector<ClickStatistics> data_;
  int i_max_;
  FitConfig config_;
  int n_free_;
  Eigen::VectorXd lo_, hi_;
};

/// Fits truncation order i_max. Throws arity_error for too few points,
/// validation_error for malformed data, identifiability_error for
/// degenerate data, convergence_error when no start converges.
CandidateFit fit_candidate(const std::vector<ClickStatistics>& data, int i_max,
                           const FitConfig& config = {});

/// Square roots of the covariance diagonal, ordered (eta, p_0, ..., p_imax)
/// over the free parameters. Throws identifiability_error naming the
/// unidentifiable subset when the covariance is singular.
std::vector<double> standard_errors(const CandidateFit& fit);

}  // namespace epdc
