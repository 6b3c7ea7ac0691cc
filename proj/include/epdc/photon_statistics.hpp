// ============================================================================
// photon_statistics.hpp -- stable evaluation of the coherent-state click model
//
// The click probability of a lossy threshold-like detector probed with a
// coherent state of mean photon number N is
//
//   R(N) = sum_{i=0}^{i_max} p_i c_i(mu) + P[Poisson(mu) > i_max],  mu = eta N
//
// with Poisson weights c_i(mu) = e^{-mu} mu^i / i!. This complement form adds
// nonnegative terms only, so R keeps full relative accuracy down to the
// R ~ 1e-6 regime where the textbook one-minus-a-sum expression cancels.
// ============================================================================
#pragma once
#include <vector>

#include "epdc/model.hpp"

namespace epdc {

/// Poisson weight c_i(mu) = e^{-mu} mu^i / i!, evaluated in log space
/// (-mu + i ln mu - lnGamma(i+1), exponentiated) with extended-precision
/// intermediates. mu = 0 returns 1 for i = 0 and 0 otherwise.
/// Throws std::domain_error for negative i or negative/non-finite mu.
double poisson_weight(int i, double mu);

/// Upper Poisson tail P[Poisson(mu) > i_max], i.e. the regularized
/// incomplete gamma P(i_max + 1, mu).
double poisson_upper_tail(int i_max, double mu);

/// Click probability R(N) for a coherent probe of mean photon number N.
/// Guaranteed finite and NaN-free for mu = eta*N up to 1e6 and beyond.
/// Throws validation_error for an invalid model, std::domain_error for
/// negative mean_photons.
double click_probability(const EpdcModel& model, double mean_photons);

/// Click probability together with its partial derivatives, for fitting.
struct ClickProbabilityGradient {
  double value = 0.0;
  double d_eta = 0.0;
  std::vector<double> d_p;  // d_p[i] = dR/dp_i = c_i(mu)
};

ClickProbabilityGradient click_probability_gradient(const EpdcModel& model,
                                                    double mean_photons);

/// Detector response to an arbitrary (diagonal) photon-number distribution.
/// Each incident Fock component i is binomially thinned with retention
/// probability eta before the per-photon-number click probabilities apply:
///
///   R = sum_i w_i [ sum_{k<=min(i,i_max)} Binom(k; i, eta) p_k
///                   + P[Binom(i, eta) > i_max] ]
///
/// Throws validation_error for an invalid model or distribution.
double predict_response(const EpdcModel& model, const PhotonNumberDistribution& dist);

}  // namespace epdc
