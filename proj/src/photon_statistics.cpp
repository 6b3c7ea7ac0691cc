#include "epdc/photon_statistics.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>

#include "epdc/errors.hpp"

namespace epdc {

namespace {

// Poisson weights c_0..c_K by upward recurrence in extended precision.
// For mu large enough that expl(-mu) underflows, every prefix weight is
// far below any representable double and zeros are the correct answer.
std::vector<long double> poisson_weight_prefix(int k_max, long double mu) {
  std::vector<long double> c(static_cast<std::size_t>(k_max) + 1);
  c[0] = std::exp(-mu);
  for (int i = 1; i <= k_max; ++i) {
    c[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i - 1)] * mu / i;
  }
  return c;
}

void check_mean_photons(double n) {
  if (!(n >= 0.0) || !std::isfinite(n)) {
    std::ostringstream msg;
    msg << "mean_photons = " << n << " must be finite and >= 0";
    throw std::domain_error(msg.str());
  }
}

}  // namespace

double poisson_weight(int i, double mu) {
  if (i < 0) {
    throw std::domain_error("poisson_weight: photon number i must be >= 0");
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    std::ostringstream msg;
    msg << "poisson_weight: mu = " << mu << " must be finite and >= 0";
    throw std::domain_error(msg.str());
  }
  if (mu == 0.0) return i == 0 ? 1.0 : 0.0;
  const long double mul = mu;
  const long double log_w =
      -mul + static_cast<long double>(i) * std::log(mul) - std::lgamma(static_cast<long double>(i) + 1.0L);
  return static_cast<double>(std::exp(log_w));
}

double poisson_upper_tail(int i_max, double mu) {
  if (i_max < 0) {
    throw std::domain_error("poisson_upper_tail: i_max must be >= 0");
  }
  if (!(mu >= 0.0) || !std::isfinite(mu)) {
    throw std::domain_error("poisson_upper_tail: mu must be finite and >= 0");
  }
  if (mu == 0.0) return 0.0;
  // P[Poisson(mu) > K] = P(K+1, mu), the regularized lower incomplete gamma.
  return boost::math::gamma_p(static_cast<double>(i_max) + 1.0, mu);
}

double click_probability(const EpdcModel& model, double mean_photons) {
  model.validate();
  check_mean_photons(mean_photons);
  const int k = model.i_max();
  const long double mu = static_cast<long double>(model.eta) * mean_photons;
  const auto c = poisson_weight_prefix(k, mu);
  long double acc = 0.0L;
  for (int i = 0; i <= k; ++i) {
    acc += static_cast<long double>(model.p[static_cast<std::size_t>(i)]) *
           c[static_cast<std::size_t>(i)];
  }
  acc += static_cast<long double>(poisson_upper_tail(k, static_cast<double>(mu)));
  const double r = static_cast<double>(acc);
  return r > 1.0 ? 1.0 : r;
}

ClickProbabilityGradient click_probability_gradient(const EpdcModel& model,
                                                    double mean_photons) {
  model.validate();
  check_mean_photons(mean_photons);
  const int k = model.i_max();
  const long double mu = static_cast<long double>(model.eta) * mean_photons;
  const auto c = poisson_weight_prefix(k, mu);

  ClickProbabilityGradient g;
  g.d_p.resize(static_cast<std::size_t>(k) + 1);
  long double acc = 0.0L;
  // dR/dmu = sum_i p_i (c_{i-1} - c_i) + c_K, from d c_i/dmu = c_{i-1} - c_i
  // and the telescoped derivative of the tail.
  long double dmu = 0.0L;
  for (int i = 0; i <= k; ++i) {
    const long double pi = model.p[static_cast<std::size_t>(i)];
    const long double ci = c[static_cast<std::size_t>(i)];
    acc += pi * ci;
    const long double prev = i > 0 ? c[static_cast<std::size_t>(i - 1)] : 0.0L;
    dmu += pi * (prev - ci);
    g.d_p[static_cast<std::size_t>(i)] = static_cast<double>(ci);
  }
  dmu += c[static_cast<std::size_t>(k)];
  acc += static_cast<long double>(poisson_upper_tail(k, static_cast<double>(mu)));

  g.value = static_cast<double>(acc);
  if (g.value > 1.0) g.value = 1.0;
  g.d_eta = static_cast<double>(dmu * mean_photons);
  return g;
}

double predict_response(const EpdcModel& model, const PhotonNumberDistribution& dist) {
  model.validate();
  dist.validate();
  const int k_max = model.i_max();
  const long double eta = model.eta;
  const long double log_eta = std::log(eta);
  const long double log_1m_eta = eta < 1.0L ? std::log1p(-eta) : 0.0L;

  long double total = 0.0L;
  for (std::size_t i = 0; i < dist.weights.size(); ++i) {
    const double w = dist.weights[i];
    if (w == 0.0) continue;
    const int n = static_cast<int>(i);
    long double response = 0.0L;

    if (model.eta == 1.0) {
      // No thinning: all n photons participate.
      response = model.click_given_photons(n);
    } else {
      const int k_top = n < k_max ? n : k_max;
      const long double lgn = std::lgamma(static_cast<long double>(n) + 1.0L);
      for (int k = 0; k <= k_top; ++k) {
        const long double log_pmf =
            lgn - std::lgamma(static_cast<long double>(k) + 1.0L) -
            std::lgamma(static_cast<long double>(n - k) + 1.0L) +
            static_cast<long double>(k) * log_eta +
            static_cast<long double>(n - k) * log_1m_eta;
        response += std::exp(log_pmf) *
                    static_cast<long double>(model.p[static_cast<std::size_t>(k)]);
      }
      if (n > k_max) {
        // P[Binom(n, eta) > k_max] via the regularized incomplete beta.
        response += static_cast<long double>(
            boost::math::ibeta(static_cast<double>(k_max) + 1.0,
                               static_cast<double>(n - k_max), model.eta));
      }
    }
    total += static_cast<long double>(w) * response;
  }
  const double r = static_cast<double>(total);
  return r > 1.0 ? 1.0 : r;
}

}  // namespace epdc
