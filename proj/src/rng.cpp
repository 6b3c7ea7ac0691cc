#include "epdc/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace epdc {

namespace {

long double binomial_log_pmf(long long k, long long n, long double p) {
  return std::lgamma(static_cast<long double>(n) + 1.0L) -
         std::lgamma(static_cast<long double>(k) + 1.0L) -
         std::lgamma(static_cast<long double>(n - k) + 1.0L) +
         static_cast<long double>(k) * std::log(p) +
         static_cast<long double>(n - k) * std::log1p(-p);
}

}  // namespace

long long RandomStream::binomial(long long trials, double prob) {
  if (trials < 0 || !(prob >= 0.0) || prob > 1.0 || !std::isfinite(prob)) {
    std::ostringstream msg;
    msg << "RandomStream::binomial: invalid trials = " << trials << " or prob = " << prob;
    throw std::domain_error(msg.str());
  }
  const double u = next_double();
  if (trials == 0 || prob == 0.0) return 0;
  if (prob == 1.0) return trials;

  const long double p = prob;
  const long double q = 1.0L - p;
  const long long mode =
      static_cast<long long>(std::floor((static_cast<long double>(trials) + 1.0L) * p));
  const long long m = mode > trials ? trials : mode;

  // Two-sided walk from the mode: a fixed enumeration order makes inversion
  // exact, and almost all mass lies within a few standard deviations.
  const long double pmf_mode = std::exp(binomial_log_pmf(m, trials, p));
  long double cum = pmf_mode;
  const long double target = static_cast<long double>(u);
  if (target < cum) return m;

  long long lo = m, hi = m;
  long double pmf_lo = pmf_mode, pmf_hi = pmf_mode;
  while (lo > 0 || hi < trials) {
    if (hi < trials) {
      pmf_hi *= (static_cast<long double>(trials - hi) / static_cast<long double>(hi + 1)) * (p / q);
      ++hi;
      cum += pmf_hi;
      if (target < cum) return hi;
    }
    if (lo > 0) {
      pmf_lo *= (static_cast<long double>(lo) / static_cast<long double>(trials - lo + 1)) * (q / p);
      --lo;
      cum += pmf_lo;
      if (target < cum) return lo;
    }
  }
  // u fell in the last ~1e-18 of cumulative mass lost to rounding.
  return hi;
}

}  // namespace epdc
