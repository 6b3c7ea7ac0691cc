#include "epdc/click_data.hpp"

#include <cmath>
#include <sstream>

#include "epdc/errors.hpp"

namespace epdc {

double count_sigma(long long clicks, long long trials, WeightScheme scheme) {
  const double n = static_cast<double>(trials);
  switch (scheme) {
    case WeightScheme::poisson_counts: {
      const double c = static_cast<double>(clicks < 1 ? 1 : clicks);
      return std::sqrt(c) / n;
    }
    case WeightScheme::binomial: {
      const double r = static_cast<double>(clicks) / n;
      return std::sqrt(r * (1.0 - r) / n + 1.0 / (n * n));
    }
  }
  return 0.0;  // unreachable
}

ClickStatistics ClickStatistics::from_counts(double mean_photons, long long clicks,
                                             long long trials, WeightScheme scheme) {
  ClickStatistics s;
  s.mean_photons = mean_photons;
  s.clicks = clicks;
  s.trials = trials;
  s.rate = static_cast<double>(clicks) / static_cast<double>(trials);
  s.sigma = count_sigma(clicks, trials, scheme);
  s.validate();
  return s;
}

void ClickStatistics::validate() const {
  std::ostringstream msg;
  if (!(mean_photons >= 0.0) || !std::isfinite(mean_photons)) {
    msg << "ClickStatistics: mean_photons = " << mean_photons << " must be >= 0";
    throw validation_error(msg.str());
  }
  if (trials <= 0) {
    msg << "ClickStatistics: trials = " << trials << " must be positive";
    throw validation_error(msg.str());
  }
  if (clicks < 0 || clicks > trials) {
    msg << "ClickStatistics: clicks = " << clicks << " must lie in [0, trials = " << trials << "]";
    throw validation_error(msg.str());
  }
  if (!(rate >= 0.0) || rate > 1.0) {
    msg << "ClickStatistics: rate = " << rate << " must lie in [0, 1]";
    throw validation_error(msg.str());
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    msg << "ClickStatistics: sigma = " << sigma << " must be positive";
    throw validation_error(msg.str());
  }
}

void validate_dataset(const std::vector<ClickStatistics>& data) {
  for (const auto& point : data) point.validate();
}

}  // namespace epdc
