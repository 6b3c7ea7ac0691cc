// ============================================================================
// click_data.hpp -- observed click statistics and counting-error models
// ============================================================================
#pragma once
#include <cstdint>
#include <vector>

namespace epdc {

/// Error model for the per-pulse click probability R = clicks/trials.
enum class WeightScheme {
  poisson_counts,  // sigma = sqrt(max(clicks, 1)) / trials
  binomial,        // sigma = sqrt(R(1-R)/trials + 1/trials^2)
};

/// Standard error of the click rate under the given scheme. Positive for
/// every clicks in [0, trials].
double count_sigma(long long clicks, long long trials, WeightScheme scheme);

/// One probe setting at one bias current: mean photon number of the probe,
/// raw counts, and the derived rate with its standard error.
struct ClickStatistics {
  double mean_photons = 0.0;
  long long clicks = 0;
  long long trials = 1;
  double rate = 0.0;   // clicks / trials (or an exact model value in tests)
  double sigma = 1.0;  // standard error of rate, > 0

  /// Builds the record from raw counts, deriving rate and sigma.
  static ClickStatistics from_counts(double mean_photons, long long clicks,
                                     long long trials, WeightScheme scheme);

  void validate() const;
};

void validate_dataset(const std::vector<ClickStatistics>& data);

}  // namespace epdc
