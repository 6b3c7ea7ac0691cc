// ============================================================================
// synthetic.hpp -- ground-truth simulator and independent brute-force oracle
//
// generate_dataset realizes the pulsed-counting measurement in silico:
// for each probe setting, clicks ~ Binomial(trials, R_truth). Datasets are
// reproducible across platforms and thread counts (per-point substreams).
//
// brute_force_click_probability is the test-side oracle: direct term-by-term
// summation of p_i c_i in extended precision, sharing no code with the
// stable evaluator's incomplete-gamma tail path.
// ============================================================================
#pragma once
#include <cstdint>
#include <vector>

#include "epdc/click_data.hpp"
#include "epdc/model.hpp"

namespace epdc {

struct SyntheticScenario {
  EpdcModel truth;
  std::vector<double> probe_grid;  // mean photon numbers, strictly increasing
  long long trials_per_point = 1;
  std::uint64_t seed = 0;
  WeightScheme weights = WeightScheme::poisson_counts;
  double power_jitter = 0.0;  // optional multiplicative probe jitter (sigma fraction)

  void validate() const;
};

/// Strictly increasing log-spaced grid, min > 0.
std::vector<double> log_spaced_grid(double min_value, double max_value, int points);

/// Draws one dataset; deterministic per (seed, point index).
std::vector<ClickStatistics> generate_dataset(const SyntheticScenario& scenario);

/// Direct-summation oracle: sum_{i<=cutoff} p_i c_i(mu) with the unit tail
/// beyond i_max, accumulated in extended precision. Throws tail_mass_error
/// when the neglected Poisson mass beyond the cutoff is not < 1e-14.
double brute_force_click_probability(const EpdcModel& truth, double mean_photons,
                                     int photon_cutoff);

}  // namespace epdc
