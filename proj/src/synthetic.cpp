#include "epdc/synthetic.hpp"

#include <cmath>
#include <cstddef>
#include <sstream>

#include "epdc/errors.hpp"
#include "epdc/photon_statistics.hpp"
#include "epdc/rng.hpp"

namespace epdc {

void SyntheticScenario::validate() const {
  truth.validate();
  if (probe_grid.empty()) {
    throw validation_error("SyntheticScenario: probe_grid must be non-empty");
  }
  double prev = 0.0;
  for (std::size_t k = 0; k < probe_grid.size(); ++k) {
    if (!(probe_grid[k] > 0.0) || !std::isfinite(probe_grid[k])) {
      std::ostringstream msg;
      msg << "SyntheticScenario: probe_grid[" << k << "] = " << probe_grid[k]
          << " must be positive and finite";
      throw validation_error(msg.str());
    }
    if (k > 0 && probe_grid[k] <= prev) {
      std::ostringstream msg;
      msg << "SyntheticScenario: probe_grid must be strictly increasing (index " << k << ")";
      throw validation_error(msg.str());
    }
    prev = probe_grid[k];
  }
  if (trials_per_point < 1) {
    throw validation_error("SyntheticScenario: trials_per_point must be >= 1");
  }
  if (!(power_jitter >= 0.0) || power_jitter >= 1.0) {
    throw validation_error("SyntheticScenario: power_jitter must lie in [0, 1)");
  }
}

std::vector<double> log_spaced_grid(double min_value, double max_value, int points) {
  if (!(min_value > 0.0) || !(max_value > min_value) || points < 2) {
    throw validation_error("log_spaced_grid: need 0 < min < max and points >= 2");
  }
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double lmin = std::log(min_value);
  const double lmax = std::log(max_value);
  for (int k = 0; k < points; ++k) {
    grid[static_cast<std::size_t>(k)] =
        std::exp(lmin + (lmax - lmin) * static_cast<double>(k) / (points - 1));
  }
  grid.front() = min_value;
  grid.back() = max_value;
  return grid;
}

std::vector<ClickStatistics> generate_dataset(const SyntheticScenario& scenario) {
  scenario.validate();
  std::vector<ClickStatistics> data;
  data.reserve(scenario.probe_grid.size());
  for (std::size_t k = 0; k < scenario.probe_grid.size(); ++k) {
    RandomStream stream(scenario.seed, static_cast<std::uint64_t>(k));
    double n_photons = scenario.probe_grid[k];
    if (scenario.power_jitter > 0.0) {
      // Box-Muller from two stream uniforms; multiplicative probe drift.
      const double u1 = stream.next_double();
      const double u2 = stream.next_double();
      const double z =
          std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(6.283185307179586477 * u2);
      double factor = 1.0 + scenario.power_jitter * z;
      if (factor < 0.0) factor = 0.0;
      n_photons *= factor;
    }
    const double r = click_probability(scenario.truth, n_photons);
    const long long clicks = stream.binomial(scenario.trials_per_point, r);
    data.push_back(ClickStatistics::from_counts(scenario.probe_grid[k], clicks,
                                                scenario.trials_per_point,
                                                scenario.weights));
  }
  return data;
}

double brute_force_click_probability(const EpdcModel& truth, double mean_photons,
                                     int photon_cutoff) {
  truth.validate();
  if (!(mean_photons >= 0.0) || !std::isfinite(mean_photons)) {
    throw std::domain_error("brute_force_click_probability: mean_photons must be >= 0");
  }
  if (photon_cutoff < truth.i_max()) {
    throw tail_mass_error("brute_force_click_probability: cutoff below i_max");
  }
  const long double mu = static_cast<long double>(truth.eta) * mean_photons;

  long double term = std::exp(-mu);  // c_0
  long double sum = term * static_cast<long double>(truth.click_given_photons(0));
  long double mass = term;
  for (int i = 1; i <= photon_cutoff; ++i) {
    term *= mu / i;
    sum += term * static_cast<long double>(truth.click_given_photons(i));
    mass += term;
  }

  // Geometric bound on the neglected mass: sum_{i>K} c_i <= c_{K+1} / (1 - mu/(K+2)).
  const long double next = term * mu / (photon_cutoff + 1);
  const long double ratio = mu / (photon_cutoff + 2);
  long double neglected;
  if (ratio >= 1.0L) {
    neglected = 1.0L - mass;  // cutoff below the bulk; definitely too small
  } else {
    neglected = next / (1.0L - ratio);
  }
  if (!(neglected < 1e-14L)) {
    std::ostringstream msg;
    msg << "brute_force_click_probability: cutoff " << photon_cutoff
        << " leaves Poisson tail mass ~" << static_cast<double>(neglected)
        << " (>= 1e-14) at mu = " << static_cast<double>(mu);
    throw tail_mass_error(msg.str());
  }
  // Beyond the cutoff every p_i is 1, so the neglected terms contribute
  // their full mass; the bound overstates it by less than 1e-14.
  sum += neglected;
  const double r = static_cast<double>(sum);
  return r > 1.0 ? 1.0 : r;
}

}  // namespace epdc
