#include "epdc/optics.hpp"

#include <cmath>

namespace epdc {

double power_to_mean_photons(double power_watts, const OpticalConfig& cfg) {
  cfg.validate();
  if (!(power_watts >= 0.0)) {
    throw validation_error("power_to_mean_photons: power must be >= 0");
  }
  const double photons_per_joule = cfg.wavelength / kPlanckTimesC;
  return power_watts / cfg.repetition_rate * photons_per_joule *
         std::pow(10.0, -cfg.attenuation_db / 10.0);
}

double mean_photons_to_power(double mean_photons, const OpticalConfig& cfg) {
  cfg.validate();
  if (!(mean_photons >= 0.0)) {
    throw validation_error("mean_photons_to_power: mean photon number must be >= 0");
  }
  const double photons_per_joule = cfg.wavelength / kPlanckTimesC;
  return mean_photons * cfg.repetition_rate / photons_per_joule *
         std::pow(10.0, cfg.attenuation_db / 10.0);
}

}  // namespace epdc
