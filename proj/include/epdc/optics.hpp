// ============================================================================
// optics.hpp -- optical power <-> mean photon number per pulse
//
// A pulsed laser of average power P, wavelength lambda and repetition rate
// f_rep delivers N = P lambda / (h c f_rep) photons per pulse on average;
// a known external attenuation (in dB) rescales N downward.
// ============================================================================
#pragma once
#include "epdc/errors.hpp"

namespace epdc {

/// h * c in joule-meters.
inline constexpr double kPlanckTimesC = 1.98644586e-25;

struct OpticalConfig {
  double wavelength = 1.5e-6;       // meters
  double repetition_rate = 2.0e7;   // hertz
  double attenuation_db = 0.0;      // known attenuation before the detector

  void validate() const {
    if (!(wavelength > 0.0)) throw validation_error("OpticalConfig: wavelength must be > 0");
    if (!(repetition_rate > 0.0)) {
      throw validation_error("OpticalConfig: repetition_rate must be > 0");
    }
    if (!(attenuation_db >= 0.0)) {
      throw validation_error("OpticalConfig: attenuation_db must be >= 0");
    }
  }
};

/// Mean photons per pulse for an average power in watts.
double power_to_mean_photons(double power_watts, const OpticalConfig& cfg);

/// Inverse conversion: average power in watts delivering the given mean
/// photon number per pulse.
double mean_photons_to_power(double mean_photons, const OpticalConfig& cfg);

}  // namespace epdc
