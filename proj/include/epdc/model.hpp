// ============================================================================
// model.hpp -- core domain types for click/no-click detector characterization
//
// EpdcModel holds the linear loss parameter eta together with the effective
// per-photon-number click probabilities p_0..p_imax. Beyond the truncation
// order the detector is assumed to always click (p_j = 1 for j > i_max).
// ============================================================================
#pragma once
#include <vector>

namespace epdc {

/// Detector response model: a single linear loss eta in (0, 1] and click
/// probabilities p[i] in [0, 1] given i photons that survive the loss.
/// The truncation order i_max is implied by the length of p.
struct EpdcModel {
  double eta = 1.0;
  std::vector<double> p;  // p[0] .. p[i_max]

  int i_max() const { return static_cast<int>(p.size()) - 1; }

  /// Click probability for exactly i surviving photons (unit tail).
  double click_given_photons(int i) const {
    return i <= i_max() ? p[static_cast<std::size_t>(i)] : 1.0;
  }

  /// Throws validation_error naming the first violated invariant.
  void validate() const;
};

/// Diagonal photon-number distribution: weights[i] = P(i photons), i >= 0.
/// Finite by construction; callers choose the truncation.
struct PhotonNumberDistribution {
  std::vector<double> weights;

  /// Throws validation_error unless all weights are nonnegative and the
  /// total mass is 1 within 1e-12.
  void validate() const;
};

}  // namespace epdc
