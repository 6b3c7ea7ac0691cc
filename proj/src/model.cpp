#include "epdc/model.hpp"

#include <cmath>
#include <cstddef>
#include <sstream>

#include "epdc/errors.hpp"

namespace epdc {

void EpdcModel::validate() const {
  if (!(eta > 0.0) || eta > 1.0 || !std::isfinite(eta)) {
    std::ostringstream msg;
    msg << "EpdcModel: eta = " << eta << " violates 0 < eta <= 1";
    throw validation_error(msg.str());
  }
  if (p.empty()) {
    throw validation_error("EpdcModel: p must contain at least p_0 (i_max >= 0)");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0) || p[i] > 1.0 || !std::isfinite(p[i])) {
      std::ostringstream msg;
      msg << "EpdcModel: p_" << i << " = " << p[i] << " violates 0 <= p_i <= 1";
      throw validation_error(msg.str());
    }
  }
}

void PhotonNumberDistribution::validate() const {
  if (weights.empty()) {
    throw validation_error("PhotonNumberDistribution: weights must be non-empty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      std::ostringstream msg;
      msg << "PhotonNumberDistribution: weight[" << i << "] = " << weights[i]
          << " is negative or non-finite";
      throw validation_error(msg.str());
    }
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    std::ostringstream msg;
    msg << "PhotonNumberDistribution: weights sum to " << sum
        << ", outside [1 - 1e-12, 1 + 1e-12]";
    throw validation_error(msg.str());
  }
}

}  // namespace epdc
