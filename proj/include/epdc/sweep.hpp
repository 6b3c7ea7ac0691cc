// ============================================================================
// sweep.hpp -- model selection across a bias-current sweep
//
// Runs independent model selection at every bias current and assembles the
// parameters-versus-bias table (eta(I_b), p_i(I_b) with standard errors),
// plus derived regime diagnostics: where each photon order dominates the
// low-power response and where the dominant order changes along the sweep.
// ============================================================================
#pragma once
#include <map>
#include <string>
#include <vector>

#include "epdc/model_selection.hpp"

namespace epdc {

struct SweepConfig {
  SelectionConfig selection;
  double dominance_threshold = 0.01;  // p_i at or above this counts as active
  int threads = 1;                    // > 1 analyzes currents concurrently
};

/// One table cell. Orders above a point's selected i_max are the model's
/// implicit tail (p = 1 exactly, no uncertainty), marked fitted = false.
struct SweepCell {
  double value = 1.0;
  double error = 0.0;
  bool fitted = false;
};

struct SweepTable {
  int i_max = 0;                        // maximal selected order in the sweep
  std::vector<double> bias;             // row keys, ascending
  std::vector<SweepCell> eta;           // one row each
  std::vector<std::vector<SweepCell>> p;  // p[row][i] for i = 0..i_max
};

struct SweepPoint {
  double bias_current = 0.0;  // microamperes
  bool ok = false;
  SelectionReport report;  // full ladder; meaningful when ok or on selection failure
  std::string failure;     // set when !ok
};

struct SweepResult {
  std::vector<SweepPoint> points;  // ascending bias current
  SweepTable table;                // rows only for points that selected a model
};

/// Independent selection per bias current; per-current failures are
/// recorded in the point, not fatal. Throws arity_error on empty input.
SweepResult analyze_sweep(const std::map<double, std::vector<ClickStatistics>>& datasets,
                          const SweepConfig& config = {});

/// Effective mean photon number mu where orders i and j contribute equally
/// to the click rate: p_i c_i(mu) = p_j c_j(mu), i.e.
/// mu = (p_i j! / (p_j i!))^(1/(j-i)). Requires 0 <= i < j <= i_max and
/// p_i, p_j > 0 (else crossover_error).
double regime_crossover(const EpdcModel& model, int i, int j);

/// Smallest photon order >= 1 whose click probability reaches the
/// threshold; the implicit tail (p = 1) guarantees one exists.
int dominant_order(const EpdcModel& model, double threshold);

/// Bias currents (midpoints between adjacent sweep points) where the
/// dominant order changes. Requires >= 3 analyzed points; a single-regime
/// sweep yields an empty list.
std::vector<double> regime_boundaries(const SweepResult& sweep,
                                      double dominance_threshold = 0.01);

}  // namespace epdc
