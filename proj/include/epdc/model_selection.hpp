// ============================================================================
// model_selection.hpp -- candidate ladder over truncation orders
//
// Fits every truncation order in a configured range and selects the
// physically minimal model: the smallest i_max whose reduced chi^2 passes
// a two-threshold rule (absolute cap, or within a relative factor of the
// best candidate). Information-criterion rules (AIC/BIC) are available
// behind configuration for cross-checks.
// ============================================================================
#pragma once
#include <string>
#include <vector>

#include "epdc/estimation.hpp"

namespace epdc {

enum class SelectionRule {
  chi2_parsimony,  // smallest i_max with acceptable reduced chi^2 (default)
  aic,             // minimize chi2 + 2 k
  bic,             // minimize chi2 + k ln(n)
};

struct SelectionConfig {
  int i_max_lo = 1;
  int i_max_hi = 6;
  double absolute_cap = 3.0;     // chi2_red at or below this always passes
  double relative_factor = 1.2;  // ... or within this factor of the best
  SelectionRule rule = SelectionRule::chi2_parsimony;
  FitConfig fit;
  int threads = 1;  // > 1 runs candidate fits concurrently
};

struct RuleTraceEntry {
  int i_max = 0;
  bool fitted = false;     // a candidate fit exists (converged or not)
  bool converged = false;
  double chi2_reduced = 0.0;  // meaningful only when fitted
  double criterion = 0.0;     // rule-dependent score (chi2_red, AIC, BIC)
  bool accepted = false;
  std::string reason;
};

struct SelectionReport {
  std::vector<CandidateFit> candidates;  // ordered by i_max; skipped orders absent
  std::vector<RuleTraceEntry> rule_trace;  // one entry per ladder order
  int selected_i_max = -1;

  /// The accepted candidate. Only valid on reports returned by
  /// select_model (which throws instead of returning an unselected report).
  const CandidateFit& selected() const;
};

/// No candidate passed the selection rule; carries the full ladder so the
/// caller can inspect every attempt.
class selection_error : public std::runtime_error {
 public:
  selection_error(const std::string& what, SelectionReport report)
      : std::runtime_error(what), ladder(std::move(report)) {}
  SelectionReport ladder;
};

/// Fits every order in [config.i_max_lo, config.i_max_hi] and applies the
/// configured rule. Candidates that fail to converge (or have too few
/// points for their order) are recorded in the trace and excluded.
/// Throws selection_error when nothing passes.
SelectionReport select_model(const std::vector<ClickStatistics>& data,
                             const SelectionConfig& config = {});

/// Same, with an explicit order range overriding the config's.
SelectionReport select_model(const std::vector<ClickStatistics>& data, int i_max_lo,
                             int i_max_hi, const SelectionConfig& config = {});

}  // namespace epdc
