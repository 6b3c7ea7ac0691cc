// ============================================================================
// io.hpp -- file ingestion, serialization, and report emission
//
// Input datasets are CSV with unit-bearing headers:
//
//   bias_current_uA, power_W | mean_photons, clicks, trials
//   bias_current_uA, power_W | mean_photons, counts_per_s, integration_time_s
//
// Exactly one probe column (power_W or mean_photons) must be present; an
// unrecognized or unit-less header is an error, never a guess. In the
// counts-per-second schema, trials = repetition_rate * integration_time.
// Duplicate (bias, probe) rows merge by summing clicks and trials.
//
// Scenarios, configs, and reports are JSON with versioned "schema" fields.
// Reports come with plot-ready TSV companions: the measured points and the
// selected model's smooth curve on a 200-point log grid.
// ============================================================================
#pragma once
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "epdc/model_selection.hpp"
#include "epdc/optics.hpp"
#include "epdc/sweep.hpp"
#include "epdc/synthetic.hpp"

namespace epdc {

using SweepData = std::map<double, std::vector<ClickStatistics>>;

/// Shortest exact decimal form of a double ("%.17g" trimmed); scanning it
/// back recovers the identical bits.
std::string format_double(double value);

// --------------------------------------------------------------------------
// Datasets (CSV)
// --------------------------------------------------------------------------

/// Parses a dataset file into per-bias-current click statistics.
/// Throws parse_error (with line numbers), unit_error, arity_error, io_error.
SweepData ingest(const std::string& path, const OpticalConfig& cfg = {},
                 WeightScheme scheme = WeightScheme::poisson_counts,
                 const std::string& format = "csv");

/// Stream-level CSV parser behind ingest().
SweepData parse_dataset_csv(std::istream& in, const OpticalConfig& cfg,
                            WeightScheme scheme);

void write_dataset_csv(std::ostream& out, const SweepData& data);
void write_dataset_csv(const std::string& path, const SweepData& data);

// --------------------------------------------------------------------------
// Scenarios and tool configuration (JSON)
// --------------------------------------------------------------------------

nlohmann::ordered_json scenario_to_json(const SyntheticScenario& scenario);
SyntheticScenario scenario_from_json(const nlohmann::json& j);
SyntheticScenario read_scenario(const std::string& path);
void write_scenario(const std::string& path, const SyntheticScenario& scenario);

/// Everything the CLI reads from --config; all fields optional in the file.
struct ToolConfig {
  SelectionConfig selection;
  OpticalConfig optics;
  double dominance_threshold = 0.01;
  int threads = 0;  // 0: unspecified (CLI resolves to its --threads default)
};

ToolConfig config_from_json(const nlohmann::json& j);
ToolConfig read_config(const std::string& path);

// --------------------------------------------------------------------------
// Reports
// --------------------------------------------------------------------------

nlohmann::ordered_json fit_to_json(const CandidateFit& fit);
nlohmann::ordered_json selection_to_json(const SelectionReport& report);
nlohmann::ordered_json sweep_to_json(const SweepResult& sweep, double dominance_threshold);

/// Writes <stem>.json plus <stem>_points.tsv (mean_photons, rate, sigma,
/// model_rate) and <stem>_curve.tsv (200-point log-grid model curve).
/// `stem` may carry a .json suffix, which is stripped.
void emit_fit_report(const std::string& stem, const CandidateFit& fit,
                     const std::vector<ClickStatistics>& data);
void emit_selection_report(const std::string& stem, const SelectionReport& report,
                           const std::vector<ClickStatistics>& data);
void emit_sweep_report(const std::string& stem, const SweepResult& sweep,
                       double dominance_threshold);

/// Reads the fitted model back out of an emitted fit or selection report.
EpdcModel model_from_report(const std::string& path);

}  // namespace epdc
