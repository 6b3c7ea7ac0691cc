#include "epdc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <utility>

#include "epdc/photon_statistics.hpp"

namespace epdc {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// ==========================================================================
// CSV datasets
// ==========================================================================

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

double parse_real(const std::string& token, int line_no, const std::string& column) {
  if (token.empty()) {
    std::ostringstream msg;
    msg << "line " << line_no << ": empty field for column '" << column << "'";
    throw parse_error(msg.str());
  }
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size() || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "line " << line_no << ": column '" << column << "' is not a finite number: '"
        << token << "'";
    throw parse_error(msg.str());
  }
  return value;
}

long long to_count(double value, int line_no, const std::string& column, bool exact) {
  if (value < 0.0 || value > 9.0e18) {
    std::ostringstream msg;
    msg << "line " << line_no << ": column '" << column
        << "' must be a nonnegative count, got " << value;
    throw parse_error(msg.str());
  }
  const double rounded = std::nearbyint(value);
  const double tol = exact ? 0.0 : 1e-9 * std::max(1.0, value);
  if (std::abs(value - rounded) > tol) {
    std::ostringstream msg;
    msg << "line " << line_no << ": column '" << column << "' must be an integer, got "
        << value;
    throw parse_error(msg.str());
  }
  return static_cast<long long>(rounded);
}

struct ColumnLayout {
  int bias = -1;
  int power = -1;
  int photons = -1;
  int clicks = -1;
  int trials = -1;
  int counts_per_s = -1;
  int integration_time = -1;
  std::size_t width = 0;
};

ColumnLayout parse_header(const std::string& line) {
  const auto names = split_csv(line);
  ColumnLayout layout;
  layout.width = names.size();
  auto assign = [&](int& slot, std::size_t pos, const std::string& name) {
    if (slot >= 0) throw unit_error("header: duplicate column '" + name + "'");
    slot = static_cast<int>(pos);
  };
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string& name = names[k];
    if (name == "bias_current_uA") {
      assign(layout.bias, k, name);
    } else if (name == "power_W") {
      assign(layout.power, k, name);
    } else if (name == "mean_photons") {
      assign(layout.photons, k, name);
    } else if (name == "clicks") {
      assign(layout.clicks, k, name);
    } else if (name == "trials") {
      assign(layout.trials, k, name);
    } else if (name == "counts_per_s") {
      assign(layout.counts_per_s, k, name);
    } else if (name == "integration_time_s") {
      assign(layout.integration_time, k, name);
    } else if (name == "bias_current" || name == "power" || name == "integration_time" ||
               name == "counts") {
      throw unit_error("header: column '" + name +
                       "' lacks a unit suffix (expected bias_current_uA, power_W, "
                       "counts_per_s, or integration_time_s)");
    } else {
      throw unit_error("header: unrecognized column '" + name +
                       "'; expected bias_current_uA, power_W | mean_photons, and "
                       "clicks + trials | counts_per_s + integration_time_s");
    }
  }
  if (layout.bias < 0) throw unit_error("header: missing column bias_current_uA");
  if (layout.power >= 0 && layout.photons >= 0) {
    throw unit_error("header: mixed probe units (both power_W and mean_photons present)");
  }
  if (layout.power < 0 && layout.photons < 0) {
    throw unit_error("header: missing probe column (power_W or mean_photons)");
  }
  const bool raw_pair = layout.clicks >= 0 || layout.trials >= 0;
  const bool rate_pair = layout.counts_per_s >= 0 || layout.integration_time >= 0;
  if (raw_pair && rate_pair) {
    throw unit_error("header: mixed counting schemas (clicks/trials vs counts_per_s/"
                     "integration_time_s)");
  }
  if (raw_pair && (layout.clicks < 0 || layout.trials < 0)) {
    throw unit_error("header: clicks and trials must both be present");
  }
  if (rate_pair && (layout.counts_per_s < 0 || layout.integration_time < 0)) {
    throw unit_error("header: counts_per_s requires integration_time_s");
  }
  if (!raw_pair && !rate_pair) {
    throw unit_error("header: missing counting columns (clicks + trials or "
                     "counts_per_s + integration_time_s)");
  }
  return layout;
}

}  // namespace

SweepData parse_dataset_csv(std::istream& in, const OpticalConfig& cfg, WeightScheme scheme) {
  cfg.validate();
  std::string line;
  int line_no = 0;
  bool have_header = false;
  ColumnLayout layout;

  // (bias, mean_photons) -> summed (clicks, trials); duplicates merge.
  std::map<std::pair<double, double>, std::pair<long long, long long>> merged;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    if (!have_header) {
      layout = parse_header(stripped);
      have_header = true;
      continue;
    }
    const auto fields = split_csv(stripped);
    if (fields.size() != layout.width) {
      std::ostringstream msg;
      msg << "line " << line_no << ": expected " << layout.width << " fields, got "
          << fields.size();
      throw parse_error(msg.str());
    }
    const double bias =
        parse_real(fields[static_cast<std::size_t>(layout.bias)], line_no, "bias_current_uA");

    double photons;
    if (layout.photons >= 0) {
      photons = parse_real(fields[static_cast<std::size_t>(layout.photons)], line_no,
                           "mean_photons");
      if (photons < 0.0) {
        std::ostringstream msg;
        msg << "line " << line_no << ": mean_photons must be >= 0, got " << photons;
        throw parse_error(msg.str());
      }
    } else {
      const double power =
          parse_real(fields[static_cast<std::size_t>(layout.power)], line_no, "power_W");
      if (power < 0.0) {
        std::ostringstream msg;
        msg << "line " << line_no << ": power_W must be >= 0, got " << power;
        throw parse_error(msg.str());
      }
      photons = power_to_mean_photons(power, cfg);
    }

    long long clicks, trials;
    if (layout.clicks >= 0) {
      clicks = to_count(
          parse_real(fields[static_cast<std::size_t>(layout.clicks)], line_no, "clicks"),
          line_no, "clicks", true);
      trials = to_count(
          parse_real(fields[static_cast<std::size_t>(layout.trials)], line_no, "trials"),
          line_no, "trials", true);
    } else {
      const double counts = parse_real(
          fields[static_cast<std::size_t>(layout.counts_per_s)], line_no, "counts_per_s");
      const double t = parse_real(
          fields[static_cast<std::size_t>(layout.integration_time)], line_no,
          "integration_time_s");
      if (counts < 0.0) {
        std::ostringstream msg;
        msg << "line " << line_no << ": counts_per_s must be >= 0, got " << counts;
        throw parse_error(msg.str());
      }
      if (t <= 0.0) {
        std::ostringstream msg;
        msg << "line " << line_no << ": integration_time_s must be > 0, got " << t;
        throw parse_error(msg.str());
      }
      clicks = to_count(counts * t, line_no, "counts_per_s * integration_time_s", false);
      trials = to_count(cfg.repetition_rate * t, line_no,
                        "repetition_rate * integration_time_s", false);
    }
    if (trials <= 0) {
      std::ostringstream msg;
      msg << "line " << line_no << ": trials must be positive";
      throw parse_error(msg.str());
    }
    if (clicks > trials) {
      std::ostringstream msg;
      msg << "line " << line_no << ": clicks (" << clicks << ") exceed trials (" << trials
          << ")";
      throw parse_error(msg.str());
    }
    auto& bucket = merged[{bias, photons}];
    bucket.first += clicks;
    bucket.second += trials;
  }

  if (!have_header) throw arity_error("dataset: empty file (no header)");
  if (merged.empty()) throw arity_error("dataset: no data rows");

  SweepData out;
  for (const auto& [key, counts] : merged) {
    out[key.first].push_back(
        ClickStatistics::from_counts(key.second, counts.first, counts.second, scheme));
  }
  // map ordering already yields ascending mean_photons within each bias group
  return out;
}

SweepData ingest(const std::string& path, const OpticalConfig& cfg, WeightScheme scheme,
                 const std::string& format) {
  if (format != "csv") {
    throw validation_error("ingest: unsupported dataset format '" + format + "'");
  }
  std::ifstream in(path);
  if (!in.is_open()) throw io_error("ingest: cannot open '" + path + "'");
  try {
    return parse_dataset_csv(in, cfg, scheme);
  } catch (const parse_error& e) {
    throw parse_error(path + ": " + e.what());
  } catch (const arity_error& e) {
    throw arity_error(path + ": " + e.what());
  }
}

void write_dataset_csv(std::ostream& out, const SweepData& data) {
  out << "bias_current_uA,mean_photons,clicks,trials\n";
  for (const auto& [bias, points] : data) {
    for (const auto& pt : points) {
      out << format_double(bias) << ',' << format_double(pt.mean_photons) << ','
          << pt.clicks << ',' << pt.trials << '\n';
    }
  }
}

void write_dataset_csv(const std::string& path, const SweepData& data) {
  std::ofstream out(path);
  if (!out.is_open()) throw io_error("write_dataset_csv: cannot open '" + path + "'");
  write_dataset_csv(out, data);
  if (!out.good()) throw io_error("write_dataset_csv: write failed for '" + path + "'");
}

// ==========================================================================
// JSON helpers
// ==========================================================================

namespace {

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.is_open()) throw io_error("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out.is_open()) throw io_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out.good()) throw io_error("write failed for '" + path + "'");
}

void expect_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                 const std::string& context) {
  if (!j.is_object()) throw parse_error(context + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw parse_error(context + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) throw parse_error(context + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw parse_error(context + ": key '" + std::string(key) + "' has the wrong type");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& context) {
  if (!j.contains(key)) return fallback;
  return get_field<T>(j, key, context);
}

const char* weight_scheme_name(WeightScheme scheme) {
  return scheme == WeightScheme::binomial ? "binomial" : "poisson_counts";
}

WeightScheme weight_scheme_from(const std::string& name, const std::string& context) {
  if (name == "poisson_counts") return WeightScheme::poisson_counts;
  if (name == "binomial") return WeightScheme::binomial;
  throw parse_error(context + ": unknown weight scheme '" + name + "'");
}

Estimator estimator_from(const std::string& name, const std::string& context) {
  if (name == "weighted_least_squares") return Estimator::weighted_least_squares;
  if (name == "binomial_ml") return Estimator::binomial_ml;
  throw parse_error(context + ": unknown estimator '" + name + "'");
}

Parameterization parameterization_from(const std::string& name, const std::string& context) {
  if (name == "transformed") return Parameterization::transformed;
  if (name == "raw") return Parameterization::raw;
  throw parse_error(context + ": unknown parameterization '" + name + "'");
}

SelectionRule rule_from(const std::string& name, const std::string& context) {
  if (name == "chi2_parsimony") return SelectionRule::chi2_parsimony;
  if (name == "aic") return SelectionRule::aic;
  if (name == "bic") return SelectionRule::bic;
  throw parse_error(context + ": unknown selection rule '" + name + "'");
}

nlohmann::ordered_json model_to_json(const EpdcModel& model) {
  nlohmann::ordered_json j;
  j["eta"] = model.eta;
  j["p"] = model.p;
  j["i_max"] = model.i_max();
  return j;
}

EpdcModel model_from_json(const nlohmann::json& j, const std::string& context) {
  expect_keys(j, {"eta", "p", "i_max"}, context);
  EpdcModel model;
  model.eta = get_field<double>(j, "eta", context);
  model.p = get_field<std::vector<double>>(j, "p", context);
  model.validate();
  return model;
}

}  // namespace

// ==========================================================================
// Scenarios and tool configuration
// ==========================================================================

nlohmann::ordered_json scenario_to_json(const SyntheticScenario& scenario) {
  nlohmann::ordered_json j;
  j["schema"] = "epdc.scenario/1";
  j["truth"] = model_to_json(scenario.truth);
  j["probe_grid"] = scenario.probe_grid;
  j["trials_per_point"] = scenario.trials_per_point;
  j["seed"] = scenario.seed;
  j["weight_scheme"] = weight_scheme_name(scenario.weights);
  j["power_jitter"] = scenario.power_jitter;
  return j;
}

SyntheticScenario scenario_from_json(const nlohmann::json& j) {
  const std::string ctx = "scenario";
  expect_keys(j,
              {"schema", "truth", "probe_grid", "trials_per_point", "seed", "weight_scheme",
               "power_jitter"},
              ctx);
  const auto schema = get_field<std::string>(j, "schema", ctx);
  if (schema != "epdc.scenario/1") {
    throw parse_error(ctx + ": unsupported schema '" + schema + "'");
  }
  if (!j.contains("truth")) throw parse_error(ctx + ": missing key 'truth'");
  SyntheticScenario scenario;
  scenario.truth = model_from_json(j.at("truth"), ctx + ".truth");
  scenario.probe_grid = get_field<std::vector<double>>(j, "probe_grid", ctx);
  scenario.trials_per_point = get_field<long long>(j, "trials_per_point", ctx);
  scenario.seed = get_or<std::uint64_t>(j, "seed", 0, ctx);
  scenario.weights =
      weight_scheme_from(get_or<std::string>(j, "weight_scheme", "poisson_counts", ctx), ctx);
  scenario.power_jitter = get_or<double>(j, "power_jitter", 0.0, ctx);
  scenario.validate();
  return scenario;
}

SyntheticScenario read_scenario(const std::string& path) {
  try {
    return scenario_from_json(read_json_file(path));
  } catch (const parse_error& e) {
    throw parse_error(path + ": " + e.what());
  }
}

void write_scenario(const std::string& path, const SyntheticScenario& scenario) {
  write_text_file(path, scenario_to_json(scenario).dump(2) + "\n");
}

ToolConfig config_from_json(const nlohmann::json& j) {
  const std::string ctx = "config";
  expect_keys(j, {"schema", "selection", "fit", "optics", "sweep", "threads"}, ctx);
  if (j.contains("schema")) {
    const auto schema = get_field<std::string>(j, "schema", ctx);
    if (schema != "epdc.config/1") {
      throw parse_error(ctx + ": unsupported schema '" + schema + "'");
    }
  }
  ToolConfig cfg;
  if (j.contains("selection")) {
    const auto& s = j.at("selection");
    const std::string sctx = ctx + ".selection";
    expect_keys(s, {"i_max_lo", "i_max_hi", "absolute_cap", "relative_factor", "rule", "pin_p0"},
                sctx);
    cfg.selection.i_max_lo = get_or<int>(s, "i_max_lo", cfg.selection.i_max_lo, sctx);
    cfg.selection.i_max_hi = get_or<int>(s, "i_max_hi", cfg.selection.i_max_hi, sctx);
    cfg.selection.absolute_cap = get_or<double>(s, "absolute_cap", cfg.selection.absolute_cap, sctx);
    cfg.selection.relative_factor =
        get_or<double>(s, "relative_factor", cfg.selection.relative_factor, sctx);
    cfg.selection.rule =
        rule_from(get_or<std::string>(s, "rule", "chi2_parsimony", sctx), sctx);
    cfg.selection.fit.pin_p0 = get_or<bool>(s, "pin_p0", cfg.selection.fit.pin_p0, sctx);
  }
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    const std::string fctx = ctx + ".fit";
    expect_keys(f,
                {"estimator", "parameterization", "weights", "gradient_tol", "step_tol",
                 "max_iterations", "multistart_count"},
                fctx);
    auto& fit = cfg.selection.fit;
    fit.estimator = estimator_from(
        get_or<std::string>(f, "estimator", "weighted_least_squares", fctx), fctx);
    fit.parameterization = parameterization_from(
        get_or<std::string>(f, "parameterization", "transformed", fctx), fctx);
    fit.weights =
        weight_scheme_from(get_or<std::string>(f, "weights", "poisson_counts", fctx), fctx);
    fit.gradient_tol = get_or<double>(f, "gradient_tol", fit.gradient_tol, fctx);
    fit.step_tol = get_or<double>(f, "step_tol", fit.step_tol, fctx);
    fit.max_iterations = get_or<int>(f, "max_iterations", fit.max_iterations, fctx);
    fit.multistart_count = get_or<int>(f, "multistart_count", fit.multistart_count, fctx);
  }
  if (j.contains("optics")) {
    const auto& o = j.at("optics");
    const std::string octx = ctx + ".optics";
    expect_keys(o, {"wavelength_m", "repetition_rate_hz", "attenuation_db"}, octx);
    cfg.optics.wavelength = get_or<double>(o, "wavelength_m", cfg.optics.wavelength, octx);
    cfg.optics.repetition_rate =
        get_or<double>(o, "repetition_rate_hz", cfg.optics.repetition_rate, octx);
    cfg.optics.attenuation_db =
        get_or<double>(o, "attenuation_db", cfg.optics.attenuation_db, octx);
    cfg.optics.validate();
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    const std::string sctx = ctx + ".sweep";
    expect_keys(s, {"dominance_threshold"}, sctx);
    cfg.dominance_threshold =
        get_or<double>(s, "dominance_threshold", cfg.dominance_threshold, sctx);
  }
  if (j.contains("threads")) {
    cfg.threads = get_field<int>(j, "threads", ctx);
    if (cfg.threads < 1) throw parse_error(ctx + ": threads must be >= 1");
  }
  return cfg;
}

ToolConfig read_config(const std::string& path) {
  try {
    return config_from_json(read_json_file(path));
  } catch (const parse_error& e) {
    throw parse_error(path + ": " + e.what());
  }
}

// ==========================================================================
// Reports
// ==========================================================================

nlohmann::ordered_json fit_to_json(const CandidateFit& fit) {
  nlohmann::ordered_json j;
  j["schema"] = "epdc.fit/1";
  j["model"] = model_to_json(fit.model);
  j["free_parameters"] = fit.free_names;
  std::vector<double> errors(fit.free_names.size(), 0.0);
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    errors[k] = std::sqrt(std::max(fit.covariance(idx, idx), 0.0));
  }
  j["standard_errors"] = errors;
  nlohmann::ordered_json unident = nlohmann::ordered_json::array();
  for (int idx : fit.unidentifiable) {
    unident.push_back(fit.free_names[static_cast<std::size_t>(idx)]);
  }
  j["unidentifiable"] = unident;
  j["at_boundary"] = fit.at_boundary;
  j["p0_pinned"] = fit.p0_pinned;
  j["chi2"] = fit.chi2;
  j["chi2_reduced"] = fit.chi2_reduced;
  j["n_points"] = fit.n_points;
  j["n_free"] = fit.n_free;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["termination"] = fit.termination;
  j["projected_gradient_norm"] = fit.projected_gradient_norm;
  nlohmann::ordered_json cov = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(fit.covariance(r, c));
    cov.push_back(std::move(row));
  }
  j["covariance"] = cov;
  return j;
}

namespace {

nlohmann::ordered_json crossovers_to_json(const EpdcModel& model) {
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (int i = 1; i < model.i_max(); ++i) {
    const int jj = i + 1;
    double mu;
    try {
      mu = regime_crossover(model, i, jj);
    } catch (const crossover_error&) {
      continue;
    }
    const double p_i = model.p[static_cast<std::size_t>(i)];
    const double p_j = model.p[static_cast<std::size_t>(jj)];
    const double factorial_free = std::pow(p_i / p_j, 1.0 / static_cast<double>(jj - i));
    nlohmann::ordered_json entry;
    entry["low_order"] = i;
    entry["high_order"] = jj;
    entry["mu"] = mu;
    entry["note"] =
        "mu solves p_i c_i(mu) = p_j c_j(mu) with the Poisson 1/i! factors included; "
        "the factorial-free reading p_i mu^i = p_j mu^j gives " +
        format_double(factorial_free) + " instead";
    list.push_back(std::move(entry));
  }
  return list;
}

}  // namespace

nlohmann::ordered_json selection_to_json(const SelectionReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = "epdc.selection/1";
  j["selected_i_max"] = report.selected_i_max;
  j["selected"] = fit_to_json(report.selected());
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const auto& entry : report.rule_trace) {
    nlohmann::ordered_json t;
    t["i_max"] = entry.i_max;
    t["fitted"] = entry.fitted;
    t["converged"] = entry.converged;
    t["chi2_reduced"] = entry.chi2_reduced;
    t["criterion"] = entry.criterion;
    t["accepted"] = entry.accepted;
    t["reason"] = entry.reason;
    trace.push_back(std::move(t));
  }
  j["rule_trace"] = trace;
  nlohmann::ordered_json candidates = nlohmann::ordered_json::array();
  for (const auto& fit : report.candidates) candidates.push_back(fit_to_json(fit));
  j["candidates"] = candidates;
  j["regime_crossovers"] = crossovers_to_json(report.selected().model);
  return j;
}

nlohmann::ordered_json sweep_to_json(const SweepResult& sweep, double dominance_threshold) {
  nlohmann::ordered_json j;
  j["schema"] = "epdc.sweep/1";
  j["dominance_threshold"] = dominance_threshold;
  nlohmann::ordered_json points = nlohmann::ordered_json::array();
  for (const auto& point : sweep.points) {
    nlohmann::ordered_json p;
    p["bias_current_uA"] = point.bias_current;
    p["ok"] = point.ok;
    if (point.ok) {
      p["selected_i_max"] = point.report.selected_i_max;
      p["selected"] = fit_to_json(point.report.selected());
      p["dominant_order"] =
          dominant_order(point.report.selected().model, dominance_threshold);
    } else {
      p["failure"] = point.failure;
    }
    points.push_back(std::move(p));
  }
  j["points"] = points;

  nlohmann::ordered_json table;
  table["i_max"] = sweep.table.i_max;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < sweep.table.bias.size(); ++r) {
    nlohmann::ordered_json row;
    row["bias_current_uA"] = sweep.table.bias[r];
    row["eta"] = {{"value", sweep.table.eta[r].value}, {"error", sweep.table.eta[r].error}};
    nlohmann::ordered_json ps = nlohmann::ordered_json::array();
    for (const auto& cell : sweep.table.p[r]) {
      nlohmann::ordered_json c;
      c["value"] = cell.value;
      c["error"] = cell.error;
      c["fitted"] = cell.fitted;
      ps.push_back(std::move(c));
    }
    row["p"] = ps;
    rows.push_back(std::move(row));
  }
  table["rows"] = rows;
  j["table"] = table;

  nlohmann::ordered_json boundaries = nlohmann::ordered_json::array();
  try {
    for (double b : regime_boundaries(sweep, dominance_threshold)) boundaries.push_back(b);
  } catch (const arity_error&) {
    // fewer than 3 analyzed points: no boundary diagnostics
  }
  j["regime_boundaries_uA"] = boundaries;
  return j;
}

namespace {

std::string strip_json_suffix(const std::string& stem) {
  const std::string suffix = ".json";
  if (stem.size() > suffix.size() &&
      stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return stem.substr(0, stem.size() - suffix.size());
  }
  return stem;
}

void write_points_tsv(const std::string& path, const EpdcModel& model,
                      const std::vector<ClickStatistics>& data) {
  std::ostringstream out;
  out << "# mean_photons\trate\tsigma\tmodel_rate\n";
  for (const auto& pt : data) {
    out << format_double(pt.mean_photons) << '\t' << format_double(pt.rate) << '\t'
        << format_double(pt.sigma) << '\t'
        << format_double(click_probability(model, pt.mean_photons)) << '\n';
  }
  write_text_file(path, out.str());
}

void write_curve_tsv(const std::string& path, const EpdcModel& model,
                     const std::vector<ClickStatistics>& data) {
  double lo = 0.0, hi = 0.0;
  bool have = false;
  for (const auto& pt : data) {
    if (pt.mean_photons <= 0.0) continue;
    if (!have) {
      lo = hi = pt.mean_photons;
      have = true;
    } else {
      lo = std::min(lo, pt.mean_photons);
      hi = std::max(hi, pt.mean_photons);
    }
  }
  std::ostringstream out;
  out << "# mean_photons\tmodel_rate\n";
  if (have && hi > lo) {
    for (double n : log_spaced_grid(lo, hi, 200)) {
      out << format_double(n) << '\t' << format_double(click_probability(model, n)) << '\n';
    }
  }
  write_text_file(path, out.str());
}

}  // namespace

void emit_fit_report(const std::string& stem, const CandidateFit& fit,
                     const std::vector<ClickStatistics>& data) {
  const std::string base = strip_json_suffix(stem);
  write_text_file(base + ".json", fit_to_json(fit).dump(2) + "\n");
  write_points_tsv(base + "_points.tsv", fit.model, data);
  write_curve_tsv(base + "_curve.tsv", fit.model, data);
}

void emit_selection_report(const std::string& stem, const SelectionReport& report,
                           const std::vector<ClickStatistics>& data) {
  const std::string base = strip_json_suffix(stem);
  write_text_file(base + ".json", selection_to_json(report).dump(2) + "\n");
  const EpdcModel& model = report.selected().model;
  write_points_tsv(base + "_points.tsv", model, data);
  write_curve_tsv(base + "_curve.tsv", model, data);
}

void emit_sweep_report(const std::string& stem, const SweepResult& sweep,
                       double dominance_threshold) {
  const std::string base = strip_json_suffix(stem);
  write_text_file(base + ".json", sweep_to_json(sweep, dominance_threshold).dump(2) + "\n");

  std::ostringstream out;
  out << "# bias_current_uA\teta\teta_error";
  for (int i = 0; i <= sweep.table.i_max; ++i) {
    out << "\tp_" << i << "\tp_" << i << "_error";
  }
  out << '\n';
  for (std::size_t r = 0; r < sweep.table.bias.size(); ++r) {
    out << format_double(sweep.table.bias[r]) << '\t'
        << format_double(sweep.table.eta[r].value) << '\t'
        << format_double(sweep.table.eta[r].error);
    for (const auto& cell : sweep.table.p[r]) {
      out << '\t' << format_double(cell.value) << '\t' << format_double(cell.error);
    }
    out << '\n';
  }
  write_text_file(base + "_table.tsv", out.str());
}

EpdcModel model_from_report(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  try {
    const auto schema = get_field<std::string>(j, "schema", "report");
    if (schema == "epdc.fit/1") return model_from_json(j.at("model"), "report.model");
    if (schema == "epdc.selection/1") {
      return model_from_json(j.at("selected").at("model"), "report.selected.model");
    }
    throw parse_error("report: unsupported schema '" + schema + "'");
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path + ": " + e.what());
  } catch (const parse_error& e) {
    throw parse_error(path + ": " + e.what());
  }
}

}  // namespace epdc
