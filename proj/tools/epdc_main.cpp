// ============================================================================
// epdc_main.cpp -- command-line frontend
//
// Verbs:
//   synth    scenario JSON -> synthetic dataset CSV
//   fit      dataset CSV + truncation order -> fitted model report
//   select   dataset CSV -> candidate ladder + selected model report
//   sweep    multi-current dataset CSV -> parameters-vs-bias table
//   convert  optical power <-> mean photon number per pulse
//
// Exit codes: 0 success, 2 parse/validation error, 3 convergence failure,
// 4 selection failure.
// ============================================================================
#include <cstdint>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "epdc/io.hpp"

namespace {

using epdc::format_double;

epdc::ToolConfig load_config(const std::string& path) {
  return path.empty() ? epdc::ToolConfig{} : epdc::read_config(path);
}

int resolve_threads(int cli_threads, const epdc::ToolConfig& cfg) {
  if (cli_threads > 0) return cli_threads;
  if (cfg.threads > 0) return cfg.threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void check_format(const std::string& format) {
  if (format != "json") {
    throw epdc::validation_error("unsupported output format '" + format +
                                 "' (supported: json)");
  }
}

/// Picks one bias-current group out of an ingested file.
const std::vector<epdc::ClickStatistics>& pick_group(const epdc::SweepData& data,
                                                     double bias, bool bias_given) {
  if (!bias_given) {
    if (data.size() == 1) return data.begin()->second;
    throw epdc::validation_error(
        "dataset contains multiple bias currents; pass --bias to pick one");
  }
  const auto it = data.find(bias);
  if (it == data.end()) {
    std::string msg = "bias current " + format_double(bias) + " not in dataset; available:";
    for (const auto& [b, _] : data) msg += " " + format_double(b);
    throw epdc::validation_error(msg);
  }
  return it->second;
}

void print_fit_summary(std::ostream& out, const epdc::CandidateFit& fit) {
  std::vector<double> errors(fit.free_names.size());
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k);
    errors[k] = std::sqrt(std::max(fit.covariance(idx, idx), 0.0));
  }
  out << "i_max = " << fit.model.i_max()
      << (fit.converged ? "  (converged)" : "  (NOT converged)") << '\n';
  out << "  eta = " << format_double(fit.model.eta) << " +/- " << format_double(errors[0])
      << '\n';
  std::size_t k = 1;
  for (int i = 0; i <= fit.model.i_max(); ++i) {
    out << "  p_" << i << " = " << format_double(fit.model.p[static_cast<std::size_t>(i)]);
    if (fit.p0_pinned && i == 0) {
      out << " (pinned)";
    } else {
      out << " +/- " << format_double(errors[k++]);
    }
    out << '\n';
  }
  out << "  chi2_reduced = " << format_double(fit.chi2_reduced) << "  ("
      << fit.n_points << " points, " << fit.n_free << " free)" << '\n';
}

struct SynthArgs {
  std::string scenario_path, output, config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double bias = 0.0;
};

int run_synth(const SynthArgs& args) {
  epdc::SyntheticScenario scenario = epdc::read_scenario(args.scenario_path);
  if (args.seed_given) scenario.seed = args.seed;
  epdc::SweepData data;
  data[args.bias] = epdc::generate_dataset(scenario);
  epdc::write_dataset_csv(args.output, data);
  std::cout << "wrote " << data[args.bias].size() << " points to " << args.output << '\n';
  return 0;
}

struct FitArgs {
  std::string data_path, config_path, output, format = "json";
  int i_max = 2;
  double bias = 0.0;
  bool bias_given = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_fit(const FitArgs& args) {
  check_format(args.format);
  epdc::ToolConfig cfg = load_config(args.config_path);
  if (args.seed_given) cfg.selection.fit.seed = args.seed;
  const epdc::SweepData data =
      epdc::ingest(args.data_path, cfg.optics, cfg.selection.fit.weights);
  const auto& group = pick_group(data, args.bias, args.bias_given);
  const epdc::CandidateFit fit = epdc::fit_candidate(group, args.i_max, cfg.selection.fit);
  print_fit_summary(std::cout, fit);
  if (!args.output.empty()) epdc::emit_fit_report(args.output, fit, group);
  return 0;
}

struct SelectArgs {
  std::string data_path, config_path, output, format = "json";
  double bias = 0.0;
  bool bias_given = false;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

int run_select(const SelectArgs& args) {
  check_format(args.format);
  epdc::ToolConfig cfg = load_config(args.config_path);
  if (args.seed_given) cfg.selection.fit.seed = args.seed;
  cfg.selection.threads = resolve_threads(args.threads, cfg);
  const epdc::SweepData data =
      epdc::ingest(args.data_path, cfg.optics, cfg.selection.fit.weights);
  const auto& group = pick_group(data, args.bias, args.bias_given);
  const epdc::SelectionReport report = epdc::select_model(group, cfg.selection);
  std::cout << "selected ";
  print_fit_summary(std::cout, report.selected());
  if (!args.output.empty()) epdc::emit_selection_report(args.output, report, group);
  return 0;
}

struct SweepArgs {
  std::string data_path, config_path, output, format = "json";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

int run_sweep(const SweepArgs& args) {
  check_format(args.format);
  epdc::ToolConfig cfg = load_config(args.config_path);
  if (args.seed_given) cfg.selection.fit.seed = args.seed;
  epdc::SweepConfig sweep_cfg;
  sweep_cfg.selection = cfg.selection;
  sweep_cfg.dominance_threshold = cfg.dominance_threshold;
  sweep_cfg.threads = resolve_threads(args.threads, cfg);
  const epdc::SweepData data =
      epdc::ingest(args.data_path, cfg.optics, cfg.selection.fit.weights);
  const epdc::SweepResult result = epdc::analyze_sweep(data, sweep_cfg);

  int n_ok = 0;
  for (const auto& point : result.points) {
    std::cout << "I_b = " << format_double(point.bias_current) << " uA: ";
    if (point.ok) {
      ++n_ok;
      const auto& fit = point.report.selected();
      std::cout << "i_max = " << fit.model.i_max()
                << ", eta = " << format_double(fit.model.eta)
                << ", chi2_red = " << format_double(fit.chi2_reduced) << '\n';
    } else {
      std::cout << "failed (" << point.failure << ")\n";
    }
  }
  if (!args.output.empty()) {
    epdc::emit_sweep_report(args.output, result, sweep_cfg.dominance_threshold);
  }
  if (n_ok == 0) {
    std::cerr << "error: no bias current produced a selected model" << '\n';
    return 4;
  }
  return 0;
}

struct ConvertArgs {
  std::string config_path, format = "plain";
  double power = 0.0;
  bool power_given = false;
  double photons = 0.0;
  bool photons_given = false;
};

int run_convert(const ConvertArgs& args) {
  if (args.format != "plain" && args.format != "json") {
    throw epdc::validation_error("unsupported output format '" + args.format +
                                 "' (supported: plain, json)");
  }
  if (!args.power_given && !args.photons_given) {
    throw epdc::validation_error("convert: pass --power and/or --photons");
  }
  const epdc::ToolConfig cfg = load_config(args.config_path);
  nlohmann::ordered_json j;
  j["schema"] = "epdc.convert/1";
  if (args.power_given) {
    const double n = epdc::power_to_mean_photons(args.power, cfg.optics);
    if (args.format == "plain") std::cout << format_double(n) << '\n';
    j["power_W"] = args.power;
    j["mean_photons"] = n;
  }
  if (args.photons_given) {
    const double w = epdc::mean_photons_to_power(args.photons, cfg.optics);
    if (args.format == "plain") std::cout << format_double(w) << '\n';
    j["mean_photons_in"] = args.photons;
    j["power_W_out"] = w;
  }
  if (args.format == "json") std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epdc: click/no-click photon detector characterization"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--scenario", synth.scenario_path, "scenario JSON file")
      ->required();
  synth_cmd->add_option("--output,-o", synth.output, "output dataset CSV")->required();
  synth_cmd->add_option("--bias", synth.bias, "bias current label for the CSV (uA)");
  auto* synth_seed = synth_cmd->add_option("--seed", synth.seed, "override scenario seed");
  synth_cmd->add_option("--config", synth.config_path, "tool config JSON (unused)");

  FitArgs fit;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one truncation order");
  fit_cmd->add_option("--data", fit.data_path, "dataset CSV")->required();
  fit_cmd->add_option("--i-max", fit.i_max, "truncation order")->required();
  auto* fit_bias = fit_cmd->add_option("--bias", fit.bias, "bias current to fit (uA)");
  fit_cmd->add_option("--config", fit.config_path, "tool config JSON");
  fit_cmd->add_option("--output,-o", fit.output, "report stem or .json path");
  fit_cmd->add_option("--format", fit.format, "report format (json)");
  auto* fit_seed = fit_cmd->add_option("--seed", fit.seed, "multi-start seed");

  SelectArgs select;
  CLI::App* select_cmd = app.add_subcommand("select", "run the candidate ladder");
  select_cmd->add_option("--data", select.data_path, "dataset CSV")->required();
  auto* select_bias =
      select_cmd->add_option("--bias", select.bias, "bias current to analyze (uA)");
  select_cmd->add_option("--config", select.config_path, "tool config JSON");
  select_cmd->add_option("--output,-o", select.output, "report stem or .json path");
  select_cmd->add_option("--format", select.format, "report format (json)");
  auto* select_seed = select_cmd->add_option("--seed", select.seed, "multi-start seed");
  select_cmd->add_option("--threads", select.threads, "candidate fits in parallel");

  SweepArgs sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "analyze a bias-current sweep");
  sweep_cmd->add_option("--data", sweep.data_path, "multi-current dataset CSV")->required();
  sweep_cmd->add_option("--config", sweep.config_path, "tool config JSON");
  sweep_cmd->add_option("--output,-o", sweep.output, "report stem or .json path");
  sweep_cmd->add_option("--format", sweep.format, "report format (json)");
  auto* sweep_seed = sweep_cmd->add_option("--seed", sweep.seed, "multi-start seed");
  sweep_cmd->add_option("--threads", sweep.threads, "bias currents in parallel");

  ConvertArgs convert;
  CLI::App* convert_cmd =
      app.add_subcommand("convert", "optical power <-> mean photons per pulse");
  auto* convert_power = convert_cmd->add_option("--power", convert.power, "power in watts");
  auto* convert_photons =
      convert_cmd->add_option("--photons", convert.photons, "mean photons per pulse");
  convert_cmd->add_option("--config", convert.config_path, "tool config JSON");
  convert_cmd->add_option("--format", convert.format, "plain or json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  synth.seed_given = synth_seed->count() > 0;
  fit.seed_given = fit_seed->count() > 0;
  fit.bias_given = fit_bias->count() > 0;
  select.seed_given = select_seed->count() > 0;
  select.bias_given = select_bias->count() > 0;
  sweep.seed_given = sweep_seed->count() > 0;
  convert.power_given = convert_power->count() > 0;
  convert.photons_given = convert_photons->count() > 0;

  try {
    if (app.got_subcommand(synth_cmd)) return run_synth(synth);
    if (app.got_subcommand(fit_cmd)) return run_fit(fit);
    if (app.got_subcommand(select_cmd)) return run_select(select);
    if (app.got_subcommand(sweep_cmd)) return run_sweep(sweep);
    if (app.got_subcommand(convert_cmd)) return run_convert(convert);
  } catch (const epdc::selection_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const epdc::convergence_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const epdc::parse_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const epdc::validation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const epdc::identifiability_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const epdc::tail_mass_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const epdc::io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
