#include "epdc/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <sstream>

namespace epdc {

const CandidateFit& SelectionReport::selected() const {
  for (const auto& c : candidates) {
    if (c.model.i_max() == selected_i_max) return c;
  }
  throw validation_error("SelectionReport: no candidate matches selected_i_max");
}

namespace {

struct LadderRun {
  std::optional<CandidateFit> fit;  // converged or best-so-far
  bool converged = false;
  std::string failure;  // nonempty when excluded before/instead of converging
};

LadderRun run_one(const std::vector<ClickStatistics>& data, int i_max,
                  const FitConfig& fit_config) {
  LadderRun out;
  try {
    out.fit = fit_candidate(data, i_max, fit_config);
    out.converged = true;
  } catch (const convergence_error& e) {
    out.fit = e.best_so_far;
    out.failure = "did not converge";
  } catch (const arity_error& e) {
    out.failure = e.what();
  }
  return out;
}

double criterion_value(const CandidateFit& fit, SelectionRule rule) {
  const double k = static_cast<double>(fit.n_free);
  switch (rule) {
    case SelectionRule::aic:
      return fit.chi2 + 2.0 * k;
    case SelectionRule::bic:
      return fit.chi2 + k * std::log(static_cast<double>(fit.n_points));
    case SelectionRule::chi2_parsimony:
    default:
      return fit.chi2_reduced;
  }
}

}  // namespace

SelectionReport select_model(const std::vector<ClickStatistics>& data,
                             const SelectionConfig& config) {
  return select_model(data, config.i_max_lo, config.i_max_hi, config);
}

SelectionReport select_model(const std::vector<ClickStatistics>& data, int i_max_lo,
                             int i_max_hi, const SelectionConfig& config) {
  if (i_max_lo < 0) throw validation_error("select_model: i_max range lower bound must be >= 0");
  if (i_max_hi < i_max_lo) throw validation_error("select_model: empty i_max range");

  const int n_orders = i_max_hi - i_max_lo + 1;
  std::vector<LadderRun> runs(static_cast<std::size_t>(n_orders));
  if (config.threads > 1) {
    std::vector<std::future<LadderRun>> futures;
    futures.reserve(static_cast<std::size_t>(n_orders));
    for (int k = 0; k < n_orders; ++k) {
      futures.push_back(std::async(std::launch::async, run_one, std::cref(data),
                                   i_max_lo + k, std::cref(config.fit)));
    }
    for (int k = 0; k < n_orders; ++k) {
      runs[static_cast<std::size_t>(k)] = futures[static_cast<std::size_t>(k)].get();
    }
  } else {
    for (int k = 0; k < n_orders; ++k) {
      runs[static_cast<std::size_t>(k)] = run_one(data, i_max_lo + k, config.fit);
    }
  }

  SelectionReport report;
  double best_chi2_red = std::numeric_limits<double>::infinity();
  double best_criterion = std::numeric_limits<double>::infinity();
  for (const auto& run : runs) {
    if (run.fit) report.candidates.push_back(*run.fit);
    if (run.converged) {
      best_chi2_red = std::min(best_chi2_red, run.fit->chi2_reduced);
      best_criterion = std::min(best_criterion, criterion_value(*run.fit, config.rule));
    }
  }

  const double threshold =
      std::max(config.absolute_cap, config.relative_factor * best_chi2_red);

  for (int k = 0; k < n_orders; ++k) {
    const auto& run = runs[static_cast<std::size_t>(k)];
    RuleTraceEntry entry;
    entry.i_max = i_max_lo + k;
    entry.fitted = run.fit.has_value();
    entry.converged = run.converged;
    if (run.fit) entry.chi2_reduced = run.fit->chi2_reduced;
    std::ostringstream reason;
    if (!run.converged) {
      entry.accepted = false;
      reason << "excluded: " << (run.failure.empty() ? "did not converge" : run.failure);
    } else {
      entry.criterion = criterion_value(*run.fit, config.rule);
      if (config.rule == SelectionRule::chi2_parsimony) {
        entry.accepted = entry.chi2_reduced <= threshold;
        reason << (entry.accepted ? "accepted" : "rejected") << ": chi2_red = "
               << entry.chi2_reduced << (entry.accepted ? " <= " : " > ")
               << "threshold " << threshold;
      } else {
        // Information criteria: accept the minimizer (ties go to smaller
        // i_max via the first-accepted scan below).
        entry.accepted = entry.criterion <= best_criterion;
        reason << (entry.accepted ? "accepted" : "rejected")
               << (config.rule == SelectionRule::aic ? ": AIC = " : ": BIC = ")
               << entry.criterion << " vs best " << best_criterion;
      }
    }
    entry.reason = reason.str();
    report.rule_trace.push_back(std::move(entry));
  }

  for (const auto& entry : report.rule_trace) {
    if (entry.accepted) {
      report.selected_i_max = entry.i_max;
      break;
    }
  }

  if (report.selected_i_max < 0) {
    std::ostringstream msg;
    msg << "select_model: no candidate in i_max range [" << i_max_lo << ", " << i_max_hi
        << "] passed the selection rule";
    int n_converged = 0;
    for (const auto& run : runs) n_converged += run.converged ? 1 : 0;
    if (n_converged == 0) msg << " (no candidate converged)";
    throw selection_error(msg.str(), std::move(report));
  }
  return report;
}

}  // namespace epdc
