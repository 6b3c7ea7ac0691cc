#include "epdc/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>

namespace epdc {

namespace {

SweepPoint analyze_one(double bias, const std::vector<ClickStatistics>& data,
                       const SelectionConfig& selection) {
  SweepPoint point;
  point.bias_current = bias;
  try {
    point.report = select_model(data, selection);
    point.ok = true;
  } catch (const selection_error& e) {
    point.report = e.ladder;
    point.failure = e.what();
  } catch (const std::runtime_error& e) {
    point.failure = e.what();
  }
  return point;
}

double cell_error(const CandidateFit& fit, const std::string& name) {
  for (std::size_t j = 0; j < fit.free_names.size(); ++j) {
    if (fit.free_names[j] == name) {
      const auto idx = static_cast<Eigen::Index>(j);
      return std::sqrt(std::max(fit.covariance(idx, idx), 0.0));
    }
  }
  return 0.0;  // pinned or absent parameter carries no uncertainty
}

}  // namespace

SweepResult analyze_sweep(const std::map<double, std::vector<ClickStatistics>>& datasets,
                          const SweepConfig& config) {
  if (datasets.empty()) {
    throw arity_error("analyze_sweep: no bias currents supplied");
  }

  std::vector<std::pair<double, const std::vector<ClickStatistics>*>> inputs;
  inputs.reserve(datasets.size());
  for (const auto& [bias, data] : datasets) inputs.emplace_back(bias, &data);

  SweepResult result;
  result.points.resize(inputs.size());
  if (config.threads > 1) {
    std::vector<std::future<SweepPoint>> futures;
    futures.reserve(inputs.size());
    for (const auto& [bias, data] : inputs) {
      futures.push_back(std::async(std::launch::async, analyze_one, bias,
                                   std::cref(*data), std::cref(config.selection)));
    }
    for (std::size_t k = 0; k < futures.size(); ++k) result.points[k] = futures[k].get();
  } else {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      result.points[k] = analyze_one(inputs[k].first, *inputs[k].second, config.selection);
    }
  }

  int table_i_max = 0;
  for (const auto& point : result.points) {
    if (point.ok) table_i_max = std::max(table_i_max, point.report.selected_i_max);
  }
  result.table.i_max = table_i_max;

  for (const auto& point : result.points) {
    if (!point.ok) continue;
    const CandidateFit& fit = point.report.selected();
    result.table.bias.push_back(point.bias_current);
    result.table.eta.push_back({fit.model.eta, cell_error(fit, "eta"), true});
    std::vector<SweepCell> row(static_cast<std::size_t>(table_i_max) + 1);
    for (int i = 0; i <= table_i_max; ++i) {
      auto& cell = row[static_cast<std::size_t>(i)];
      if (i <= fit.model.i_max()) {
        std::ostringstream name;
        name << "p_" << i;
        cell.value = fit.model.p[static_cast<std::size_t>(i)];
        cell.error = cell_error(fit, name.str());
        cell.fitted = true;
      }  // else: implicit tail, keep the {1, 0, false} default
    }
    result.table.p.push_back(std::move(row));
  }
  return result;
}

double regime_crossover(const EpdcModel& model, int i, int j) {
  model.validate();
  if (i < 0 || j <= i || j > model.i_max()) {
    throw validation_error("regime_crossover: need photon orders 0 <= i < j <= i_max");
  }
  const double p_i = model.p[static_cast<std::size_t>(i)];
  const double p_j = model.p[static_cast<std::size_t>(j)];
  if (p_i <= 0.0 || p_j <= 0.0) {
    std::ostringstream msg;
    msg << "regime_crossover: orders " << i << " and " << j
        << " never exchange dominance (p_" << (p_i <= 0.0 ? i : j) << " = 0)";
    throw crossover_error(msg.str());
  }
  // p_i mu^i / i! = p_j mu^j / j!  =>  mu^(j-i) = p_i j! / (p_j i!)
  double factorial_ratio = 1.0;  // j! / i!
  for (int k = i + 1; k <= j; ++k) factorial_ratio *= static_cast<double>(k);
  return std::pow(p_i * factorial_ratio / p_j, 1.0 / static_cast<double>(j - i));
}

int dominant_order(const EpdcModel& model, double threshold) {
  model.validate();
  if (threshold <= 0.0 || threshold > 1.0) {
    throw validation_error("dominant_order: threshold must lie in (0, 1]");
  }
  for (int i = 1; i <= model.i_max(); ++i) {
    if (model.p[static_cast<std::size_t>(i)] >= threshold) return i;
  }
  return model.i_max() + 1;  // implicit tail p = 1 always qualifies
}

std::vector<double> regime_boundaries(const SweepResult& sweep, double dominance_threshold) {
  std::vector<const SweepPoint*> analyzed;
  for (const auto& point : sweep.points) {
    if (point.ok) analyzed.push_back(&point);
  }
  if (analyzed.size() < 3) {
    throw arity_error("regime_boundaries: need at least 3 analyzed sweep points");
  }
  std::vector<double> boundaries;
  int prev = dominant_order(analyzed.front()->report.selected().model, dominance_threshold);
  for (std::size_t k = 1; k < analyzed.size(); ++k) {
    const int cur = dominant_order(analyzed[k]->report.selected().model, dominance_threshold);
    if (cur != prev) {
      boundaries.push_back(
          0.5 * (analyzed[k - 1]->bias_current + analyzed[k]->bias_current));
    }
    prev = cur;
  }
  return boundaries;
}

}  // namespace epdc
