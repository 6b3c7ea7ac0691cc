// ============================================================================
// trust_region.hpp -- box-projected Levenberg-Marquardt least squares
//
// Minimizes cost(x) = sum_k r_k(x)^2 over a box [lo, hi] using damped
// normal equations with Marquardt diagonal scaling and Nielsen's lambda
// update. Steps are projected onto the box; convergence is judged on the
// projected gradient (components pushing outside an active bound are
// zeroed). Fully deterministic: no randomness, fixed evaluation order.
// ============================================================================
#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace epdc {

struct TrustRegionOptions {
  double gradient_tol = 1e-10;  // on the inf-norm of the projected chi^2 gradient
  double step_tol = 1e-12;      // relative step size
  double f_tol = 1e-13;         // relative cost decrease on an accepted step
  int max_iterations = 500;
  // Per-coordinate cap on trial steps. A single unbounded step can saturate
  // a transformed coordinate (log/logit), zeroing its Jacobian column and
  // stranding the iterate on a flat plateau; the cap forces saturation to be
  // reached only through a run of genuinely cost-decreasing moves.
  double max_step = 2.0;
};

enum class Termination { gradient, step, f_tol, cost_zero, max_iterations, stalled };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::gradient: return "gradient";
    case Termination::step: return "step";
    case Termination::f_tol: return "f_tol";
    case Termination::cost_zero: return "cost_zero";
    case Termination::max_iterations: return "max_iterations";
    case Termination::stalled: return "stalled";
  }
  return "unknown";
}

struct TrustRegionResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double cost = 0.0;  // sum of squared residuals at x
  double projected_gradient_norm = 0.0;
  int iterations = 0;
  Termination termination = Termination::max_iterations;
  bool converged = false;
};

namespace detail {

/// Gradient of the chi^2 objective with active-bound components removed.
inline Eigen::VectorXd project_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd out = g;
  const double edge = 1e-14;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double span = hi[i] - lo[i];
    if (x[i] <= lo[i] + edge * (1.0 + span) && g[i] > 0.0) out[i] = 0.0;
    if (x[i] >= hi[i] - edge * (1.0 + span) && g[i] < 0.0) out[i] = 0.0;
  }
  return out;
}

/// Undamped Gauss-Newton step restricted to coordinates that are numerically
/// alive and not pressing outward against an active bound. Coordinates whose
/// columns carry no curvature (a logit coordinate parked where the model
/// rounds to exactly 0 or 1) have zero gradient as well: Newton has no
/// information on them and the correct move is none. Bound-active coordinates
/// proposing an outward move are fixed and the system re-solved, so no
/// component of the returned step starts out pressing against a bound it
/// already touches (the caller still clips overshoots toward far bounds).
inline bool gauss_newton_step(const Eigen::MatrixXd& hess, const Eigen::VectorXd& g,
                              const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                              const Eigen::VectorXd& hi, Eigen::VectorXd& h) {
  const Eigen::Index n = hess.rows();
  const double dmax = hess.diagonal().maxCoeff();
  if (!(dmax > 0.0)) return false;
  const double edge = 1e-14;

  std::vector<Eigen::Index> live;
  live.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    if (hess(j, j) > dmax * 1e-28) live.push_back(j);
  }

  // Each pass either succeeds or removes at least one coordinate.
  while (!live.empty()) {
    const Eigen::Index m = static_cast<Eigen::Index>(live.size());
    Eigen::MatrixXd a(m, m);
    Eigen::VectorXd b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      b[r] = -g[live[static_cast<std::size_t>(r)]];
      for (Eigen::Index c = 0; c < m; ++c) {
        a(r, c) = hess(live[static_cast<std::size_t>(r)], live[static_cast<std::size_t>(c)]);
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd hr = ldlt.solve(b);
    if (!hr.allFinite()) return false;

    bool outward = false;
    std::vector<Eigen::Index> kept;
    kept.reserve(live.size());
    for (Eigen::Index r = 0; r < m; ++r) {
      const Eigen::Index j = live[static_cast<std::size_t>(r)];
      const double span = hi[j] - lo[j];
      const bool at_lo = x[j] <= lo[j] + edge * (1.0 + span);
      const bool at_hi = x[j] >= hi[j] - edge * (1.0 + span);
      if ((at_lo && hr[r] < 0.0) || (at_hi && hr[r] > 0.0)) {
        outward = true;
      } else {
        kept.push_back(j);
      }
    }
    if (!outward) {
      h = Eigen::VectorXd::Zero(n);
      for (Eigen::Index r = 0; r < m; ++r) h[live[static_cast<std::size_t>(r)]] = hr[r];
      return true;
    }
    live.swap(kept);
  }
  return false;
}

}  // namespace detail

/// fn(x, r, J) fills the residual vector and Jacobian at x.
template <typename Fn>
TrustRegionResult minimize_least_squares(Fn&& fn, Eigen::VectorXd x,
                                         const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                         const TrustRegionOptions& opt = {}) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  x = x.cwiseMax(lo).cwiseMin(hi);

  VectorXd r;
  MatrixXd jac;
  fn(x, r, jac);
  double half_cost = 0.5 * r.squaredNorm();

  VectorXd g = jac.transpose() * r;  // gradient of 0.5*chi^2
  MatrixXd hess = jac.transpose() * jac;

  TrustRegionResult res;
  res.termination = Termination::max_iterations;

  auto finish = [&](Termination t) {
    res.x = x;
    res.residuals = r;
    res.jacobian = jac;
    res.cost = 2.0 * half_cost;
    res.projected_gradient_norm =
        detail::project_gradient(2.0 * g, x, lo, hi).template lpNorm<Eigen::Infinity>();
    res.termination = t;
    res.converged = (t == Termination::gradient || t == Termination::step ||
                     t == Termination::f_tol || t == Termination::cost_zero);
    return res;
  };

  if (detail::project_gradient(2.0 * g, x, lo, hi).lpNorm<Eigen::Infinity>() <= opt.gradient_tol) {
    return finish(Termination::gradient);
  }

  double lambda = 1e-3;
  double nu = 2.0;
  bool any_accepted = false;

  // Marquardt scaling: the damping multiplies a per-coordinate scale, so every
  // coordinate is throttled relative to its own curvature and weakly curved
  // directions keep Newton-scale steps (a single additive lambda would freeze
  // them long before the strongly curved ones are damped). The scale is the
  // running maximum of the Gauss-Newton diagonal, as in the classic MINPACK
  // routines: if it tracked the current diagonal instead, a coordinate whose
  // curvature collapses mid-trajectory (a logit coordinate approaching its
  // clamp) would suddenly see near-zero damping, take capped-length steps at
  // any lambda, and fling the iterate into a box corner it cannot leave. The
  // running maximum keeps such steps priced at the coordinate's historic
  // stiffness while lambda is large; once progress is steady, Nielsen's update
  // shrinks lambda enough that the damping no longer binds.
  VectorXd scale = hess.diagonal();

  bool prev_accepted = true;

  for (res.iterations = 1; res.iterations <= opt.max_iterations; ++res.iterations) {
    scale = scale.cwiseMax(hess.diagonal());
    const double lambda_heavy = 1e8;  // multiplier beyond which nothing moves

    // Trusted-model fast path: once the damped iteration has earned trust
    // (lambda driven well below its starting value by a run of accepted
    // steps), take the pure Gauss-Newton step, shrunk uniformly to fit the
    // per-coordinate cap. Dropping the damping entirely is what lets a
    // coordinate whose curvature has collapsed (and which the monotone scale
    // deliberately over-prices while the model is in doubt) finish its long
    // flat traversal at cap speed instead of the damped path's logarithmic
    // crawl: a logit coordinate bound for its clamp has a Newton step that
    // grows like exp(|v|), and the capped march covers the remaining stretch
    // in O(span / max_step) accepted steps. The shrink must be uniform: any
    // fraction of a Newton step keeps a positive model decrease, while
    // clipping coordinates independently bends the direction and can turn
    // the coupled quadratic uphill. The trust gate matters at the other end
    // of a run: far from any optimum, capped Newton leaps chase greedy cost
    // decrease into saturation basins that the cautious damped walk avoids.
    // The cost test below still gates every move; a rejection hands control
    // back to the damped path (without inflating lambda, which was never
    // consulted) until a step is accepted.
    const double lambda_trust = 1e-5;
    VectorXd h;
    bool fast_path = false;
    if (prev_accepted && lambda < lambda_trust) {
      VectorXd h_gn;
      if (detail::gauss_newton_step(hess, g, x, lo, hi, h_gn)) {
        const double h_max = h_gn.lpNorm<Eigen::Infinity>();
        if (h_max > opt.max_step) h_gn *= opt.max_step / h_max;
        h = std::move(h_gn);
        fast_path = true;
      }
    }
    if (!fast_path) {
      const double dmax = scale.maxCoeff();
      const double dfloor = std::max(dmax * 1e-28, 1e-300);
      MatrixXd a = hess;
      a.diagonal() += lambda * scale.cwiseMax(dfloor);
      Eigen::LDLT<MatrixXd> ldlt(a);
      bool solved = ldlt.info() == Eigen::Success;
      if (solved) {
        h = ldlt.solve(-g);
        solved = h.allFinite();
      }
      if (!solved) {
        lambda *= nu;
        nu *= 2.0;
        prev_accepted = false;
        if (lambda > 1e120) return finish(Termination::stalled);
        continue;
      }
    }

    // A step at the cap is mid-traversal: its tiny realized decrease says
    // nothing about the decrease the full model step would have achieved, so
    // the f_tol test below must not treat it as exhausted progress.
    const bool at_cap = h.lpNorm<Eigen::Infinity>() >= opt.max_step * (1.0 - 1e-12);
    const VectorXd x_new = (x + h.cwiseMin(opt.max_step).cwiseMax(-opt.max_step))
                               .cwiseMax(lo)
                               .cwiseMin(hi);
    const VectorXd h_eff = x_new - x;
    const double step_norm = h_eff.norm();
    const bool step_below_tol = step_norm <= opt.step_tol * (x.norm() + opt.step_tol);
    if (step_norm == 0.0) {  // fully blocked by the box; damp harder
      // Once the damping is already heavy, a blocked step means no feasible
      // direction improves the cost: an iterate that made real progress
      // before is numerically converged. (A start that never moved is not:
      // its position is arbitrary, so label it stalled instead.)
      if (!fast_path && lambda >= lambda_heavy && any_accepted) {
        return finish(Termination::step);
      }
      if (!fast_path) {
        lambda *= nu;
        nu *= 2.0;
      }
      prev_accepted = false;
      if (lambda > 1e120) return finish(Termination::stalled);
      continue;
    }

    VectorXd r_new;
    MatrixXd jac_new;
    fn(x_new, r_new, jac_new);
    const double half_cost_new = 0.5 * r_new.squaredNorm();

    // Predicted reduction of the quadratic model along the projected step.
    const double predicted =
        -g.dot(h_eff) - 0.5 * h_eff.dot(hess * h_eff);

    if (std::isfinite(half_cost_new) && half_cost_new < half_cost) {
      const double actual = half_cost - half_cost_new;
      const double f_floor = opt.f_tol * half_cost;
      const double rho = predicted > 0.0 ? actual / predicted : 1.0;
      any_accepted = true;
      prev_accepted = true;
      x = x_new;
      r.swap(r_new);
      jac.swap(jac_new);
      half_cost = half_cost_new;
      g = jac.transpose() * r;
      hess = jac.transpose() * jac;
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      lambda = std::max(lambda, 1e-15);
      nu = 2.0;

      if (detail::project_gradient(2.0 * g, x, lo, hi).lpNorm<Eigen::Infinity>() <=
          opt.gradient_tol) {
        return finish(Termination::gradient);
      }
      if (half_cost == 0.0) return finish(Termination::cost_zero);
      if (actual <= f_floor && predicted <= f_floor && !at_cap) {
        return finish(Termination::f_tol);
      }
      if (step_below_tol) return finish(Termination::step);
    } else {
      // A rejected step this small under heavy damping cannot be refined
      // further; only ever-smaller rejected steps would follow.
      if (!fast_path && step_below_tol && lambda >= lambda_heavy && any_accepted) {
        return finish(Termination::step);
      }
      if (!fast_path) {
        lambda *= nu;
        nu *= 2.0;
      }
      prev_accepted = false;
      if (lambda > 1e120) return finish(Termination::stalled);
    }
  }
  res.iterations = opt.max_iterations;
  return finish(Termination::max_iterations);
}

}  // namespace epdc
