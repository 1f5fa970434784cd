#pragma once

#include "ptflow/flows.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace ptflow::integrate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Method { rk45, rk4 };

/// raw: step the flow in physical time t, with the step capped at half the
///      distance to the horizon so the singular gain is never evaluated at
///      or beyond it.
/// stretched: integrate in s = integral of T, where the time-scaled flows
///      with constant gains become autonomous (the substitution is exact,
///      not an approximation), then map samples back through physical_time.
/// auto_select: stretched for time-scaled flows, raw otherwise.
enum class Mode { auto_select, raw, stretched };

enum class StopReason { reached_t_stop, equilibrium, step_floor, max_steps };

[[nodiscard]] inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::reached_t_stop: return "reached_t_stop";
    case StopReason::equilibrium: return "equilibrium";
    case StopReason::step_floor: return "step_floor";
    default: return "max_steps";
  }
}

struct IntegratorConfig {
  Method method = Method::rk45;
  double rel_tol = 1e-8;        ///< adaptive only
  double abs_tol = 1e-10;
  double initial_step = 0.0;    ///< <= 0: automatic (rk45) / span-derived (rk4)
  std::int64_t max_steps = 10'000'000;
  double delta_rel = 1e-6;      ///< terminal clearance: stop at t0 + Tp (1 - delta_rel)
  Mode mode = Mode::auto_select;
  int sample_count = 1000;      ///< uniform-in-t output samples, >= 2
  double t_end = std::numeric_limits<double>::quiet_NaN();  ///< autonomous flows only
  /// Gradient-norm level treated as "numerically at the minimizer" (<= 0
  /// disables the equilibrium stop entirely). Gradient-flow runs also stop
  /// once the state pins at the integrator's resolution — net movement over
  /// 16 consecutive accepted steps below a few tolerance units — because
  /// from there the gradient norm plateaus near
  /// ||Hessian(x*)|| * (abs_tol + rel_tol |x*|): the step controller injects
  /// local error at the tolerance scale every step, so tighter levels are
  /// unreachable no matter how long the run continues (and r >= 2 stretched
  /// horizons still have ~1e6 integration units to go). The regulator is
  /// exempt from both stops: its scalar decay stays relative-controlled
  /// arbitrarily far down and never pins.
  double equilibrium_eps = 1e-12;
};

/// Sampled solution. All vectors are aligned with times; rows of states are
/// the state at each sample. lyap_vals defaults to f - f* (f when no minimum
/// is known) and envelope_vals to the constant V(t0) — a trivial descent
/// bound — until a diagnostics pass overwrites them with a specific
/// Lyapunov/envelope pair.
struct Trajectory {
  std::vector<double> times;
  MatrixXd states;
  VectorXd f_vals;
  VectorXd grad_norms;
  VectorXd lyap_vals;
  VectorXd envelope_vals;
  StopReason stop_reason = StopReason::reached_t_stop;
  std::int64_t accepted_steps = 0;
  std::int64_t rejected_steps = 0;
};

using Rhs = std::function<void(double, const VectorXd&, VectorXd&)>;

/// Options of the generic driver below. step_cap, when set, bounds the step
/// taken from time tau; at_equilibrium, when set, stops the run (and holds
/// the state over the remaining samples) once it reports true for
/// equilibrium_hold consecutive accepted steps.
struct OdeOptions {
  Method method = Method::rk45;
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double initial_step = 0.0;
  std::int64_t max_steps = 10'000'000;
  std::function<double(double)> step_cap;
  std::function<bool(const VectorXd&)> at_equilibrium;
  int equilibrium_hold = 5;
  /// Resolution-stall stop: when > 0, the run also ends with reason
  /// equilibrium once stall_window consecutive accepted steps move the state
  /// by no more than stall_factor tolerance units net (component i is scaled
  /// by abs_tol + rel_tol |y_i|, as in the error norm). Past that point the
  /// state is pinned at the integrator's resolution: the step controller
  /// injects local error at the tolerance scale every step, so a contracting
  /// trajectory hovers there indefinitely instead of converging further.
  int stall_window = 0;
  double stall_factor = 8.0;
};

struct OdeSolution {
  MatrixXd states;  ///< targets.size() x n
  StopReason reason = StopReason::reached_t_stop;
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
};

namespace detail {

// Dormand-Prince 5(4) coefficients (FSAL pair).
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

[[nodiscard]] inline double error_norm(const VectorXd& err, const VectorXd& y0,
                                       const VectorXd& y1, double atol, double rtol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sk = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sk;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

/// Step-size guess for the first step (Hairer-style, order 5). Scales are
/// floored at 1e-290 so that near-zero absolute tolerances stay usable.
[[nodiscard]] inline double initial_step_guess(const Rhs& rhs, double tau, const VectorXd& y0,
                                               const VectorXd& f0, double span, double atol,
                                               double rtol) {
  const auto scaled_rms = [&](const VectorXd& v) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double sk = std::max(atol + rtol * std::abs(y0[i]), 1e-290);
      acc += (v[i] / sk) * (v[i] / sk);
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
  };
  const double d0 = scaled_rms(y0);
  const double d1 = scaled_rms(f0);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);
  VectorXd y1 = y0 + h0 * f0;
  VectorXd f1(y0.size());
  rhs(tau + h0, y1, f1);
  const double d2 = scaled_rms(f1 - f0) / h0;
  const double der = std::max(d1, d2);
  const double h1 = (der <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / der, 0.2);
  return std::min({100.0 * h0, h1, span});
}

/// Cubic Hermite interpolant over one accepted step [ta, ta+h] with endpoint
/// derivatives fa, fb; exact (bitwise) at theta = 0 and theta = 1.
inline void hermite(double theta, double h, const VectorXd& ya, const VectorXd& fa,
                    const VectorXd& yb, const VectorXd& fb, VectorXd& out) {
  const double t2 = theta * theta;
  const double h00 = (1.0 + 2.0 * theta) * (1.0 - theta) * (1.0 - theta);
  const double h10 = theta * (1.0 - theta) * (1.0 - theta);
  const double h01 = t2 * (3.0 - 2.0 * theta);
  const double h11 = t2 * (theta - 1.0);
  out = h00 * ya + (h10 * h) * fa + h01 * yb + (h11 * h) * fb;
}

}  // namespace detail

/// Integrates dy/dtau = rhs(tau, y) from targets.front() and records the
/// solution at every target (strictly increasing; the first must equal the
/// start, where y0 is recorded verbatim). Interior targets are filled from
/// the cubic Hermite interpolant of the accepted step containing them; the
/// final target is always hit by an exact step endpoint.
///
/// Throws std::runtime_error if the state or its derivative is non-finite at
/// an accepted point. A diverging solution that keeps rejecting steps ends
/// with reason step_floor; exceeding max_steps (accepted + rejected) ends
/// with reason max_steps. In both cases — and after an equilibrium stop —
/// the remaining targets hold the last state.
[[nodiscard]] inline OdeSolution solve_ode(const Rhs& rhs, const VectorXd& y0,
                                           const std::vector<double>& targets,
                                           const OdeOptions& opt) {
  const auto n = y0.size();
  const auto m = static_cast<Eigen::Index>(targets.size());
  if (m < 2) throw std::invalid_argument("solve_ode: need at least two targets");
  for (Eigen::Index j = 1; j < m; ++j)
    if (!(targets[static_cast<size_t>(j)] > targets[static_cast<size_t>(j - 1)]))
      throw std::invalid_argument("solve_ode: targets must be strictly increasing");

  OdeSolution sol;
  sol.states.resize(m, n);
  sol.states.row(0) = y0;

  double tau = targets.front();
  const double tau_end = targets.back();
  Eigen::Index next = 1;

  VectorXd y = y0;
  VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), yerr(n), yout(n);
  rhs(tau, y, k1);
  if (!y.allFinite() || !k1.allFinite())
    throw std::runtime_error("solve_ode: non-finite state or derivative at tau = " +
                             std::to_string(tau));

  const bool adaptive = opt.method == Method::rk45;
  const double cap0 = opt.step_cap ? opt.step_cap(tau) : std::numeric_limits<double>::infinity();
  double h_prop;
  if (opt.initial_step > 0.0) {
    h_prop = opt.initial_step;
  } else if (adaptive) {
    h_prop = detail::initial_step_guess(rhs, tau, y, k1, std::min(tau_end - tau, cap0),
                                        opt.abs_tol, opt.rel_tol);
  } else {
    h_prop = (tau_end - tau) / (10.0 * static_cast<double>(m - 1));
  }

  // PI step control (used by rk45 only).
  constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, safe = 0.9;
  constexpr double facc1 = 1.0 / 0.2, facc2 = 1.0 / 10.0;  // 1/facmin, 1/facmax
  double facold = 1e-4;
  bool last_rejected = false;
  int eq_count = 0;
  VectorXd stall_mark = y;
  int stall_steps = 0;

  const auto hold_remaining = [&](StopReason why) {
    for (Eigen::Index j = next; j < m; ++j) sol.states.row(j) = y;
    sol.reason = why;
  };

  while (tau < tau_end) {
    if (sol.accepted + sol.rejected >= opt.max_steps) {
      hold_remaining(StopReason::max_steps);
      return sol;
    }
    double h = h_prop;
    if (opt.step_cap) h = std::min(h, opt.step_cap(tau));
    bool last = false;
    if (tau + h >= tau_end) {
      h = tau_end - tau;
      last = true;
    }
    if (h <= 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(tau))) {
      hold_remaining(StopReason::step_floor);
      return sol;
    }

    double err = 0.0;
    if (adaptive) {
      using namespace detail;
      ytmp = y + h * (a21 * k1);
      rhs(tau + c2 * h, ytmp, k2);
      ytmp = y + h * (a31 * k1 + a32 * k2);
      rhs(tau + c3 * h, ytmp, k3);
      ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
      rhs(tau + c4 * h, ytmp, k4);
      ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      rhs(tau + c5 * h, ytmp, k5);
      ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      rhs(tau + h, ytmp, k6);
      ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      rhs(tau + h, ynew, k7);  // FSAL stage, also the Hermite end slope
      yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err = error_norm(yerr, y, ynew, opt.abs_tol, opt.rel_tol);
    } else {
      // Classical RK4; one extra evaluation provides the Hermite end slope.
      rhs(tau + 0.5 * h, y + (0.5 * h) * k1, k2);
      rhs(tau + 0.5 * h, y + (0.5 * h) * k2, k3);
      rhs(tau + h, y + h * k3, k4);
      ynew = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      rhs(tau + h, ynew, k7);
    }

    const bool accept = !adaptive || (std::isfinite(err) && err <= 1.0);
    if (accept && ynew.allFinite()) {
      const double tau_new = last ? tau_end : tau + h;
      while (next < m && targets[static_cast<size_t>(next)] <= tau_new) {
        const double theta = (targets[static_cast<size_t>(next)] - tau) / h;
        detail::hermite(theta, h, y, k1, ynew, k7, yout);
        sol.states.row(next) = yout;
        ++next;
      }
      ++sol.accepted;
      tau = tau_new;
      y.swap(ynew);
      k1.swap(k7);
      if (!k1.allFinite())
        throw std::runtime_error("solve_ode: non-finite derivative at tau = " +
                                 std::to_string(tau));

      if (opt.at_equilibrium && opt.at_equilibrium(y)) {
        if (++eq_count >= opt.equilibrium_hold) {
          hold_remaining(StopReason::equilibrium);
          return sol;
        }
      } else {
        eq_count = 0;
      }

      if (opt.stall_window > 0 && ++stall_steps >= opt.stall_window) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double sk = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]),
                                                                 std::abs(stall_mark[i]));
          const double q = (y[i] - stall_mark[i]) / sk;
          acc += q * q;
        }
        if (std::sqrt(acc / static_cast<double>(n)) <= opt.stall_factor) {
          hold_remaining(StopReason::equilibrium);
          return sol;
        }
        stall_mark = y;
        stall_steps = 0;
      }

      if (adaptive) {
        const double fac11 = std::pow(std::max(err, 1e-30), expo1);
        double fac = fac11 / std::pow(facold, beta);
        fac = std::max(facc2, std::min(facc1, fac / safe));
        double hnew = h / fac;
        if (last_rejected) hnew = std::min(hnew, h);
        facold = std::max(err, 1e-4);
        h_prop = hnew;
        last_rejected = false;
      }
    } else {
      ++sol.rejected;
      if (adaptive && std::isfinite(err)) {
        const double fac11 = std::pow(std::max(err, 1e-30), expo1);
        h_prop = h / std::min(facc1, fac11 / safe);
      } else {
        h_prop = 0.1 * h;  // non-finite trial: retreat hard
      }
      last_rejected = true;
    }
  }

  sol.reason = StopReason::reached_t_stop;
  return sol;
}

namespace detail {

[[nodiscard]] inline Mode resolve_mode(Mode requested, const flows::FlowSpec& spec) {
  if (requested == Mode::auto_select)
    return flows::is_time_varying(spec) ? Mode::stretched : Mode::raw;
  if (requested == Mode::stretched) {
    if (!flows::is_time_varying(spec))
      throw std::invalid_argument("integrate: stretched mode requires a time-scaled flow");
    if (const auto* p = std::get_if<flows::PrescribedTimeGF>(&spec); p && p->k_schedule)
      throw std::invalid_argument(
          "integrate: stretched mode requires a constant gain k (a k(t) schedule leaves the "
          "time scale in the substituted dynamics)");
  }
  return requested;
}

}  // namespace detail

/// Integrates the flow from x0 and samples it uniformly in physical time.
/// Time-scaled flows run on [t0, t0 + Tp (1 - delta_rel)]; autonomous flows
/// on [0, t_end] (cfg.t_end required). Samples are strictly increasing and
/// the last one always equals the stop time. See Mode for the two paths.
///
/// A gradient-flow run also stops (holding the state over the remaining
/// samples) when the gradient norm stays at or below equilibrium_eps for 5
/// consecutive accepted steps, or when the state pins at the integrator's
/// resolution (see IntegratorConfig::equilibrium_eps): past that point the
/// state is numerically at an equilibrium, and for the non-Lipschitz q-flows
/// continuing would only chatter around it.
[[nodiscard]] inline Trajectory integrate(const flows::FlowSpec& spec,
                                          const objectives::Objective* obj, const VectorXd& x0,
                                          const IntegratorConfig& cfg) {
  flows::validate_flow(spec);
  if (flows::needs_objective(spec)) {
    if (obj == nullptr) throw std::invalid_argument("integrate: flow requires an objective");
    if (x0.size() != obj->dim)
      throw std::invalid_argument("integrate: x0 dimension " + std::to_string(x0.size()) +
                                  " does not match objective dimension " +
                                  std::to_string(obj->dim));
  } else {
    if (obj != nullptr) throw std::invalid_argument("integrate: PTRegulator takes no objective");
    if (x0.size() != 1) throw std::invalid_argument("integrate: PTRegulator state must be scalar");
  }
  if (cfg.sample_count < 2) throw std::invalid_argument("integrate: sample_count must be >= 2");
  if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0))
    throw std::invalid_argument("integrate: tolerances must be > 0");
  if (!(cfg.delta_rel > 0.0 && cfg.delta_rel < 1.0))
    throw std::invalid_argument("integrate: delta_rel must lie in (0, 1)");
  if (cfg.max_steps < 1) throw std::invalid_argument("integrate: max_steps must be >= 1");

  const bool tv = flows::is_time_varying(spec);
  const timescale::TimeScaleParams* ts = flows::time_scale_of(spec);
  double t_begin = 0.0, t_stop = 0.0;
  if (tv) {
    t_begin = ts->t0;
    t_stop = ts->t0 + ts->Tp * (1.0 - cfg.delta_rel);
  } else {
    if (!std::isfinite(cfg.t_end) || !(cfg.t_end > 0.0))
      throw std::invalid_argument("integrate: t_end must be set (> 0) for autonomous flows");
    t_stop = cfg.t_end;
  }
  const Mode mode = detail::resolve_mode(cfg.mode, spec);

  const int N = cfg.sample_count;
  std::vector<double> t_samples(static_cast<size_t>(N));
  for (int j = 0; j < N; ++j)
    t_samples[static_cast<size_t>(j)] = t_begin + (t_stop - t_begin) * j / (N - 1);
  t_samples.back() = t_stop;

  // Equilibrium stops: gradient-norm level plus the resolution-stall
  // detector, gradient flows only; disabled for the regulator, whose
  // criterion-grade runs track the closed form into the denormal range (see
  // IntegratorConfig::equilibrium_eps).
  std::function<bool(const VectorXd&)> at_eq;
  if (obj != nullptr && cfg.equilibrium_eps > 0.0) {
    const auto* o = obj;
    const double eps = cfg.equilibrium_eps;
    at_eq = [o, eps](const VectorXd& y) { return o->grad(y).norm() <= eps; };
  }

  OdeOptions opt;
  opt.method = cfg.method;
  opt.rel_tol = cfg.rel_tol;
  opt.abs_tol = cfg.abs_tol;
  opt.initial_step = cfg.initial_step;
  opt.max_steps = cfg.max_steps;
  opt.at_equilibrium = at_eq;
  if (obj != nullptr && cfg.equilibrium_eps > 0.0) opt.stall_window = 16;

  Rhs rhs;
  std::vector<double> targets;
  if (mode == Mode::stretched) {
    targets.resize(static_cast<size_t>(N));
    for (int j = 0; j < N; ++j)
      targets[static_cast<size_t>(j)] = timescale::stretched_time(*ts, t_samples[static_cast<size_t>(j)]);
    if (const auto* p = std::get_if<flows::PrescribedTimeGF>(&spec)) {
      const double k = p->k;
      const auto* o = obj;
      rhs = [k, o](double, const VectorXd& y, VectorXd& dy) { dy = -k * o->grad(y); };
    } else {
      const double rho = std::get<flows::PTRegulator>(spec).rho();
      rhs = [rho](double, const VectorXd& y, VectorXd& dy) { dy = -rho * y; };
    }
  } else {
    targets = t_samples;
    rhs = [&spec, obj](double t, const VectorXd& y, VectorXd& dy) {
      dy = flows::field(spec, obj, t, y);
    };
    if (tv) {
      const timescale::TimeScaleParams tsc = *ts;
      opt.step_cap = [tsc](double t) { return (tsc.t0 + tsc.Tp - t) / 2.0; };
    }
  }

  OdeSolution sol = solve_ode(rhs, x0, targets, opt);

  Trajectory traj;
  traj.times = std::move(t_samples);
  traj.states = std::move(sol.states);
  traj.stop_reason = sol.reason;
  traj.accepted_steps = sol.accepted;
  traj.rejected_steps = sol.rejected;
  traj.f_vals.resize(N);
  traj.grad_norms.resize(N);
  traj.lyap_vals.resize(N);
  for (int j = 0; j < N; ++j) {
    const VectorXd x = traj.states.row(j);
    if (obj != nullptr) {
      traj.f_vals[j] = obj->eval(x);
      traj.grad_norms[j] = obj->grad(x).norm();
      traj.lyap_vals[j] = obj->min_value ? traj.f_vals[j] - *obj->min_value : traj.f_vals[j];
    } else {
      traj.f_vals[j] = 0.5 * x[0] * x[0];  // the regulator descends f = x^2 / 2
      traj.grad_norms[j] = std::abs(x[0]);
      traj.lyap_vals[j] = traj.f_vals[j];
    }
  }
  traj.envelope_vals = VectorXd::Constant(N, traj.lyap_vals[0]);
  return traj;
}

/// First sample time from which the trajectory stays within eps of x_star
/// (in Euclidean norm) through the final sample; nullopt if never attained.
[[nodiscard]] inline std::optional<double> settling_time(const Trajectory& traj,
                                                         const VectorXd& x_star, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("settling_time: eps must be > 0");
  if (traj.states.cols() != x_star.size())
    throw std::invalid_argument("settling_time: dimension mismatch");
  const auto N = static_cast<Eigen::Index>(traj.times.size());
  Eigen::Index first_bad_after = -1;  // last index with distance > eps
  for (Eigen::Index j = N - 1; j >= 0; --j) {
    if ((traj.states.row(j).transpose() - x_star).norm() > eps) {
      first_bad_after = j;
      break;
    }
  }
  if (first_bad_after == N - 1) return std::nullopt;
  return traj.times[static_cast<size_t>(first_bad_after + 1)];
}

}  // namespace ptflow::integrate
