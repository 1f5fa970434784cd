#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ptflow::timescale {

/// Parameters of the monotone time-scaling gain
///
///   T(t) = Tp^r / (Tp + t0 - t)^r,   t in [t0, t0 + Tp),
///
/// which equals 1 at t = t0, increases strictly, and diverges as t
/// approaches the horizon t0 + Tp. The horizon itself is outside the
/// domain; callers that integrate up to it must stop short (see the
/// integrator's terminal clearance).
struct TimeScaleParams {
  double t0 = 0.0;  ///< start time [s]
  double Tp = 1.0;  ///< prescribed horizon [s], > 0
  int r = 1;        ///< exponent, integer >= 1

  /// Validating factory.
  [[nodiscard]] static TimeScaleParams make(double t0, double Tp, int r = 1) {
    if (!(Tp > 0.0))
      throw std::invalid_argument("TimeScaleParams: Tp must be > 0, got " + std::to_string(Tp));
    if (r < 1)
      throw std::invalid_argument("TimeScaleParams: r must be >= 1, got " + std::to_string(r));
    return TimeScaleParams{t0, Tp, r};
  }

  /// End of the open domain [t0, t0 + Tp).
  [[nodiscard]] double horizon() const { return t0 + Tp; }
};

namespace detail {

inline void check_domain(const TimeScaleParams& p, double t, const char* who) {
  if (!(t >= p.t0) || !(t - p.t0 < p.Tp))
    throw std::domain_error(std::string(who) + ": t = " + std::to_string(t) +
                            " outside [" + std::to_string(p.t0) + ", " +
                            std::to_string(p.horizon()) + ")");
}

}  // namespace detail

/// T(t) = Tp^r / (Tp + t0 - t)^r. Throws std::domain_error outside [t0, t0+Tp).
[[nodiscard]] inline double eval_T(const TimeScaleParams& p, double t) {
  detail::check_domain(p, t, "eval_T");
  const double u = (p.Tp - (t - p.t0)) / p.Tp;  // in (0, 1]
  return std::pow(u, -p.r);
}

/// dT/dt = r * Tp^r / (Tp + t0 - t)^(r+1), equivalently r * T^((r+1)/r) / Tp.
[[nodiscard]] inline double eval_dT(const TimeScaleParams& p, double t) {
  detail::check_domain(p, t, "eval_dT");
  const double u = (p.Tp - (t - p.t0)) / p.Tp;
  return static_cast<double>(p.r) / p.Tp * std::pow(u, -(p.r + 1));
}

/// Integral of T from t0 to t, in closed form:
///   r = 1 : -Tp * log(1 - (t - t0)/Tp)
///   r >= 2: Tp^r/(r-1) * [ (Tp + t0 - t)^(1-r) - Tp^(1-r) ]
/// Monotone increasing from 0, diverging at the horizon. The log1p/expm1
/// forms below keep full relative accuracy near t0, where the integral
/// is ~ (t - t0).
[[nodiscard]] inline double integral_T(const TimeScaleParams& p, double t) {
  detail::check_domain(p, t, "integral_T");
  const double z = (t - p.t0) / p.Tp;  // in [0, 1)
  if (p.r == 1) return -p.Tp * std::log1p(-z);
  return p.Tp / (p.r - 1) * std::expm1(-(p.r - 1) * std::log1p(-z));
}

/// Stretched time s(t) = integral of T from t0 to t. Under ds = T dt a flow
/// driven by T with a constant gain becomes autonomous in s, which removes
/// the terminal-time singularity exactly.
[[nodiscard]] inline double stretched_time(const TimeScaleParams& p, double t) {
  detail::check_domain(p, t, "stretched_time");
  return integral_T(p, t);
}

/// Exact inverse of stretched_time; maps s >= 0 back to physical time.
///   r = 1 : t = t0 + Tp * (1 - exp(-s/Tp))
///   r >= 2: t = t0 + Tp * (1 - (1 + (r-1) s / Tp)^(-1/(r-1)))
[[nodiscard]] inline double physical_time(const TimeScaleParams& p, double s) {
  if (!(s >= 0.0))
    throw std::domain_error("physical_time: s = " + std::to_string(s) + " must be >= 0");
  double t;
  if (p.r == 1) {
    t = p.t0 - p.Tp * std::expm1(-s / p.Tp);
  } else {
    const double w = std::log1p((p.r - 1) * s / p.Tp) / (p.r - 1);
    t = p.t0 - p.Tp * std::expm1(-w);
  }
  // For very large s the subtraction rounds to the horizon itself (the gap
  // Tp * exp(-s/Tp) falls below one ulp); clamp to the largest representable
  // time inside the open domain so the result is always valid input for
  // eval_T and stretched_time.
  const double h = p.horizon();
  return t < h ? t : std::nextafter(h, p.t0);
}

}  // namespace ptflow::timescale
