#pragma once

#include "ptflow/objectives.hpp"
#include "ptflow/timescale.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <variant>

namespace ptflow::flows {

using Eigen::VectorXd;

/// Below the zero-gradient guard the q-flow fields are defined as zero:
/// their fractional powers of |grad f| are singular at stationary points,
/// where the only meaningful continuation is the equilibrium itself.
inline constexpr double kZeroGradEps = 1e-14;

/// Classical gradient flow, xdot = -c grad f(x).
struct VanillaGF {
  double c = 1.0;
};

/// Rescaled gradient flow, xdot = -c grad f / |grad f|^((q-2)/(q-1)).
/// Finite-time guarantees for this family are usually stated for q > 2 on
/// strongly convex costs; only q > 1 is enforced here.
struct QRescaledGF {
  double c = 1.0;
  double q = 3.0;
};

/// Signed gradient flow, xdot = -c grad f / |grad f|^(1/(q-1)).
/// Implements the descent-consistent reading in which the sign information
/// is carried by the gradient itself; an elementwise-sign variant would not
/// be a descent direction and is deliberately not provided.
struct QSignedGF {
  double c = 1.0;
  double q = 3.0;
};

/// Time-scaled gradient flow, xdot = -k T(t) grad f(x), with T from
/// TimeScaleParams. The gain k is constant by default (all shipped recipes
/// use constants); k_schedule, when set, replaces it with k(t) and restricts
/// integration to raw-time mode.
struct PrescribedTimeGF {
  double k = 1.0;
  timescale::TimeScaleParams ts;
  std::function<double(double)> k_schedule;  ///< optional k(t); empty = constant k
};

/// Scalar regulator xdot = -(rho0 + r/Tp) T(t) x, driving x to 0 by the
/// horizon. State is 1-dimensional and there is no objective.
struct PTRegulator {
  double rho0 = 1.0;
  timescale::TimeScaleParams ts;

  /// Effective constant gain rho = rho0 + r/Tp.
  [[nodiscard]] double rho() const { return rho0 + static_cast<double>(ts.r) / ts.Tp; }
};

using FlowSpec = std::variant<VanillaGF, QRescaledGF, QSignedGF, PrescribedTimeGF, PTRegulator>;

[[nodiscard]] inline FlowSpec make_vanilla(double c) {
  if (!(c > 0.0)) throw std::invalid_argument("VanillaGF: c must be > 0");
  return VanillaGF{c};
}

[[nodiscard]] inline FlowSpec make_qrgf(double c, double q) {
  if (!(c > 0.0)) throw std::invalid_argument("QRescaledGF: c must be > 0");
  if (!(q > 1.0)) throw std::invalid_argument("QRescaledGF: q must be > 1");
  return QRescaledGF{c, q};
}

[[nodiscard]] inline FlowSpec make_qsgf(double c, double q) {
  if (!(c > 0.0)) throw std::invalid_argument("QSignedGF: c must be > 0");
  if (!(q > 1.0)) throw std::invalid_argument("QSignedGF: q must be > 1");
  return QSignedGF{c, q};
}

[[nodiscard]] inline FlowSpec make_ptgf(double k, timescale::TimeScaleParams ts,
                                        std::function<double(double)> k_schedule = {}) {
  if (!(k > 0.0)) throw std::invalid_argument("PrescribedTimeGF: k must be > 0");
  return PrescribedTimeGF{k, ts, std::move(k_schedule)};
}

[[nodiscard]] inline FlowSpec make_ptreg(double rho0, timescale::TimeScaleParams ts) {
  if (!(rho0 > 0.0)) throw std::invalid_argument("PTRegulator: rho0 must be > 0");
  return PTRegulator{rho0, ts};
}

/// Re-checks the gain constraints of an arbitrary (possibly aggregate-
/// initialized) spec; throws std::invalid_argument on violation.
inline void validate_flow(const FlowSpec& spec) {
  std::visit(
      [](const auto& f) {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, VanillaGF>) {
          if (!(f.c > 0.0)) throw std::invalid_argument("VanillaGF: c must be > 0");
        } else if constexpr (std::is_same_v<F, QRescaledGF>) {
          if (!(f.c > 0.0)) throw std::invalid_argument("QRescaledGF: c must be > 0");
          if (!(f.q > 1.0)) throw std::invalid_argument("QRescaledGF: q must be > 1");
        } else if constexpr (std::is_same_v<F, QSignedGF>) {
          if (!(f.c > 0.0)) throw std::invalid_argument("QSignedGF: c must be > 0");
          if (!(f.q > 1.0)) throw std::invalid_argument("QSignedGF: q must be > 1");
        } else if constexpr (std::is_same_v<F, PrescribedTimeGF>) {
          if (!(f.k > 0.0)) throw std::invalid_argument("PrescribedTimeGF: k must be > 0");
          (void)timescale::TimeScaleParams::make(f.ts.t0, f.ts.Tp, f.ts.r);
        } else {
          if (!(f.rho0 > 0.0)) throw std::invalid_argument("PTRegulator: rho0 must be > 0");
          (void)timescale::TimeScaleParams::make(f.ts.t0, f.ts.Tp, f.ts.r);
        }
      },
      spec);
}

/// True for flows whose field depends on t through the time-scaling gain.
[[nodiscard]] inline bool is_time_varying(const FlowSpec& spec) {
  return std::holds_alternative<PrescribedTimeGF>(spec) ||
         std::holds_alternative<PTRegulator>(spec);
}

/// Time-scale parameters of a time-varying flow; nullptr for autonomous ones.
[[nodiscard]] inline const timescale::TimeScaleParams* time_scale_of(const FlowSpec& spec) {
  if (const auto* p = std::get_if<PrescribedTimeGF>(&spec)) return &p->ts;
  if (const auto* p = std::get_if<PTRegulator>(&spec)) return &p->ts;
  return nullptr;
}

/// True for flows that need an objective (all but the regulator).
[[nodiscard]] inline bool needs_objective(const FlowSpec& spec) {
  return !std::holds_alternative<PTRegulator>(spec);
}

/// Short config-facing name: gf | qrgf | qsgf | ptgf | ptreg.
[[nodiscard]] inline const char* flow_name(const FlowSpec& spec) {
  switch (spec.index()) {
    case 0: return "gf";
    case 1: return "qrgf";
    case 2: return "qsgf";
    case 3: return "ptgf";
    default: return "ptreg";
  }
}

/// Right-hand side of the selected flow at (t, x). Gradient flows require
/// obj with matching dimension; the regulator requires obj == nullptr and a
/// scalar state. Time-varying flows throw std::domain_error outside the
/// time-scale domain.
[[nodiscard]] inline VectorXd field(const FlowSpec& spec, const objectives::Objective* obj,
                                    double t, const VectorXd& x) {
  if (needs_objective(spec)) {
    if (obj == nullptr) throw std::invalid_argument("field: flow requires an objective");
    if (x.size() != obj->dim)
      throw std::invalid_argument("field: state dimension " + std::to_string(x.size()) +
                                  " does not match objective dimension " +
                                  std::to_string(obj->dim));
  } else {
    if (obj != nullptr)
      throw std::invalid_argument("field: PTRegulator takes no objective");
    if (x.size() != 1) throw std::invalid_argument("field: PTRegulator state must be scalar");
  }

  return std::visit(
      [&](const auto& f) -> VectorXd {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, VanillaGF>) {
          return VectorXd(-f.c * obj->grad(x));
        } else if constexpr (std::is_same_v<F, QRescaledGF>) {
          VectorXd g = obj->grad(x);
          const double ng = g.norm();
          if (ng <= kZeroGradEps) return VectorXd::Zero(x.size());
          return VectorXd(-f.c / std::pow(ng, (f.q - 2.0) / (f.q - 1.0)) * g);
        } else if constexpr (std::is_same_v<F, QSignedGF>) {
          VectorXd g = obj->grad(x);
          const double ng = g.norm();
          if (ng <= kZeroGradEps) return VectorXd::Zero(x.size());
          return VectorXd(-f.c / std::pow(ng, 1.0 / (f.q - 1.0)) * g);
        } else if constexpr (std::is_same_v<F, PrescribedTimeGF>) {
          const double k = f.k_schedule ? f.k_schedule(t) : f.k;
          return VectorXd(-k * timescale::eval_T(f.ts, t) * obj->grad(x));
        } else {
          return VectorXd(-f.rho() * timescale::eval_T(f.ts, t) * x);
        }
      },
      spec);
}

}  // namespace ptflow::flows
