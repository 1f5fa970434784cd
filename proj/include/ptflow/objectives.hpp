#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ptflow::objectives {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Axis-aligned box with nonempty interior, used as the validity domain of
/// gradient-dominance / convexity certificates.
struct BoxDomain {
  VectorXd lower;
  VectorXd upper;

  [[nodiscard]] static BoxDomain make(VectorXd lo, VectorXd hi) {
    if (lo.size() != hi.size())
      throw std::invalid_argument("BoxDomain: lower/upper dimension mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i]))
        throw std::invalid_argument("BoxDomain: requires lower < upper componentwise");
    return BoxDomain{std::move(lo), std::move(hi)};
  }

  [[nodiscard]] Eigen::Index dim() const { return lower.size(); }
};

/// Differentiable cost with an analytic gradient oracle and optional
/// certificates: a known minimizer/minimum, a gradient-dominance modulus
/// sigma valid on pl_domain, and a strong-convexity modulus mu.
struct Objective {
  std::string name;
  int dim = 0;
  std::function<double(const VectorXd&)> eval;
  std::function<VectorXd(const VectorXd&)> grad;
  std::optional<VectorXd> minimizer;
  std::optional<double> min_value;
  std::optional<double> pl_modulus;    ///< sigma > 0, valid on pl_domain
  std::optional<BoxDomain> pl_domain;
  std::optional<double> sc_modulus;    ///< mu > 0
};

/// Trid function, f(x) = sum (x_i - 1)^2 - sum_{i>=2} x_i x_{i-1}.
/// Convex quadratic; the minimizer is x*_i = i (n + 1 - i) with
/// f* = -n (n + 4)(n - 1) / 6.
[[nodiscard]] inline Objective make_trid(int n) {
  if (n < 2) throw std::invalid_argument("make_trid: n must be >= 2, got " + std::to_string(n));
  Objective obj;
  obj.name = "trid";
  obj.dim = n;
  obj.eval = [n](const VectorXd& x) {
    double f = 0.0;
    for (int i = 0; i < n; ++i) f += (x[i] - 1.0) * (x[i] - 1.0);
    for (int i = 1; i < n; ++i) f -= x[i] * x[i - 1];
    return f;
  };
  obj.grad = [n](const VectorXd& x) {
    VectorXd g(n);
    for (int i = 0; i < n; ++i) {
      g[i] = 2.0 * (x[i] - 1.0);
      if (i > 0) g[i] -= x[i - 1];
      if (i + 1 < n) g[i] -= x[i + 1];
    }
    return g;
  };
  VectorXd xs(n);
  for (int i = 0; i < n; ++i) xs[i] = static_cast<double>(i + 1) * (n - i);
  obj.minimizer = xs;
  obj.min_value = -static_cast<double>(n) * (n + 4.0) * (n - 1.0) / 6.0;
  return obj;
}

/// Rosenbrock function, f(x) = sum_{i<n} [100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2],
/// with global minimizer at all-ones and f* = 0. For n = 2 the gradient-
/// dominance modulus sigma = 0.1 on [-1,1]^2 is attached as metadata (an
/// empirical certificate, not asserted as a theorem; see verify_pl).
[[nodiscard]] inline Objective make_rosenbrock(int n) {
  if (n < 2)
    throw std::invalid_argument("make_rosenbrock: n must be >= 2, got " + std::to_string(n));
  Objective obj;
  obj.name = "rosenbrock";
  obj.dim = n;
  obj.eval = [n](const VectorXd& x) {
    double f = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
      const double a = x[i + 1] - x[i] * x[i];
      const double b = 1.0 - x[i];
      f += 100.0 * a * a + b * b;
    }
    return f;
  };
  obj.grad = [n](const VectorXd& x) {
    VectorXd g = VectorXd::Zero(n);
    for (int i = 0; i + 1 < n; ++i) {
      const double a = x[i + 1] - x[i] * x[i];
      g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
      g[i + 1] += 200.0 * a;
    }
    return g;
  };
  obj.minimizer = VectorXd::Ones(n);
  obj.min_value = 0.0;
  if (n == 2) {
    obj.pl_modulus = 0.1;
    obj.pl_domain = BoxDomain::make(VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
  }
  return obj;
}

/// Quadratic f(x) = x' A x / 2 - b' x for symmetric positive definite A.
/// Minimizer A^-1 b; both moduli equal the smallest eigenvalue of A.
[[nodiscard]] inline Objective make_quadratic(MatrixXd A, VectorXd b) {
  const auto n = A.rows();
  if (A.cols() != n || b.size() != n)
    throw std::invalid_argument("make_quadratic: A must be square and match b");
  if (!A.isApprox(A.transpose(), 1e-12))
    throw std::invalid_argument("make_quadratic: A must be symmetric");
  Eigen::LLT<MatrixXd> llt(A);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("make_quadratic: A must be positive definite (Cholesky failed)");

  Objective obj;
  obj.name = "quadratic";
  obj.dim = static_cast<int>(n);
  VectorXd xs = llt.solve(b);
  obj.eval = [A, b](const VectorXd& x) { return 0.5 * x.dot(A * x) - b.dot(x); };
  obj.grad = [A, b](const VectorXd& x) { return VectorXd(A * x - b); };
  obj.minimizer = xs;
  obj.min_value = 0.5 * xs.dot(A * xs) - b.dot(xs);
  const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(A).eigenvalues().minCoeff();
  obj.sc_modulus = lmin;
  obj.pl_modulus = lmin;
  return obj;
}

/// Central finite-difference check of the analytic gradient at x.
/// Per-coordinate step h * max(1, |x_i|); returns the maximum over
/// coordinates of |fd - analytic| / max(1, |analytic|).
[[nodiscard]] inline double check_gradient(const Objective& obj, const VectorXd& x,
                                           double h = 1e-6) {
  if (!(h > 0.0)) throw std::invalid_argument("check_gradient: h must be > 0");
  if (x.size() != obj.dim) throw std::invalid_argument("check_gradient: dimension mismatch");
  const VectorXd g = obj.grad(x);
  double worst = 0.0;
  VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + hi;
    xm[i] = x[i] - hi;
    const double fd = (obj.eval(xp) - obj.eval(xm)) / (2.0 * hi);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i])));
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return worst;
}

/// Result of a gradient-dominance scan: the smallest observed ratio
///   rho(x) = |grad f(x)|^2 / (2 (f(x) - f*))
/// over the grid (+inf if no grid point clears the tie region f - f* > 1e-12),
/// and the points violating a requested modulus.
struct PLReport {
  double sigma_hat = std::numeric_limits<double>::infinity();
  std::vector<VectorXd> violations;
};

/// Scans rho(x) on a uniform grid over the box (grid_per_axis points per
/// axis). Points with f - f* <= 1e-12 are excluded to avoid 0/0 at the
/// minimizer, where the inequality holds trivially in the limit.
[[nodiscard]] inline PLReport verify_pl(const Objective& obj, const BoxDomain& box,
                                        int grid_per_axis,
                                        std::optional<double> sigma = std::nullopt) {
  if (!obj.min_value)
    throw std::invalid_argument("verify_pl: objective has no known minimum value");
  if (grid_per_axis < 2) throw std::invalid_argument("verify_pl: grid_per_axis must be >= 2");
  if (box.dim() != obj.dim) throw std::invalid_argument("verify_pl: box dimension mismatch");
  const int n = obj.dim;
  if (n * std::log(static_cast<double>(grid_per_axis)) > std::log(2e7))
    throw std::invalid_argument("verify_pl: grid too large");

  PLReport report;
  const double fstar = *obj.min_value;
  std::vector<int> idx(static_cast<size_t>(n), 0);
  VectorXd x(n);
  while (true) {
    for (int i = 0; i < n; ++i)
      x[i] = box.lower[i] + idx[static_cast<size_t>(i)] *
                                (box.upper[i] - box.lower[i]) / (grid_per_axis - 1);
    const double gap = obj.eval(x) - fstar;
    if (gap > 1e-12) {
      const double rho = obj.grad(x).squaredNorm() / (2.0 * gap);
      report.sigma_hat = std::min(report.sigma_hat, rho);
      if (sigma && rho < *sigma) report.violations.push_back(x);
    }
    int i = 0;
    for (; i < n; ++i) {
      if (++idx[static_cast<size_t>(i)] < grid_per_axis) break;
      idx[static_cast<size_t>(i)] = 0;
    }
    if (i == n) break;
  }
  return report;
}

/// Samples random pairs (a, b) in the box and returns those violating the
/// strong-convexity inequality <grad f(a) - grad f(b), a - b> >= mu |a - b|^2.
/// A relative slack of 1e-12 absorbs rounding in the equality case
/// mu = lambda_min. Deterministic for a fixed seed.
[[nodiscard]] inline std::vector<std::pair<VectorXd, VectorXd>> verify_strong_convexity(
    const Objective& obj, const BoxDomain& box, int samples, double mu,
    std::uint32_t seed = 12345) {
  if (!(mu > 0.0)) throw std::invalid_argument("verify_strong_convexity: mu must be > 0");
  if (samples < 1) throw std::invalid_argument("verify_strong_convexity: samples must be >= 1");
  if (box.dim() != obj.dim)
    throw std::invalid_argument("verify_strong_convexity: box dimension mismatch");

  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = obj.dim;
  std::vector<std::pair<VectorXd, VectorXd>> violations;
  VectorXd a(n), b(n);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i) a[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    for (int i = 0; i < n; ++i) b[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
    const VectorXd d = a - b;
    const double lhs = (obj.grad(a) - obj.grad(b)).dot(d);
    const double rhs = mu * d.squaredNorm();
    if (lhs < rhs - 1e-12 * std::max(1.0, std::abs(rhs))) violations.emplace_back(a, b);
  }
  return violations;
}

}  // namespace ptflow::objectives
