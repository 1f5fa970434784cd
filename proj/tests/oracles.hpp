#pragma once

/// Independent numerical oracles used by the test suite. Everything here is
/// deliberately implemented without the library's own quadrature/stepping
/// code, so agreement between the two is evidence rather than tautology.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>

namespace oracles {

/// Adaptive Simpson quadrature with the classical 1/15 error estimate.
inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                          double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13) {
  if (!(b >= a)) throw std::invalid_argument("oracles::integrate: b < a");
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48);
}

/// Central finite difference of a scalar function of one variable.
inline double fd_derivative(const std::function<double(double)>& f, double t, double h = 1e-6) {
  return (f(t + h) - f(t - h)) / (2.0 * h);
}

/// Exact solution of xdot = -c A (x - xs) for symmetric positive definite A:
/// x(t) = xs + exp(-c A t) (x0 - xs), via the spectral decomposition of A.
inline Eigen::VectorXd linear_flow(const Eigen::MatrixXd& A, const Eigen::VectorXd& xs,
                                   const Eigen::VectorXd& x0, double c, double t) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw std::runtime_error("oracles::linear_flow: eig failed");
  const Eigen::VectorXd z = es.eigenvectors().transpose() * (x0 - xs);
  Eigen::VectorXd decayed(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i)
    decayed[i] = std::exp(-c * es.eigenvalues()[i] * t) * z[i];
  return xs + es.eigenvectors() * decayed;
}

/// Deterministic uniform sampler with a platform-independent mapping from
/// the mt19937_64 stream to [0, 1) — unlike std::uniform_real_distribution,
/// whose output sequence is implementation-defined.
class UniformSampler {
 public:
  explicit UniformSampler(std::uint64_t seed) : gen_(seed) {}

  double next() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double next(double lo, double hi) { return lo + next() * (hi - lo); }

  Eigen::VectorXd vector(Eigen::Index n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = next(lo, hi);
    return v;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace oracles
