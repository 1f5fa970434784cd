#include "ptflow/timescale.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace {

using ptflow::timescale::eval_dT;
using ptflow::timescale::eval_T;
using ptflow::timescale::integral_T;
using ptflow::timescale::physical_time;
using ptflow::timescale::stretched_time;
using ptflow::timescale::TimeScaleParams;

TEST(TimeScale, EqualsOneAtStart) {
  for (const double t0 : {0.0, 1.5, -3.0})
    for (const double Tp : {1.0, 5.0, 10.0})
      for (const int r : {1, 2, 3}) {
        const auto p = TimeScaleParams::make(t0, Tp, r);
        EXPECT_DOUBLE_EQ(eval_T(p, t0), 1.0);
        EXPECT_DOUBLE_EQ(integral_T(p, t0), 0.0);
      }
}

TEST(TimeScale, ClosedFormSpotValues) {
  // Tp = 2, halfway point: denominator halves, so T = 2^r.
  for (const int r : {1, 2, 3}) {
    const auto p = TimeScaleParams::make(0.0, 2.0, r);
    EXPECT_NEAR(eval_T(p, 1.0), std::pow(2.0, r), 1e-15 * std::pow(2.0, r));
  }
  // Shifted start behaves identically.
  const auto p = TimeScaleParams::make(1.5, 2.0, 2);
  EXPECT_NEAR(eval_T(p, 2.5), 4.0, 1e-14);
}

TEST(TimeScale, StrictlyIncreasing) {
  const auto p = TimeScaleParams::make(0.0, 5.0, 2);
  double prev = 0.0;
  for (int i = 0; i < 400; ++i) {
    const double t = 5.0 * (1.0 - 1e-6) * i / 399.0;
    const double T = eval_T(p, t);
    EXPECT_GT(T, i == 0 ? 0.0 : prev);
    prev = T;
  }
  EXPECT_GE(prev, 1e6);  // diverges toward the horizon
}

TEST(TimeScale, DomainErrors) {
  const auto p = TimeScaleParams::make(1.0, 2.0, 1);
  EXPECT_THROW((void)eval_T(p, 0.999), std::domain_error);
  EXPECT_THROW((void)eval_T(p, 3.0), std::domain_error);  // horizon excluded
  EXPECT_THROW((void)eval_T(p, 4.0), std::domain_error);
  EXPECT_THROW((void)eval_dT(p, 3.0), std::domain_error);
  EXPECT_THROW((void)integral_T(p, 3.0), std::domain_error);
  EXPECT_THROW((void)physical_time(p, -1e-9), std::domain_error);
  EXPECT_NO_THROW((void)eval_T(p, 1.0));
  EXPECT_NO_THROW((void)eval_T(p, 2.9999999));
}

TEST(TimeScale, InvalidParamsRejected) {
  EXPECT_THROW((void)TimeScaleParams::make(0.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW((void)TimeScaleParams::make(0.0, -2.0, 1), std::invalid_argument);
  EXPECT_THROW((void)TimeScaleParams::make(0.0, 1.0, 0), std::invalid_argument);
  EXPECT_THROW((void)TimeScaleParams::make(0.0, 1.0, -3), std::invalid_argument);
}

TEST(TimeScale, DerivativeMatchesFiniteDifference) {
  for (const int r : {1, 2, 3}) {
    const auto p = TimeScaleParams::make(0.5, 4.0, r);
    for (const double frac : {0.05, 0.3, 0.6, 0.9}) {
      const double t = 0.5 + 4.0 * frac;
      const double fd =
          oracles::fd_derivative([&](double u) { return eval_T(p, u); }, t, 1e-7);
      const double an = eval_dT(p, t);
      EXPECT_NEAR(fd, an, 1e-5 * std::abs(an)) << "r=" << r << " t=" << t;
    }
  }
}

TEST(TimeScale, IntegralMatchesQuadrature) {
  for (const double t0 : {0.0, 1.5})
    for (const double Tp : {1.0, 5.0, 10.0})
      for (const int r : {1, 2, 3}) {
        const auto p = TimeScaleParams::make(t0, Tp, r);
        for (const double frac : {0.1, 0.5, 0.9, 0.999, 1.0 - 1e-6}) {
          const double t = t0 + Tp * frac;
          const double closed = integral_T(p, t);
          // Scale the quadrature tolerance to the integral's magnitude: near the
          // horizon the integral reaches ~Tp (1e6)^(r-1), and an absolute 1e-13
          // request would sit below the fp noise of the error estimate, forcing
          // the adaptive subdivision to its depth cap everywhere.
          const double quad = oracles::integrate([&](double u) { return eval_T(p, u); }, t0, t,
                                                 1e-12 * std::max(1.0, std::abs(closed)));
          EXPECT_NEAR(quad, closed, 1e-8 * std::max(1.0, std::abs(closed)))
              << "t0=" << t0 << " Tp=" << Tp << " r=" << r << " frac=" << frac;
        }
      }
}

TEST(TimeScale, IntegralAccurateNearStart) {
  // Near t0 the integral is ~ (t - t0); the log1p/expm1 forms keep full
  // relative accuracy where naive pow-based differences would cancel.
  for (const int r : {1, 2, 5}) {
    const auto p = TimeScaleParams::make(0.0, 1.0, r);
    const double dt = 1e-9;
    const double s = integral_T(p, dt);
    // Second-order Taylor: s = dt + r dt^2 / (2 Tp) + O(dt^3).
    const double expect = dt + r * dt * dt / 2.0;
    EXPECT_NEAR(s, expect, 1e-12 * expect);
  }
}

TEST(TimeScale, PhysicalTimeInvertsStretchedTime) {
  for (const double t0 : {0.0, -2.0})
    for (const double Tp : {1.0, 7.0})
      for (const int r : {1, 2, 4}) {
        const auto p = TimeScaleParams::make(t0, Tp, r);
        for (const double frac : {0.0, 0.2, 0.8, 0.9999, 1.0 - 1e-9}) {
          const double t = t0 + Tp * frac;
          const double s = stretched_time(p, t);
          const double back = physical_time(p, s);
          EXPECT_NEAR(back, t, 1e-10 * std::max(1.0, std::abs(t)))
              << "Tp=" << Tp << " r=" << r << " frac=" << frac;
        }
        // And the other direction. The largest s is kept where the remaining
        // gap to the horizon (Tp e^{-s/Tp} for r = 1) stays well above one
        // ulp, since beyond that t cannot represent s at all.
        for (const double s : {0.0, 0.5, 3.0, 12.0}) {
          const double t = physical_time(p, s);
          EXPECT_LT(t, p.horizon());
          EXPECT_GE(t, t0);
          EXPECT_NEAR(stretched_time(p, t), s, 1e-10 * std::max(1.0, s));
        }
      }
}

TEST(TimeScale, PhysicalTimeSaturatesBelowHorizon) {
  // Once s is so large that the remaining gap Tp e^{-s/Tp} falls below one
  // ulp of the horizon, the inverse map clamps to the last representable
  // time inside the open domain instead of landing on the excluded endpoint.
  const auto p = TimeScaleParams::make(0.0, 1.0, 1);
  const double t = physical_time(p, 1000.0);
  EXPECT_LT(t, p.horizon());
  EXPECT_NO_THROW((void)eval_T(p, t));
  EXPECT_NO_THROW((void)stretched_time(p, t));
}

TEST(TimeScale, StretchedTimeDivergesAtHorizon) {
  const auto p1 = TimeScaleParams::make(0.0, 5.0, 1);
  // r = 1: s(t) = -Tp log(1 - t/Tp); at the 1e-6 clearance this is Tp ln 1e6.
  EXPECT_NEAR(stretched_time(p1, 5.0 * (1.0 - 1e-6)), 5.0 * std::log(1e6), 1e-6);
  const auto p2 = TimeScaleParams::make(0.0, 5.0, 2);
  // r = 2: s(t) = Tp (1/(1 - t/Tp) - 1); at the same clearance ~ Tp (1e6 - 1).
  EXPECT_NEAR(stretched_time(p2, 5.0 * (1.0 - 1e-6)), 5.0 * (1e6 - 1.0), 1e-2);
}

TEST(TimeScale, DerivativeIdentity) {
  // dT/dt = r T^((r+1)/r) / Tp, the form the envelope derivations use.
  for (const int r : {1, 2, 3}) {
    const auto p = TimeScaleParams::make(0.0, 3.0, r);
    for (const double frac : {0.1, 0.5, 0.95}) {
      const double t = 3.0 * frac;
      const double T = eval_T(p, t);
      const double expect = r * std::pow(T, (r + 1.0) / r) / 3.0;
      EXPECT_NEAR(eval_dT(p, t), expect, 1e-12 * expect);
    }
  }
}

}  // namespace
