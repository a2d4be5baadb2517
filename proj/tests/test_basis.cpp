#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "plvc/basis.hpp"
#include "plvc/errors.hpp"

using namespace plvc;

TEST_CASE("make_knots produces evenly spaced interior knots") {
  const KnotVector kv0 = make_knots(0.0, 2.0, 0, 3);
  CHECK(kv0.interior.empty());
  CHECK(kv0.dimension() == 4);

  const KnotVector kv3 = make_knots(0.0, 4.0, 3, 3);
  REQUIRE(kv3.interior.size() == 3);
  CHECK(kv3.interior[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kv3.interior[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(kv3.interior[2] == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(kv3.dimension() == 7);

  const KnotVector kv6 = make_knots(0.0, 2.0, 6, 3);
  const double nominal = 2.0 / 7.0;
  for (std::size_t j = 0; j + 1 < kv6.interior.size(); ++j) {
    const double gap = kv6.interior[j + 1] - kv6.interior[j];
    CHECK(std::abs(gap - nominal) <= 1e-12 * nominal);
  }
  CHECK(kv6.interior[0] == doctest::Approx(nominal).epsilon(1e-14));
}

TEST_CASE("make_knots rejects bad domains and degrees") {
  CHECK_THROWS_AS(make_knots(1.0, 1.0, 2, 3), InvalidDomainError);
  CHECK_THROWS_AS(make_knots(2.0, 1.0, 2, 3), InvalidDomainError);
  CHECK_THROWS_AS(make_knots(0.0, 1.0, 2, 1), InvalidDomainError);
  CHECK_THROWS_AS(make_knots(0.0, 1.0, 2, 4), InvalidDomainError);
  CHECK_THROWS_AS(make_knots(0.0, 1.0, -1, 3), InvalidDomainError);
}

TEST_CASE("extended knots pad degree+1 copies of the bounds") {
  const KnotVector kv = make_knots(0.0, 4.0, 3, 3);
  const auto t = kv.extended();
  REQUIRE(t.size() == 11);
  for (int i = 0; i < 4; ++i) {
    CHECK(t[static_cast<std::size_t>(i)] == 0.0);
    CHECK(t[t.size() - 1 - static_cast<std::size_t>(i)] == 4.0);
  }
}

TEST_CASE("cubic recurrence matches the truncated-power formula on simple knots") {
  // make_knots(0,4,3,3) embeds the five simple knots 0,1,2,3,4 as the
  // defining sequence of basis function 3.
  const KnotVector kv = make_knots(0.0, 4.0, 3, 3);
  const double t[5] = {0.0, 1.0, 2.0, 3.0, 4.0};

  CHECK(bspline_eval(kv, 2.0)[3] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(oracle::trunc_power_cubic(2.0, t) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(bspline_eval(kv, 1.0)[3] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  CHECK(oracle::trunc_power_cubic(1.0, t) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  for (int g = 0; g <= 400; ++g) {
    const double z = 4.0 * g / 400.0;
    CHECK(std::abs(bspline_eval(kv, z)[3] - oracle::trunc_power_cubic(z, t)) <= 1e-12);
  }
}

TEST_CASE("recurrence matches Eq-20 style evaluation across a dense interior system") {
  // Middle basis functions of a 9-interior-knot system have simple evenly
  // spaced defining knots, the setting of the explicit formula.
  const KnotVector kv = make_knots(0.0, 10.0, 9, 3);
  const auto t = kv.extended();
  for (int idx = 4; idx <= 8; ++idx) {
    double tk[5];
    for (int j = 0; j < 5; ++j) tk[j] = t[static_cast<std::size_t>(idx + j)];
    for (int g = 0; g <= 1000; ++g) {
      const double z = 10.0 * g / 1000.0;
      const double rec = bspline_eval(kv, z)[idx];
      const double exp = oracle::trunc_power_cubic(z, tk);
      CHECK(std::abs(rec - exp) <= 1e-12);
    }
  }
}

TEST_CASE("partition of unity, nonnegativity and local support") {
  for (const auto& kv : {make_knots(0.0, 2.0, 6, 3), make_knots(-1.0, 3.0, 4, 2),
                         make_knots(0.0, 1.0, 0, 3), make_knots(0.5, 2.5, 11, 3)}) {
    for (int g = 0; g <= 1000; ++g) {
      const double z = kv.lo + (kv.hi - kv.lo) * g / 1000.0;
      const Eigen::VectorXd b = bspline_eval(kv, z);
      CHECK(std::abs(b.sum() - 1.0) <= 1e-12);
      int nonzero = 0;
      for (long j = 0; j < b.size(); ++j) {
        CHECK(b[j] >= 0.0);
        CHECK(b[j] <= 1.0 + 1e-15);
        if (b[j] != 0.0) ++nonzero;
      }
      CHECK(nonzero <= kv.degree + 1);
    }
  }
}

TEST_CASE("derivatives up to degree-1 are continuous across interior knots") {
  auto fd_jump = [](const KnotVector& kv, int j, double knot, int order) {
    // Central finite differences on both sides of the knot.
    const double eps = 1e-4;
    auto value = [&](double z) { return bspline_eval(kv, z)[j]; };
    auto deriv = [&](double z, int ord) {
      if (ord == 0) return value(z);
      if (ord == 1) return (value(z + eps) - value(z - eps)) / (2.0 * eps);
      return (value(z + eps) - 2.0 * value(z) + value(z - eps)) / (eps * eps);
    };
    return std::abs(deriv(knot + 2.0 * eps, order) - deriv(knot - 2.0 * eps, order));
  };

  const KnotVector cubic = make_knots(0.0, 2.0, 4, 3);
  for (double knot : cubic.interior) {
    for (int j = 0; j < cubic.dimension(); ++j) {
      CHECK(fd_jump(cubic, j, knot, 0) <= 1e-3);
      CHECK(fd_jump(cubic, j, knot, 1) <= 1e-2);
      CHECK(fd_jump(cubic, j, knot, 2) <= 1e-1);
    }
  }
  const KnotVector quad = make_knots(0.0, 2.0, 4, 2);
  for (double knot : quad.interior) {
    for (int j = 0; j < quad.dimension(); ++j) {
      CHECK(fd_jump(quad, j, knot, 0) <= 1e-3);
      CHECK(fd_jump(quad, j, knot, 1) <= 1e-2);
    }
  }
}

TEST_CASE("out-of-range evaluation clamps by default and throws in strict mode") {
  const KnotVector kv = make_knots(0.0, 2.0, 3, 3);
  const Eigen::VectorXd at_hi = bspline_eval(kv, 2.0);
  const Eigen::VectorXd beyond = bspline_eval(kv, 2.5);
  CHECK((at_hi - beyond).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK_THROWS_AS(bspline_eval(kv, 2.5, OutOfRange::Error), OutOfRangeError);
  CHECK_THROWS_AS(bspline_eval(kv, -0.1, OutOfRange::Error), OutOfRangeError);
}

TEST_CASE("power basis") {
  const Eigen::VectorXd p3 = power_eval(3, 2.0);
  REQUIRE(p3.size() == 4);
  CHECK(p3[0] == 1.0);
  CHECK(p3[1] == 2.0);
  CHECK(p3[2] == 4.0);
  CHECK(p3[3] == 8.0);

  const Eigen::VectorXd p0 = power_eval(0, 5.0);
  REQUIRE(p0.size() == 1);
  CHECK(p0[0] == 1.0);

  const Eigen::VectorXd pm = power_eval(2, -1.0);
  CHECK(pm[0] == 1.0);
  CHECK(pm[1] == -1.0);
  CHECK(pm[2] == 1.0);

  CHECK_THROWS_AS(power_eval(-1, 1.0), InvalidDomainError);
}

TEST_CASE("BasisSpec dimension accounting") {
  CHECK(BasisSpec::bspline(make_knots(0, 4, 3, 3)).dimension() == 7);
  CHECK(BasisSpec::bspline(make_knots(0, 2, 0, 2)).dimension() == 3);
  CHECK(BasisSpec::power(3).dimension() == 4);
  CHECK(BasisSpec::power(0).dimension() == 1);
}
