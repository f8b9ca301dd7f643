#pragma once

// Test-only oracles. Nothing here shares code with the library kernels:
// Monte Carlo uses the standard library engine, the bivariate oracle goes
// through Owen's T, and the trivariate oracle integrates the first
// coordinate with adaptive Gauss-Kronrod.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/owens_t.hpp>

#include "mvop/model.hpp"
#include "mvop/mvnprob.hpp"
#include "mvop/simulate.hpp"

namespace oracle {

inline double phi_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }

// P(X <= h, Y <= k), corr rho, via Owen's T. Needs h, k finite and nonzero.
inline double bvn(double h, double k, double rho) {
  const double s = std::sqrt(1.0 - rho * rho);
  const double th = boost::math::owens_t(h, (k - rho * h) / (h * s));
  const double tk = boost::math::owens_t(k, (h - rho * k) / (k * s));
  const double beta = (h * k < 0.0 || (h * k == 0.0 && h + k < 0.0)) ? 0.5 : 0.0;
  return 0.5 * phi_cdf(h) + 0.5 * phi_cdf(k) - th - tk - beta;
}

// P(X1 <= b1, X2 <= b2, X3 <= b3) by integrating x1 out.
inline double tvn(double b1, double b2, double b3, const mvop::Corr3& r) {
  const double s2 = std::sqrt(1.0 - r.r12 * r.r12);
  const double s3 = std::sqrt(1.0 - r.r13 * r.r13);
  const double rho = (r.r23 - r.r12 * r.r13) / (s2 * s3);
  auto integrand = [&](double x) {
    const double dens = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return dens * bvn((b2 - r.r12 * x) / s2, (b3 - r.r13 * x) / s3, rho);
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, b1, 12, 1e-11, &err);
}

struct McResult {
  double p;
  double se;  // binomial standard error at the oracle's own estimate
};

// Monte Carlo rectangle probability with an independent engine.
inline McResult rectangle_mc(const std::array<double, 3>& lo, const std::array<double, 3>& hi, const mvop::Corr3& r,
                             std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> z;
  const double l11 = 1.0, l21 = r.r12, l22 = std::sqrt(1.0 - r.r12 * r.r12);
  const double l31 = r.r13, l32 = (r.r23 - r.r12 * r.r13) / l22;
  const double l33 = std::sqrt(1.0 - l31 * l31 - l32 * l32);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double z1 = z(eng), z2 = z(eng), z3 = z(eng);
    const double x1 = l11 * z1;
    const double x2 = l21 * z1 + l22 * z2;
    const double x3 = l31 * z1 + l32 * z2 + l33 * z3;
    hits += (x1 > lo[0] && x1 <= hi[0] && x2 > lo[1] && x2 <= hi[1] && x3 > lo[2] && x3 <= hi[2]) ? 1 : 0;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(draws);
  return {p, std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(draws))};
}

// A positive definite correlation matrix drawn through random unit rows.
inline mvop::Corr3 random_corr(std::mt19937_64& eng, double max_abs = 0.95) {
  std::uniform_real_distribution<double> u(-max_abs, max_abs);
  for (;;) {
    mvop::Corr3 r{u(eng), u(eng), u(eng)};
    if (r.determinant() > 1e-3) return r;
  }
}

// The correlation scenario used across recovery studies.
inline mvop::Corr3 table_corr() { return {0.44, 0.18, -0.10}; }

}  // namespace oracle
