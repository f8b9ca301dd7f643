#pragma once

// Standard normal distribution kernels up to dimension three.
//
// Everything here is a pure function. Bounds are plain doubles where
// +/-infinity are legal values; finite bounds are clamped to
// [-kBoundClamp, kBoundClamp] before any quadrature since the normal tail
// beyond that is below 1e-16.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mvop/error.hpp"

namespace mvop {

inline constexpr double kBoundClamp = 8.5;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Off-diagonal entries of a 3x3 correlation matrix with unit diagonal.
struct Corr3 {
  double r12 = 0.0;
  double r13 = 0.0;
  double r23 = 0.0;

  double determinant() const {
    return 1.0 + 2.0 * r12 * r13 * r23 - r12 * r12 - r13 * r13 - r23 * r23;
  }
  bool is_positive_definite() const {
    return std::abs(r12) < 1.0 && std::abs(r13) < 1.0 && std::abs(r23) < 1.0 &&
           determinant() > 0.0;
  }
  bool is_identity() const { return r12 == 0.0 && r13 == 0.0 && r23 == 0.0; }

  friend bool operator==(const Corr3&, const Corr3&) = default;
};

namespace detail {

inline void check_bound(double b) {
  if (std::isnan(b)) throw InvalidBound("bound is NaN");
}

inline double clamp_bound(double b) {
  if (std::isinf(b)) return b;
  return std::clamp(b, -kBoundClamp, kBoundClamp);
}

// Gauss-Legendre half-rules (positive nodes of the 6, 12 and 20 point rules).
inline constexpr std::array<double, 3> kGl6X{0.9324695142031522, 0.6612093864662647,
                                             0.2386191860831970};
inline constexpr std::array<double, 3> kGl6W{0.1713244923791705, 0.3607615730481384,
                                             0.4679139345726904};
inline constexpr std::array<double, 6> kGl12X{0.9815606342467191, 0.9041172563704750,
                                              0.7699026741943050, 0.5873179542866171,
                                              0.3678314989981802, 0.1252334085114692};
inline constexpr std::array<double, 6> kGl12W{0.04717533638651177, 0.1069393259953183,
                                              0.1600783285433464,  0.2031674267230659,
                                              0.2334925365383547,  0.2491470458134029};
inline constexpr std::array<double, 10> kGl20X{
    0.9931285991850949, 0.9639719272779138, 0.9122344282513259, 0.8391169718222188,
    0.7463319064601508, 0.6360536807265150, 0.5108670019508271, 0.3737060887154196,
    0.2277858511416451, 0.07652652113349733};
inline constexpr std::array<double, 10> kGl20W{
    0.01761400713915212, 0.04060142980038694, 0.06267204833410906, 0.08327674157670475,
    0.1019301198172404,  0.1181945319615184,  0.1316886384491766,  0.1420961093183821,
    0.1491729864726037,  0.1527533871307259};

// Gauss-Kronrod 7/15 pair on [-1, 1]; index 7 is the centre node.
inline constexpr std::array<double, 8> kGk15X{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kGk15W{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kG7W{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct GkEstimate {
  double value;
  double error;
};

template <class F>
GkEstimate gauss_kronrod15(const F& f, double a, double b) {
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(centre);
  std::array<double, 7> f1{}, f2{};
  double kronrod = fc * kGk15W[7];
  double gauss = fc * kG7W[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kGk15X[j];
    f1[j] = f(centre - dx);
    f2[j] = f(centre + dx);
    kronrod += kGk15W[j] * (f1[j] + f2[j]);
    if (j % 2 == 1) gauss += kG7W[j / 2] * (f1[j] + f2[j]);
  }
  const double mean = 0.5 * kronrod;
  double asc = std::abs(fc - mean) * kGk15W[7];
  for (int j = 0; j < 7; ++j) asc += kGk15W[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  asc *= std::abs(half);
  // QUADPACK error scaling.
  double err = std::abs((kronrod - gauss) * half);
  if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
  return {kronrod * half, err};
}

// Recursive bisection with Gauss-Kronrod 15. Deterministic: the subdivision
// pattern depends only on the integrand values.
template <class F>
double adaptive_gk15(const F& f, double a, double b, double tol, int depth = 0) {
  const GkEstimate est = gauss_kronrod15(f, a, b);
  if (est.error <= tol || depth >= 24) return est.value;
  const double mid = 0.5 * (a + b);
  return adaptive_gk15(f, a, mid, 0.5 * tol, depth + 1) +
         adaptive_gk15(f, mid, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

// Phi(x). NaN is rejected.
inline double std_normal_cdf(double x) {
  detail::check_bound(x);
  return 0.5 * std::erfc(-x * (0.5 * std::numbers::sqrt2));
}

inline double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

// Inverse of Phi. Rational start (Acklam) polished by one Halley step on
// erfc, which brings the error to a few ulp over (0, 1).
inline double std_normal_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) throw InvalidParameter("quantile probability outside [0, 1]");
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;

  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement; work in the smaller tail to keep relative accuracy.
  const double e = (p < 0.5) ? std_normal_cdf(x) - p : (1.0 - p) - std_normal_cdf(-x);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace detail {

// Upper orthant P(X > h, Y > k) for a standard bivariate normal with
// correlation r. Drezner-Wesolowsky reduction to a single integral over the
// correlation, evaluated with 6/12/20-point Gauss-Legendre depending on |r|,
// and the asymptotic expansion branch for |r| >= 0.925.
inline double bvn_upper(double h, double k, double r) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (h == kInf || k == kInf) return 0.0;
  if (h == -kInf) return k == -kInf ? 1.0 : std_normal_cdf(-k);
  if (k == -kInf) return std_normal_cdf(-h);

  const double* xs;
  const double* ws;
  int lg;
  if (std::abs(r) < 0.3) {
    xs = kGl6X.data(), ws = kGl6W.data(), lg = 3;
  } else if (std::abs(r) < 0.75) {
    xs = kGl12X.data(), ws = kGl12W.data(), lg = 6;
  } else {
    xs = kGl20X.data(), ws = kGl20W.data(), lg = 10;
  }

  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = 0.5 * std::asin(r);
    for (int i = 0; i < lg; ++i) {
      for (double x : {1.0 - xs[i], 1.0 + xs[i]}) {
        const double sn = std::sin(asr * x);
        bvn += ws[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    return bvn * asr / two_pi + std_normal_cdf(-h) * std_normal_cdf(-k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  if (std::abs(r) < 1.0) {
    const double as = (1.0 - r) * (1.0 + r);
    double a = std::sqrt(as);
    const double bs = (h - k) * (h - k);
    const double c = (4.0 - hk) / 8.0;
    const double d = (12.0 - hk) / 80.0;
    double asr = -0.5 * (bs / as + hk);
    if (asr > -100.0) {
      bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
    }
    if (hk > -100.0) {
      const double b = std::sqrt(bs);
      const double sp = std::sqrt(two_pi) * std_normal_cdf(-b / a);
      bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
    }
    a *= 0.5;
    double sum = 0.0;
    for (int i = 0; i < lg; ++i) {
      for (double x : {1.0 - xs[i], 1.0 + xs[i]}) {
        const double xsq = (a * x) * (a * x);
        asr = -0.5 * (bs / xsq + hk);
        if (asr <= -100.0) continue;
        const double sp = 1.0 + c * xsq * (1.0 + 5.0 * d * xsq);
        const double rs = std::sqrt(1.0 - xsq);
        const double ep = std::exp(-0.5 * hk * xsq / ((1.0 + rs) * (1.0 + rs))) / rs;
        sum += ws[i] * std::exp(asr) * (sp - ep);
      }
    }
    bvn = (a * sum - bvn) / two_pi;
  }
  if (r > 0.0) return bvn + std_normal_cdf(-std::max(h, k));
  if (h >= k) return -bvn;
  const double l = h < 0.0 ? std_normal_cdf(k) - std_normal_cdf(h)
                           : std_normal_cdf(-h) - std_normal_cdf(-k);
  return l - bvn;
}

inline double bvn_lower_unchecked(double b1, double b2, double rho) {
  if (b1 == -kInf || b2 == -kInf) return 0.0;
  if (b1 == kInf) return std_normal_cdf(b2);
  if (b2 == kInf) return std_normal_cdf(b1);
  const double p = bvn_upper(-clamp_bound(b1), -clamp_bound(b2), rho);
  return std::clamp(p, 0.0, 1.0);
}

// Trivariate lower orthant with all bounds finite and already clamped.
//
// Plackett-style path: keep the most strongly correlated pair (2,3) fixed and
// shrink r12, r13 linearly to zero. Along the path
//   d/dt Phi3 = r12 phi2(h1,h2; t r12) Phi(z3|12) + r13 phi2(h1,h3; t r13) Phi(z2|13)
// and at t = 0 the distribution factorizes into Phi(h1) Phi2(h2,h3; r23).
inline double tvn_finite(double h1, double h2, double h3, double r12, double r13, double r23) {
  // Permute so that |r23| is the largest magnitude.
  if (std::abs(r12) > std::abs(r23) && std::abs(r12) >= std::abs(r13)) {
    // (1,2) strongest: swap axes 1 and 3.
    std::swap(h1, h3);
    std::swap(r12, r23);  // new r12 = old r23 (axes 3,2), new r23 = old r12 (axes 2,1)
  } else if (std::abs(r13) > std::abs(r23)) {
    // (1,3) strongest: swap axes 1 and 2.
    std::swap(h1, h2);
    std::swap(r13, r23);
  }

  const double base = std_normal_cdf(h1) * bvn_lower_unchecked(h2, h3, r23);
  if (r12 == 0.0 && r13 == 0.0) return base;

  constexpr double inv_two_pi = 0.5 / std::numbers::pi;
  auto integrand = [&](double t) {
    const double a = t * r12;
    const double b = t * r13;
    const double det = 1.0 + 2.0 * a * b * r23 - a * a - b * b - r23 * r23;
    double value = 0.0;
    if (a != 0.0) {
      const double one_m = 1.0 - a * a;
      const double q = (h1 * h1 - 2.0 * a * h1 * h2 + h2 * h2) / one_m;
      const double phi2 = inv_two_pi * std::exp(-0.5 * q) / std::sqrt(one_m);
      const double mean = ((b - a * r23) * h1 + (r23 - a * b) * h2) / one_m;
      const double sd = std::sqrt(std::max(det / one_m, 0.0));
      const double cond = sd > 0.0 ? std_normal_cdf((h3 - mean) / sd) : (h3 >= mean ? 1.0 : 0.0);
      value += r12 * phi2 * cond;
    }
    if (b != 0.0) {
      const double one_m = 1.0 - b * b;
      const double q = (h1 * h1 - 2.0 * b * h1 * h3 + h3 * h3) / one_m;
      const double phi2 = inv_two_pi * std::exp(-0.5 * q) / std::sqrt(one_m);
      const double mean = ((a - b * r23) * h1 + (r23 - a * b) * h3) / one_m;
      const double sd = std::sqrt(std::max(det / one_m, 0.0));
      const double cond = sd > 0.0 ? std_normal_cdf((h2 - mean) / sd) : (h2 >= mean ? 1.0 : 0.0);
      value += r13 * phi2 * cond;
    }
    return value;
  };
  return base + adaptive_gk15(integrand, 0.0, 1.0, 1e-13);
}

}  // namespace detail

// P(X <= b1, Y <= b2) for a standard bivariate normal with correlation rho.
inline double bvn_cdf(double b1, double b2, double rho) {
  detail::check_bound(b1);
  detail::check_bound(b2);
  if (!(std::abs(rho) < 1.0)) throw DegenerateCorrelation("bivariate correlation must satisfy |rho| < 1");
  return detail::bvn_lower_unchecked(b1, b2, rho);
}

// P(X <= b1, Y <= b2, Z <= b3) for a standard trivariate normal.
inline double tvn_cdf(double b1, double b2, double b3, const Corr3& r) {
  detail::check_bound(b1);
  detail::check_bound(b2);
  detail::check_bound(b3);
  if (!r.is_positive_definite()) throw DegenerateCorrelation("trivariate correlation matrix is not positive definite");

  if (b1 == -kInf || b2 == -kInf || b3 == -kInf) return 0.0;
  if (b1 == kInf) return detail::bvn_lower_unchecked(b2, b3, r.r23);
  if (b2 == kInf) return detail::bvn_lower_unchecked(b1, b3, r.r13);
  if (b3 == kInf) return detail::bvn_lower_unchecked(b1, b2, r.r12);

  const double p = detail::tvn_finite(detail::clamp_bound(b1), detail::clamp_bound(b2),
                                      detail::clamp_bound(b3), r.r12, r.r13, r.r23);
  return std::clamp(p, 0.0, 1.0);
}

inline constexpr double kNegativeResidue = 1e-12;

// P(lower < X <= upper) for a standard trivariate normal, assembled from the
// eight corner CDFs by inclusion-exclusion. Axes with lower = -inf and
// upper = +inf drop out, so the same routine serves one and two equations.
inline double rectangle_prob(const std::array<double, 3>& lower, const std::array<double, 3>& upper,
                             const Corr3& r) {
  for (int i = 0; i < 3; ++i) {
    detail::check_bound(lower[i]);
    detail::check_bound(upper[i]);
    if (!(lower[i] < upper[i])) {
      throw InvalidCell("rectangle lower bound must be below upper bound on axis " + std::to_string(i + 1));
    }
  }
  if (!r.is_positive_definite()) throw DegenerateCorrelation("trivariate correlation matrix is not positive definite");

  // Reflect every axis whose interval sits mostly above zero (X -> -X, with
  // the matching correlation signs flipped). The corner CDFs are then small
  // lower-tail values and tail cells keep their relative accuracy instead of
  // cancelling as differences of numbers close to 1.
  std::array<double, 3> lo{}, hi{};
  std::array<double, 3> sign{1.0, 1.0, 1.0};
  for (int i = 0; i < 3; ++i) {
    if (lower[i] > -upper[i]) {
      sign[i] = -1.0;
      lo[i] = -upper[i];
      hi[i] = -lower[i];
    } else {
      lo[i] = lower[i];
      hi[i] = upper[i];
    }
  }
  const Corr3 rr{r.r12 * sign[0] * sign[1], r.r13 * sign[0] * sign[2], r.r23 * sign[1] * sign[2]};

  // Clamp after validation: both bounds may collapse onto the clamp edge,
  // which is a legitimate zero-probability cell.
  for (int i = 0; i < 3; ++i) {
    lo[i] = detail::clamp_bound(lo[i]);
    hi[i] = detail::clamp_bound(hi[i]);
    if (lo[i] == hi[i]) return 0.0;
  }

  double total = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    std::array<double, 3> b{};
    int n_lower = 0;
    bool vanishes = false;
    for (int i = 0; i < 3; ++i) {
      if (corner & (1 << i)) {
        b[i] = lo[i];
        ++n_lower;
        if (lo[i] == -kInf) vanishes = true;
      } else {
        b[i] = hi[i];
      }
    }
    if (vanishes) continue;
    const double cdf = tvn_cdf(b[0], b[1], b[2], rr);
    total += (n_lower % 2 == 0) ? cdf : -cdf;
  }
  if (total < -kNegativeResidue) {
    throw NumericalError("rectangle probability assembled to " + std::to_string(total));
  }
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace mvop
