#pragma once

// Model specification, parameter containers and the bijection between the
// constrained parameters and a flat unconstrained vector.
//
// Unconstrained layout, in order:
//   all beta entries (equation by equation, covariate order),
//   per equation: first threshold, then log-spacings of the remaining ones,
//   correlation angle raws for the strictly lower triangle, row by row
//   (theta_10, theta_20, theta_21).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "mvop/error.hpp"
#include "mvop/mvnprob.hpp"

namespace mvop {

struct EquationSpec {
  std::string name;
  int n_stages = 2;
  std::vector<std::string> covariates;
  std::string outcome;  // column holding the 0-based stage

  void validate() const {
    if (name.empty()) throw InvalidParameter("equation name must not be empty");
    if (n_stages < 2) throw InvalidParameter("equation '" + name + "' needs at least 2 stages");
    std::set<std::string> seen;
    for (const auto& c : covariates) {
      if (!seen.insert(c).second) {
        throw InvalidParameter("equation '" + name + "' lists covariate '" + c + "' twice");
      }
    }
    if (outcome.empty()) throw InvalidParameter("equation '" + name + "' has no outcome column");
  }
};

struct ModelSpec {
  std::vector<EquationSpec> equations;

  std::size_t n_equations() const { return equations.size(); }

  std::size_t n_beta() const {
    std::size_t k = 0;
    for (const auto& e : equations) k += e.covariates.size();
    return k;
  }
  std::size_t n_thresholds() const {
    std::size_t k = 0;
    for (const auto& e : equations) k += static_cast<std::size_t>(e.n_stages - 1);
    return k;
  }
  std::size_t n_correlations() const {
    const std::size_t m = equations.size();
    return m * (m - 1) / 2;
  }
  // Free parameter count k.
  std::size_t n_parameters() const { return n_beta() + n_thresholds() + n_correlations(); }

  std::size_t equation_index(const std::string& name) const {
    for (std::size_t e = 0; e < equations.size(); ++e) {
      if (equations[e].name == name) return e;
    }
    throw InvalidParameter("unknown equation '" + name + "'");
  }

  void validate() const {
    if (equations.empty() || equations.size() > 3) {
      throw InvalidParameter("a model has between 1 and 3 equations");
    }
    std::set<std::string> names, outcomes;
    for (const auto& e : equations) {
      e.validate();
      if (!names.insert(e.name).second) throw InvalidParameter("duplicate equation name '" + e.name + "'");
      if (!outcomes.insert(e.outcome).second) {
        throw InvalidParameter("outcome column '" + e.outcome + "' used by two equations");
      }
    }
  }
};

// Correlation parameters of the 1-3 equation system. Entries that do not
// exist for the model size stay at zero.
struct ParameterSet {
  std::vector<std::vector<double>> beta;        // per equation
  std::vector<std::vector<double>> thresholds;  // per equation, n_stages - 1 entries
  Corr3 corr;

  void validate(const ModelSpec& spec) const {
    const std::size_t m = spec.n_equations();
    if (beta.size() != m || thresholds.size() != m) {
      throw ShapeError("parameter set does not match the number of equations");
    }
    for (std::size_t e = 0; e < m; ++e) {
      const auto& eq = spec.equations[e];
      if (beta[e].size() != eq.covariates.size()) {
        throw ShapeError("equation '" + eq.name + "': beta length does not match covariate count");
      }
      if (thresholds[e].size() != static_cast<std::size_t>(eq.n_stages - 1)) {
        throw ShapeError("equation '" + eq.name + "': expected " + std::to_string(eq.n_stages - 1) +
                         " thresholds");
      }
      for (double b : beta[e]) {
        if (!std::isfinite(b)) throw InvalidParameter("equation '" + eq.name + "': non-finite beta");
      }
      for (std::size_t j = 0; j < thresholds[e].size(); ++j) {
        if (!std::isfinite(thresholds[e][j])) {
          throw InvalidParameter("equation '" + eq.name + "': non-finite threshold");
        }
        if (j > 0 && !(thresholds[e][j - 1] < thresholds[e][j])) {
          throw InvalidParameter("equation '" + eq.name + "': thresholds must be strictly increasing");
        }
      }
    }
    if (m < 3 && (corr.r13 != 0.0 || corr.r23 != 0.0)) {
      throw InvalidParameter("correlations involving a missing third equation must be zero");
    }
    if (m < 2 && corr.r12 != 0.0) throw InvalidParameter("a single equation has no correlation");
    if (!corr.is_positive_definite()) throw InvalidParameter("correlation matrix is not positive definite");
  }

  // Zero betas, evenly spaced thresholds centred at 0, identity correlation.
  static ParameterSet zeros(const ModelSpec& spec) {
    ParameterSet p;
    for (const auto& eq : spec.equations) {
      p.beta.emplace_back(eq.covariates.size(), 0.0);
      std::vector<double> mu(static_cast<std::size_t>(eq.n_stages - 1));
      for (std::size_t j = 0; j < mu.size(); ++j) mu[j] = static_cast<double>(j);
      p.thresholds.push_back(std::move(mu));
    }
    return p;
  }
};

// Correlation angles live in [kMinAngle, pi - kMinAngle]; the logistic of the
// raw value is stretched onto that interval so raw 0 maps to pi/2 (r = 0).
// The margin keeps det(R) >= sin(kMinAngle)^6, far above rounding noise.
inline constexpr double kMinAngle = 0.02;

namespace detail {

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double angle_from_raw(double raw) {
  return kMinAngle + (std::numbers::pi - 2.0 * kMinAngle) * logistic(raw);
}

inline double raw_from_angle(double theta) {
  const double u = (theta - kMinAngle) / (std::numbers::pi - 2.0 * kMinAngle);
  if (!(u > 0.0 && u < 1.0)) throw InvalidParameter("correlation outside the representable range");
  return std::log(u) - std::log1p(-u);
}

// Offset of the angle from pi/2. Working with the offset makes raw 0 give
// exactly r = 0 (cos(pi/2) would leave 6e-17).
inline double angle_offset(double raw) { return (std::numbers::pi - 2.0 * kMinAngle) * (logistic(raw) - 0.5); }

// Entries of R = L L^T where the rows of L are unit vectors built from
// hyperspherical angles; cos(theta) = -sin(d), sin(theta) = cos(d).
inline Corr3 corr_from_angles(std::size_t n_eq, const double* raw) {
  Corr3 r;
  if (n_eq < 2) return r;
  const double d10 = angle_offset(raw[0]);
  r.r12 = -std::sin(d10);
  if (n_eq < 3) return r;
  const double d20 = angle_offset(raw[1]);
  const double d21 = angle_offset(raw[2]);
  r.r13 = -std::sin(d20);
  r.r23 = r.r12 * r.r13 - std::cos(d10) * std::cos(d20) * std::sin(d21);
  return r;
}

inline void angles_from_corr(std::size_t n_eq, const Corr3& r, double* raw) {
  if (n_eq < 2) return;
  const double t10 = std::acos(r.r12);
  raw[0] = raw_from_angle(t10);
  if (n_eq < 3) return;
  const double t20 = std::acos(r.r13);
  const double c21 = (r.r23 - r.r12 * r.r13) / (std::sin(t10) * std::sin(t20));
  const double t21 = std::acos(std::clamp(c21, -1.0, 1.0));
  raw[1] = raw_from_angle(t20);
  raw[2] = raw_from_angle(t21);
}

// exp() argument bounds for threshold spacings.
inline constexpr double kMinLogSpacing = -700.0;
inline constexpr double kMaxLogSpacing = 300.0;

}  // namespace detail

inline std::vector<double> to_unconstrained(const ParameterSet& p, const ModelSpec& spec) {
  p.validate(spec);
  std::vector<double> v;
  v.reserve(spec.n_parameters());
  for (const auto& b : p.beta) v.insert(v.end(), b.begin(), b.end());
  for (const auto& mu : p.thresholds) {
    v.push_back(mu[0]);
    for (std::size_t j = 1; j < mu.size(); ++j) v.push_back(std::log(mu[j] - mu[j - 1]));
  }
  double raw[3] = {0.0, 0.0, 0.0};
  detail::angles_from_corr(spec.n_equations(), p.corr, raw);
  for (std::size_t c = 0; c < spec.n_correlations(); ++c) v.push_back(raw[c]);
  return v;
}

inline ParameterSet from_unconstrained(const std::vector<double>& v, const ModelSpec& spec) {
  if (v.size() != spec.n_parameters()) {
    throw ShapeError("unconstrained vector has length " + std::to_string(v.size()) + ", model needs " +
                     std::to_string(spec.n_parameters()));
  }
  ParameterSet p;
  std::size_t pos = 0;
  for (const auto& eq : spec.equations) {
    p.beta.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(pos),
                        v.begin() + static_cast<std::ptrdiff_t>(pos + eq.covariates.size()));
    pos += eq.covariates.size();
  }
  for (const auto& eq : spec.equations) {
    std::vector<double> mu(static_cast<std::size_t>(eq.n_stages - 1));
    mu[0] = v[pos++];
    for (std::size_t j = 1; j < mu.size(); ++j) {
      const double step = std::exp(std::clamp(v[pos++], detail::kMinLogSpacing, detail::kMaxLogSpacing));
      mu[j] = mu[j - 1] + step;
      // A spacing below one ulp of the previous threshold still has to move it.
      if (!(mu[j] > mu[j - 1])) mu[j] = std::nextafter(mu[j - 1], kInf);
    }
    p.thresholds.push_back(std::move(mu));
  }
  double raw[3] = {0.0, 0.0, 0.0};
  for (std::size_t c = 0; c < spec.n_correlations(); ++c) raw[c] = v[pos++];
  p.corr = detail::corr_from_angles(spec.n_equations(), raw);
  return p;
}

}  // namespace mvop
