#pragma once

// Cell probabilities and the sample log-likelihood of the 1-3 equation
// ordered probit system.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvop/error.hpp"
#include "mvop/model.hpp"
#include "mvop/mvnprob.hpp"
#include "mvop/parallel.hpp"
#include "mvop/table.hpp"

namespace mvop {

inline constexpr double kProbabilityFloor = 1e-300;

inline double linear_predictor(std::span<const double> beta, std::span<const double> x) {
  if (beta.size() != x.size()) {
    throw ShapeError("linear predictor: " + std::to_string(beta.size()) + " coefficients for " +
                     std::to_string(x.size()) + " covariates");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < beta.size(); ++i) s += beta[i] * x[i];
  return s;
}

// Latent-scale interval (lower, upper] of stage j, before subtracting xb.
inline std::pair<double, double> stage_interval(std::span<const double> thresholds, int j) {
  const int n_stages = static_cast<int>(thresholds.size()) + 1;
  if (j < 0 || j >= n_stages) {
    throw StageOutOfRange("stage " + std::to_string(j) + " outside 0.." + std::to_string(n_stages - 1));
  }
  const double lo = j == 0 ? -kInf : thresholds[static_cast<std::size_t>(j - 1)];
  const double hi = j == n_stages - 1 ? kInf : thresholds[static_cast<std::size_t>(j)];
  return {lo, hi};
}

// P(y = j | xb) = Phi(mu_j - xb) - Phi(mu_{j-1} - xb).
inline double cell_prob_uni(std::span<const double> thresholds, int j, double xb) {
  if (!std::isfinite(xb)) throw InvalidParameter("non-finite linear predictor");
  const auto [lo, hi] = stage_interval(thresholds, j);
  const double a = lo - xb;
  const double b = hi - xb;
  // Subtract in the tail where both terms are small.
  if (a > 0.0) return std::max(0.0, std_normal_cdf(-a) - std_normal_cdf(-b));
  return std::max(0.0, std_normal_cdf(b) - std_normal_cdf(a));
}

// Joint probability of the stage combination `stages` (one per equation)
// given the linear predictors `xb`.
inline double cell_prob_joint(const ParameterSet& p, std::span<const int> stages, std::span<const double> xb) {
  const std::size_t m = stages.size();
  if (m == 0 || m > 3 || xb.size() != m || p.thresholds.size() != m) {
    throw ShapeError("joint cell probability needs one stage and one predictor per equation");
  }
  if (m == 1 || p.corr.is_identity()) {
    double prod = 1.0;
    for (std::size_t e = 0; e < m; ++e) prod *= cell_prob_uni(p.thresholds[e], stages[e], xb[e]);
    return prod;
  }
  std::array<double, 3> lower{-kInf, -kInf, -kInf};
  std::array<double, 3> upper{kInf, kInf, kInf};
  for (std::size_t e = 0; e < m; ++e) {
    if (!std::isfinite(xb[e])) throw InvalidParameter("non-finite linear predictor");
    const auto [lo, hi] = stage_interval(p.thresholds[e], stages[e]);
    lower[e] = lo - xb[e];
    upper[e] = hi - xb[e];
  }
  return rectangle_prob(lower, upper, p.corr);
}

// Model-ready copy of the columns a spec uses: covariates row-major per
// equation and integer outcomes.
class PreparedData {
 public:
  struct Equation {
    std::size_t n_covariates = 0;
    std::vector<double> x;  // n_rows * n_covariates, row-major
    std::vector<int> y;
  };

  PreparedData(const ModelSpec& spec, const ObservationTable& table) : n_rows_(table.n_rows()) {
    spec.validate();
    for (const auto& eq : spec.equations) {
      Equation d;
      d.n_covariates = eq.covariates.size();
      d.x.resize(n_rows_ * d.n_covariates);
      for (std::size_t c = 0; c < d.n_covariates; ++c) {
        const auto& col = table.column(eq.covariates[c]);
        for (std::size_t i = 0; i < n_rows_; ++i) {
          if (!std::isfinite(col[i])) {
            throw DataError("row " + std::to_string(i + 1) + ", column '" + eq.covariates[c] +
                            "': non-finite covariate");
          }
          d.x[i * d.n_covariates + c] = col[i];
        }
      }
      const auto& out = table.column(eq.outcome);
      d.y.resize(n_rows_);
      for (std::size_t i = 0; i < n_rows_; ++i) {
        const double v = out[i];
        if (!(v >= 0.0 && v <= eq.n_stages - 1 && v == std::floor(v))) {
          throw DataError("row " + std::to_string(i + 1) + ", column '" + eq.outcome + "': outcome " +
                          std::to_string(v) + " is not a stage in 0.." + std::to_string(eq.n_stages - 1));
        }
        d.y[i] = static_cast<int>(v);
      }
      equations_.push_back(std::move(d));
    }
  }

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_equations() const { return equations_.size(); }
  const Equation& equation(std::size_t e) const { return equations_[e]; }

  std::span<const double> row(std::size_t e, std::size_t i) const {
    const auto& d = equations_[e];
    return std::span<const double>(d.x).subspan(i * d.n_covariates, d.n_covariates);
  }

 private:
  std::size_t n_rows_;
  std::vector<Equation> equations_;
};

// Per-observation log-probabilities, floored at log(kProbabilityFloor).
inline std::vector<double> loglik_terms(const ParameterSet& p, const PreparedData& data) {
  const std::size_t m = data.n_equations();
  if (p.beta.size() != m) throw ShapeError("parameter set does not match the data's equations");
  std::vector<double> terms(data.n_rows());
  parallel_for(data.n_rows(), [&](std::size_t i) {
    std::array<int, 3> stages{};
    std::array<double, 3> xb{};
    for (std::size_t e = 0; e < m; ++e) {
      xb[e] = linear_predictor(p.beta[e], data.row(e, i));
      stages[e] = data.equation(e).y[i];
    }
    const double prob = cell_prob_joint(p, std::span(stages).first(m), std::span(xb).first(m));
    terms[i] = std::log(std::max(prob, kProbabilityFloor));
  });
  return terms;
}

inline double loglik(const ParameterSet& p, const PreparedData& data) {
  const auto terms = loglik_terms(p, data);
  return pairwise_sum(terms);
}

inline double loglik(const ParameterSet& p, const ObservationTable& table, const ModelSpec& spec) {
  p.validate(spec);
  return loglik(p, PreparedData(spec, table));
}

// Log-likelihood as a function of the unconstrained vector.
inline double loglik_unconstrained(const std::vector<double>& v, const PreparedData& data, const ModelSpec& spec) {
  return loglik(from_unconstrained(v, spec), data);
}

enum class DifferenceScheme { central, forward };

// cbrt(machine epsilon), the balanced central-difference step.
inline const double kCentralStep = std::cbrt(std::numeric_limits<double>::epsilon());

// Finite-difference gradient with per-coordinate step
// h_i = relative_step * max(1, |theta_i|).
inline std::vector<double> numerical_gradient(const std::function<double(const std::vector<double>&)>& f,
                                              const std::vector<double>& theta,
                                              DifferenceScheme scheme = DifferenceScheme::central,
                                              double relative_step = kCentralStep) {
  std::vector<double> grad(theta.size());
  std::vector<double> work = theta;
  const double f0 = scheme == DifferenceScheme::forward ? f(theta) : 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = relative_step * std::max(1.0, std::abs(theta[i]));
    work[i] = theta[i] + h;
    const double up = f(work);
    if (scheme == DifferenceScheme::central) {
      work[i] = theta[i] - h;
      const double down = f(work);
      grad[i] = (up - down) / (2.0 * h);
    } else {
      grad[i] = (up - f0) / h;
    }
    work[i] = theta[i];
  }
  return grad;
}

// Central-difference gradient of the unconstrained log-likelihood.
inline std::vector<double> loglik_grad(const std::vector<double>& v, const PreparedData& data, const ModelSpec& spec) {
  return numerical_gradient([&](const std::vector<double>& w) { return loglik_unconstrained(w, data, spec); }, v);
}

inline std::vector<double> loglik_grad(const std::vector<double>& v, const ObservationTable& table,
                                       const ModelSpec& spec) {
  return loglik_grad(v, PreparedData(spec, table), spec);
}

}  // namespace mvop
