#pragma once

// Maximum likelihood fitting, observed-information standard errors, fit
// statistics and the likelihood-ratio test of zero cross-equation
// correlation.

#include <Eigen/Dense>

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mvop/error.hpp"
#include "mvop/likelihood.hpp"
#include "mvop/model.hpp"
#include "mvop/mvnprob.hpp"
#include "mvop/table.hpp"

namespace mvop {

struct FitOptions {
  int max_iterations = 500;
  double grad_tolerance = 1e-5;    // inf-norm of the unconstrained gradient
  double rel_ll_tolerance = 1e-9;  // |dLL| / max(1, |LL|) after an accepted step
  std::optional<std::vector<double>> start;  // full unconstrained vector
  bool independent = false;        // hold R at the identity
  bool compute_std_errors = true;

  void validate() const {
    if (max_iterations < 0) throw InvalidParameter("max_iterations must be non-negative");
    if (!(grad_tolerance > 0.0)) throw InvalidParameter("grad_tolerance must be positive");
    if (!(rel_ll_tolerance > 0.0)) throw InvalidParameter("rel_ll_tolerance must be positive");
  }
};

struct FitStats {
  double rho2 = 0.0;
  double aic = 0.0;
  double bic = 0.0;
};

struct FitResult {
  ParameterSet params;
  bool independent = false;
  double ll = 0.0;
  double ll_null = 0.0;
  double rho2 = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  int k = 0;
  std::size_t n = 0;
  // One entry per free constrained parameter, in unconstrained-vector order
  // (betas, thresholds, correlations).
  std::vector<std::string> names;
  std::vector<double> estimates;
  std::vector<std::optional<double>> std_errors;
  std::vector<std::optional<double>> z_values;
  std::vector<std::optional<double>> p_values;
  bool singular_information = false;
  bool converged = false;
  int iterations = 0;
  std::string message;
  std::vector<double> trace;  // log-likelihood after every accepted iterate
  std::vector<double> unconstrained;
};

inline FitStats fit_stats(double ll, double ll_null, int k, std::size_t n) {
  if (!(ll <= 0.0) || !std::isfinite(ll)) throw InvalidLikelihood("log-likelihood must be finite and <= 0");
  if (!(ll_null < 0.0) || !std::isfinite(ll_null)) throw InvalidLikelihood("null log-likelihood must be < 0");
  if (n == 0) throw InvalidLikelihood("sample size must be positive");
  if (k < 1) throw InvalidLikelihood("parameter count must be at least 1");
  FitStats s;
  s.rho2 = 1.0 - ll / ll_null;
  s.aic = 2.0 * k - 2.0 * ll;
  s.bic = k * std::log(static_cast<double>(n)) - 2.0 * ll;
  return s;
}

inline double two_sided_p(double z) { return 2.0 * std_normal_cdf(-std::abs(z)); }

inline double chi_square_sf(double stat, double df) {
  if (stat <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * stat);
}

namespace detail {

inline std::vector<std::size_t> stage_counts(const PreparedData& data, std::size_t e, int n_stages) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_stages), 0);
  for (int y : data.equation(e).y) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

inline void require_variation(const ModelSpec& spec, const PreparedData& data) {
  if (data.n_rows() == 0) throw DataError("no observations");
  for (std::size_t e = 0; e < spec.n_equations(); ++e) {
    const auto counts = stage_counts(data, e, spec.equations[e].n_stages);
    const auto used = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
    if (used < 2) {
      throw DegenerateOutcome("outcome '" + spec.equations[e].outcome + "' takes a single stage");
    }
    // A constant covariate is an intercept, which the thresholds already absorb.
    const auto& d = data.equation(e);
    for (std::size_t c = 0; c < d.n_covariates && data.n_rows() > 1; ++c) {
      bool varies = false;
      for (std::size_t i = 1; i < data.n_rows() && !varies; ++i) varies = d.x[i * d.n_covariates + c] != d.x[c];
      if (!varies) {
        throw InvalidParameter("equation '" + spec.equations[e].name + "': covariate '" +
                               spec.equations[e].covariates[c] +
                               "' is constant and would act as an intercept, which the thresholds already absorb");
      }
    }
  }
}

// Indices of the unconstrained entries that are optimized.
inline std::vector<std::size_t> free_indices(const ModelSpec& spec, bool independent) {
  const std::size_t total = spec.n_parameters();
  const std::size_t n_free = independent ? total - spec.n_correlations() : total;
  std::vector<std::size_t> idx(n_free);
  for (std::size_t i = 0; i < n_free; ++i) idx[i] = i;
  return idx;
}

inline std::vector<std::string> parameter_names(const ModelSpec& spec, bool independent) {
  std::vector<std::string> names;
  for (const auto& eq : spec.equations) {
    for (const auto& c : eq.covariates) names.push_back(eq.name + ":" + c);
  }
  for (const auto& eq : spec.equations) {
    for (int j = 1; j < eq.n_stages; ++j) names.push_back(eq.name + ":mu" + std::to_string(j));
  }
  if (!independent) {
    const auto& q = spec.equations;
    if (q.size() >= 2) names.push_back("rho:" + q[0].name + "," + q[1].name);
    if (q.size() >= 3) {
      names.push_back("rho:" + q[0].name + "," + q[2].name);
      names.push_back("rho:" + q[1].name + "," + q[2].name);
    }
  }
  return names;
}

// Constrained parameters flattened in the same order as parameter_names().
inline std::vector<double> flatten_constrained(const ParameterSet& p, std::size_t n_eq, bool independent) {
  std::vector<double> out;
  for (const auto& b : p.beta) out.insert(out.end(), b.begin(), b.end());
  for (const auto& mu : p.thresholds) out.insert(out.end(), mu.begin(), mu.end());
  if (!independent) {
    if (n_eq >= 2) out.push_back(p.corr.r12);
    if (n_eq >= 3) {
      out.push_back(p.corr.r13);
      out.push_back(p.corr.r23);
    }
  }
  return out;
}

// Minimizes f with BFGS and an Armijo backtracking line search.
struct BfgsOutcome {
  std::vector<double> x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> trace;
};

inline BfgsOutcome bfgs_minimize(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, const FitOptions& opts) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const auto n = static_cast<Eigen::Index>(x.size());
  BfgsOutcome out;
  double fx = f(x);
  if (!std::isfinite(fx)) throw BadStart("objective is not finite at the starting point");
  out.trace.push_back(fx);

  auto gradient = [&](const std::vector<double>& at) {
    const auto g = numerical_gradient(f, at);
    return VectorXd(Eigen::Map<const VectorXd>(g.data(), n));
  };
  auto inf_norm = [](const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); };

  VectorXd g = gradient(x);
  MatrixXd h_inv = MatrixXd::Identity(n, n);
  bool scaled = false;
  constexpr double c1 = 1e-4;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (inf_norm(g) < opts.grad_tolerance) {
      out.converged = true;
      out.message = "gradient tolerance reached";
      break;
    }
    VectorXd d = -h_inv * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      h_inv.setIdentity();
      d = -g;
      slope = g.dot(d);
    }
    // Keep the first trial step of moderate length in the raw parameter space.
    double alpha = 1.0;
    const double dmax = inf_norm(d);
    if (dmax > 5.0) alpha = 5.0 / dmax;

    std::vector<double> trial(x.size());
    double f_trial = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (Eigen::Index i = 0; i < n; ++i) trial[i] = x[i] + alpha * d[i];
      try {
        f_trial = f(trial);
      } catch (const NumericalError&) {
        f_trial = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(f_trial) && f_trial <= fx + c1 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!h_inv.isIdentity()) {
        h_inv.setIdentity();
        scaled = false;
        continue;
      }
      out.message = "line search failed";
      break;
    }

    const VectorXd s = alpha * d;
    const VectorXd g_new = gradient(trial);
    const VectorXd y = g_new - g;
    const double f_old = fx;
    x = trial;
    fx = f_trial;
    g = g_new;
    out.trace.push_back(fx);
    out.iterations = iter + 1;

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv *= sy / y.dot(y);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const VectorXd hy = h_inv * y;
      h_inv += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) - rho * (hy * s.transpose() + s * hy.transpose());
    }

    if (inf_norm(g) < opts.grad_tolerance) {
      out.converged = true;
      out.message = "gradient tolerance reached";
      break;
    }
    if (std::abs(f_old - fx) / std::max(1.0, std::abs(fx)) < opts.rel_ll_tolerance) {
      out.converged = true;
      out.message = "relative log-likelihood change below tolerance";
      break;
    }
    if (iter + 1 == opts.max_iterations) out.message = "iteration limit reached";
  }
  if (opts.max_iterations == 0) out.message = "iteration limit reached";
  out.x = std::move(x);
  out.fx = fx;
  return out;
}

}  // namespace detail

// Thresholds-only log-likelihood with R = I: sum_e sum_j n_ej ln(n_ej / n).
inline double null_loglik(const ModelSpec& spec, const PreparedData& data) {
  detail::require_variation(spec, data);
  const double n = static_cast<double>(data.n_rows());
  double ll = 0.0;
  for (std::size_t e = 0; e < spec.n_equations(); ++e) {
    for (std::size_t c : detail::stage_counts(data, e, spec.equations[e].n_stages)) {
      if (c > 0) ll += static_cast<double>(c) * std::log(static_cast<double>(c) / n);
    }
  }
  return ll;
}

inline double null_loglik(const ModelSpec& spec, const ObservationTable& table) {
  return null_loglik(spec, PreparedData(spec, table));
}

// beta = 0, thresholds at the normal quantiles of the cumulative stage
// shares, R = I.
inline ParameterSet default_start(const ModelSpec& spec, const PreparedData& data) {
  detail::require_variation(spec, data);
  ParameterSet p = ParameterSet::zeros(spec);
  const double n = static_cast<double>(data.n_rows());
  for (std::size_t e = 0; e < spec.n_equations(); ++e) {
    const auto counts = detail::stage_counts(data, e, spec.equations[e].n_stages);
    double cum = 0.0;
    auto& mu = p.thresholds[e];
    for (std::size_t j = 0; j < mu.size(); ++j) {
      cum += static_cast<double>(counts[j]);
      const double share = std::clamp(cum / n, 0.5 / n, 1.0 - 0.5 / n);
      mu[j] = std_normal_quantile(share);
      if (j > 0) mu[j] = std::max(mu[j], mu[j - 1] + 1e-2);
    }
  }
  return p;
}

struct InformationResult {
  std::vector<std::optional<double>> std_errors;
  bool singular = false;
};

// Standard errors of the constrained parameters from the observed
// information in the unconstrained space, mapped through the numerical
// Jacobian of the parameter transform (delta method).
inline InformationResult std_errors(const std::vector<double>& unconstrained, const PreparedData& data,
                                    const ModelSpec& spec, bool independent = false) {
  using Eigen::MatrixXd;
  const auto free = detail::free_indices(spec, independent);
  const auto k = static_cast<Eigen::Index>(free.size());
  auto objective = [&](const std::vector<double>& v) { return loglik_unconstrained(v, data, spec); };

  std::vector<double> h(free.size());
  const double step = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  for (std::size_t i = 0; i < free.size(); ++i) {
    h[i] = step * std::max(1.0, std::abs(unconstrained[free[i]]));
  }

  MatrixXd hess(k, k);
  std::vector<double> w = unconstrained;
  const double f0 = objective(w);
  auto eval_shift = [&](std::size_t a, double da, std::size_t b, double db) {
    w = unconstrained;
    w[free[a]] += da;
    w[free[b]] += db;
    return objective(w);
  };
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double fp = eval_shift(ua, h[ua], ua, 0.0);
    const double fm = eval_shift(ua, -h[ua], ua, 0.0);
    hess(a, a) = (fp - 2.0 * f0 + fm) / (h[ua] * h[ua]);
    for (Eigen::Index b = 0; b < a; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      const double fpp = eval_shift(ua, h[ua], ub, h[ub]);
      const double fpm = eval_shift(ua, h[ua], ub, -h[ub]);
      const double fmp = eval_shift(ua, -h[ua], ub, h[ub]);
      const double fmm = eval_shift(ua, -h[ua], ub, -h[ub]);
      hess(a, b) = hess(b, a) = (fpp - fpm - fmp + fmm) / (4.0 * h[ua] * h[ub]);
    }
  }
  const MatrixXd info = -hess;

  // Jacobian of the constrained flattening w.r.t. the free raws.
  const std::size_t n_eq = spec.n_equations();
  auto constrained_at = [&](const std::vector<double>& v) {
    return detail::flatten_constrained(from_unconstrained(v, spec), n_eq, independent);
  };
  const auto c0 = constrained_at(unconstrained);
  const auto m = static_cast<Eigen::Index>(c0.size());
  MatrixXd jac(m, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double hj = kCentralStep * std::max(1.0, std::abs(unconstrained[free[ua]]));
    w = unconstrained;
    w[free[ua]] += hj;
    const auto cp = constrained_at(w);
    w[free[ua]] -= 2.0 * hj;
    const auto cm = constrained_at(w);
    for (Eigen::Index r = 0; r < m; ++r) {
      jac(r, a) = (cp[static_cast<std::size_t>(r)] - cm[static_cast<std::size_t>(r)]) / (2.0 * hj);
    }
  }

  InformationResult out;
  out.std_errors.assign(static_cast<std::size_t>(m), std::nullopt);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(info);
  const auto& values = eig.eigenvalues();
  const auto& vectors = eig.eigenvectors();
  const double largest = values.size() > 0 ? values.maxCoeff() : 0.0;
  const double cutoff = std::max(largest, 1.0) * 1e-10;

  MatrixXd cov_u = MatrixXd::Zero(k, k);
  std::vector<bool> affected(static_cast<std::size_t>(k), false);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (values(i) > cutoff) {
      cov_u += vectors.col(i) * vectors.col(i).transpose() / values(i);
    } else {
      out.singular = true;
      for (Eigen::Index a = 0; a < k; ++a) {
        if (std::abs(vectors(a, i)) > 1e-6) affected[static_cast<std::size_t>(a)] = true;
      }
    }
  }
  const MatrixXd cov_c = jac * cov_u * jac.transpose();
  for (Eigen::Index r = 0; r < m; ++r) {
    bool bad = false;
    for (Eigen::Index a = 0; a < k; ++a) {
      if (affected[static_cast<std::size_t>(a)] && std::abs(jac(r, a)) > 0.0) bad = true;
    }
    if (!bad && cov_c(r, r) > 0.0) out.std_errors[static_cast<std::size_t>(r)] = std::sqrt(cov_c(r, r));
  }
  return out;
}

inline FitResult fit(const ModelSpec& spec, const PreparedData& data, const FitOptions& opts = {}) {
  spec.validate();
  opts.validate();
  detail::require_variation(spec, data);

  std::vector<double> start;
  if (opts.start) {
    start = *opts.start;
    if (start.size() != spec.n_parameters()) throw ShapeError("start vector has the wrong length");
    for (double v : start) {
      if (!std::isfinite(v)) throw BadStart("start vector has a non-finite entry");
    }
  } else {
    start = to_unconstrained(default_start(spec, data), spec);
  }
  const auto free = detail::free_indices(spec, opts.independent);
  if (opts.independent) {
    for (std::size_t i = free.size(); i < start.size(); ++i) start[i] = 0.0;
  }

  auto expand = [&](const std::vector<double>& x) {
    std::vector<double> full = start;
    for (std::size_t i = 0; i < free.size(); ++i) full[free[i]] = x[i];
    return full;
  };
  auto objective = [&](const std::vector<double>& x) {
    const double ll = loglik_unconstrained(expand(x), data, spec);
    return -ll;
  };

  std::vector<double> x0(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) x0[i] = start[free[i]];
  double f_start;
  try {
    f_start = objective(x0);
  } catch (const NumericalError& e) {
    throw BadStart(std::string("log-likelihood cannot be evaluated at the start: ") + e.what());
  }
  if (!std::isfinite(f_start)) throw BadStart("log-likelihood is not finite at the start");

  const auto opt = detail::bfgs_minimize(objective, x0, opts);

  FitResult r;
  r.independent = opts.independent;
  r.unconstrained = expand(opt.x);
  r.params = from_unconstrained(r.unconstrained, spec);
  r.ll = -opt.fx;
  r.ll_null = null_loglik(spec, data);
  r.k = static_cast<int>(free.size());
  r.n = data.n_rows();
  const auto stats = fit_stats(std::min(r.ll, 0.0), r.ll_null, r.k, r.n);
  r.rho2 = stats.rho2;
  r.aic = stats.aic;
  r.bic = stats.bic;
  r.converged = opt.converged;
  r.iterations = opt.iterations;
  r.message = opt.message;
  for (double f : opt.trace) r.trace.push_back(-f);

  r.names = detail::parameter_names(spec, opts.independent);
  r.estimates = detail::flatten_constrained(r.params, spec.n_equations(), opts.independent);
  const std::size_t m = r.estimates.size();
  r.std_errors.assign(m, std::nullopt);
  r.z_values.assign(m, std::nullopt);
  r.p_values.assign(m, std::nullopt);
  if (opts.compute_std_errors) {
    const auto info = std_errors(r.unconstrained, data, spec, opts.independent);
    r.singular_information = info.singular;
    r.std_errors = info.std_errors;
    for (std::size_t i = 0; i < m; ++i) {
      if (!r.std_errors[i]) continue;
      const double z = r.estimates[i] / *r.std_errors[i];
      r.z_values[i] = z;
      r.p_values[i] = two_sided_p(z);
    }
  }
  return r;
}

inline FitResult fit(const ModelSpec& spec, const ObservationTable& table, const FitOptions& opts = {}) {
  return fit(spec, PreparedData(spec, table), opts);
}

struct LrTest {
  double stat = 0.0;
  int df = 0;
  double p = 1.0;
};

// 2 (LL_joint - LL_indep) against chi-square with one degree of freedom per
// correlation parameter.
inline LrTest lr_test_independence(const FitResult& joint, const FitResult& indep) {
  if (joint.independent || !indep.independent) {
    throw InvalidParameter("likelihood-ratio test needs a joint fit and an independent fit");
  }
  if (joint.n != indep.n || joint.params.beta.size() != indep.params.beta.size() || joint.k <= indep.k) {
    throw InvalidParameter("likelihood-ratio test on fits of different models or data");
  }
  for (std::size_t e = 0; e < joint.params.beta.size(); ++e) {
    if (joint.params.beta[e].size() != indep.params.beta[e].size() ||
        joint.params.thresholds[e].size() != indep.params.thresholds[e].size()) {
      throw InvalidParameter("likelihood-ratio test on fits of different models");
    }
  }
  LrTest t;
  t.df = joint.k - indep.k;
  const double stat = 2.0 * (joint.ll - indep.ll);
  if (stat < -1e-6) {
    throw NumericalError("joint log-likelihood below the independent one; joint fit did not converge");
  }
  t.stat = std::max(0.0, stat);
  t.p = chi_square_sf(t.stat, t.df);
  return t;
}

}  // namespace mvop
