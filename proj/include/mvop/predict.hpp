#pragma once

// Stage probabilities from a fitted model and two-covariate scenario grids.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvop/error.hpp"
#include "mvop/likelihood.hpp"
#include "mvop/model.hpp"
#include "mvop/parallel.hpp"

namespace mvop {

using CovariateRow = std::map<std::string, double>;

namespace detail {

inline std::vector<double> equation_covariates(const EquationSpec& eq, const CovariateRow& x) {
  std::vector<double> v;
  v.reserve(eq.covariates.size());
  for (const auto& c : eq.covariates) {
    const auto it = x.find(c);
    if (it == x.end()) throw InputError("covariate row lacks '" + c + "' needed by equation '" + eq.name + "'");
    v.push_back(it->second);
  }
  return v;
}

inline std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

// Univariate ordered-probit stage probabilities of one equation. The
// correlation matrix plays no part.
inline std::vector<double> marginal_stage_probs(const ParameterSet& p, const ModelSpec& spec, const CovariateRow& x,
                                                std::size_t eq) {
  if (eq >= spec.n_equations()) throw InputError("unknown equation index " + std::to_string(eq));
  const auto& e = spec.equations[eq];
  const double xb = linear_predictor(p.beta[eq], detail::equation_covariates(e, x));
  std::vector<double> probs(static_cast<std::size_t>(e.n_stages));
  for (int j = 0; j < e.n_stages; ++j) probs[static_cast<std::size_t>(j)] = cell_prob_uni(p.thresholds[eq], j, xb);
  return probs;
}

inline std::vector<double> marginal_stage_probs(const ParameterSet& p, const ModelSpec& spec, const CovariateRow& x,
                                                const std::string& eq) {
  return marginal_stage_probs(p, spec, x, spec.equation_index(eq));
}

// Joint probabilities over all stage combinations, row-major with the last
// equation varying fastest. Missing equations have extent 1.
struct StageTensor {
  std::array<int, 3> dims{1, 1, 1};
  std::vector<double> values;

  double at(int j, int k, int l) const {
    return values[static_cast<std::size_t>((j * dims[1] + k) * dims[2] + l)];
  }

  // Sum over every axis except `axis`.
  std::vector<double> marginal(int axis) const {
    std::vector<double> out(static_cast<std::size_t>(dims[static_cast<std::size_t>(axis)]), 0.0);
    for (int j = 0; j < dims[0]; ++j)
      for (int k = 0; k < dims[1]; ++k)
        for (int l = 0; l < dims[2]; ++l) {
          const int idx = axis == 0 ? j : axis == 1 ? k : l;
          out[static_cast<std::size_t>(idx)] += at(j, k, l);
        }
    return out;
  }
};

inline StageTensor joint_stage_probs(const ParameterSet& p, const ModelSpec& spec, const CovariateRow& x) {
  const std::size_t m = spec.n_equations();
  StageTensor t;
  std::array<double, 3> xb{};
  for (std::size_t e = 0; e < m; ++e) {
    t.dims[e] = spec.equations[e].n_stages;
    xb[e] = linear_predictor(p.beta[e], detail::equation_covariates(spec.equations[e], x));
  }
  t.values.resize(static_cast<std::size_t>(t.dims[0] * t.dims[1] * t.dims[2]));
  std::size_t pos = 0;
  for (int j = 0; j < t.dims[0]; ++j)
    for (int k = 0; k < t.dims[1]; ++k)
      for (int l = 0; l < t.dims[2]; ++l) {
        const std::array<int, 3> stages{j, k, l};
        t.values[pos++] = cell_prob_joint(p, std::span(stages).first(m), std::span(xb).first(m));
      }
  return t;
}

struct ContourRequest {
  std::string var_a;
  std::string var_b;
  std::pair<double, double> range_a{0.0, 1.0};
  std::pair<double, double> range_b{0.0, 1.0};
  int resolution = 101;
  CovariateRow baseline;
  bool joint = false;  // also report the most likely stage combination

  void validate(const ModelSpec& spec) const {
    if (var_a == var_b) throw InputError("contour axes must be two different covariates");
    if (!(range_a.first < range_a.second) || !(range_b.first < range_b.second)) {
      throw InputError("contour ranges need low < high");
    }
    if (resolution < 2) throw InputError("contour resolution must be at least 2");
    for (const auto& var : {var_a, var_b}) {
      bool used = false;
      for (const auto& eq : spec.equations) {
        used = used || std::find(eq.covariates.begin(), eq.covariates.end(), var) != eq.covariates.end();
      }
      if (!used) throw InputError("contour covariate '" + var + "' does not appear in any equation");
    }
  }
};

struct ContourCell {
  double a = 0.0;
  double b = 0.0;
  std::vector<std::vector<double>> probs;  // per equation
  std::vector<int> argmax;                 // per equation
  std::optional<std::array<int, 3>> joint_argmax;
  double joint_probability = 0.0;
};

struct ContourGrid {
  std::string var_a;
  std::string var_b;
  std::vector<double> axis_a;
  std::vector<double> axis_b;
  std::vector<std::string> equations;
  std::vector<int> n_stages;
  std::vector<ContourCell> cells;  // row-major: a outer, b inner

  const ContourCell& cell(std::size_t ia, std::size_t ib) const { return cells[ia * axis_b.size() + ib]; }
};

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  v.back() = hi;
  return v;
}

inline ContourGrid contour_grid(const ParameterSet& p, const ModelSpec& spec, const ContourRequest& req) {
  req.validate(spec);
  p.validate(spec);
  ContourGrid g;
  g.var_a = req.var_a;
  g.var_b = req.var_b;
  g.axis_a = linspace(req.range_a.first, req.range_a.second, req.resolution);
  g.axis_b = linspace(req.range_b.first, req.range_b.second, req.resolution);
  for (const auto& eq : spec.equations) {
    g.equations.push_back(eq.name);
    g.n_stages.push_back(eq.n_stages);
  }
  const std::size_t na = g.axis_a.size();
  const std::size_t nb = g.axis_b.size();
  g.cells.resize(na * nb);
  parallel_for(na * nb, [&](std::size_t idx) {
    ContourCell c;
    c.a = g.axis_a[idx / nb];
    c.b = g.axis_b[idx % nb];
    CovariateRow x = req.baseline;
    x[req.var_a] = c.a;
    x[req.var_b] = c.b;
    for (std::size_t e = 0; e < spec.n_equations(); ++e) {
      auto probs = marginal_stage_probs(p, spec, x, e);
      c.argmax.push_back(static_cast<int>(detail::argmax(probs)));
      c.probs.push_back(std::move(probs));
    }
    if (req.joint) {
      const auto t = joint_stage_probs(p, spec, x);
      const auto best = detail::argmax(t.values);
      const int l = static_cast<int>(best) % t.dims[2];
      const int k = static_cast<int>(best) / t.dims[2] % t.dims[1];
      const int j = static_cast<int>(best) / (t.dims[2] * t.dims[1]);
      c.joint_argmax = std::array<int, 3>{j, k, l};
      c.joint_probability = t.values[best];
    }
    g.cells[idx] = std::move(c);
  });
  return g;
}

}  // namespace mvop
