#pragma once

// Synthetic data from a known parameter set.
//
// Random stream contract (portable, bit-exact):
//   * generator: xoshiro256** 1.0, state seeded by four successive
//     splitmix64 outputs starting from the user seed;
//   * uniform u in [0, 1): (next() >> 11) * 2^-53;
//   * standard normal: Box-Muller from two fresh uniforms u1, u2,
//     z = sqrt(-2 ln(1 - u1)) * cos(2 pi u2); the sine branch is discarded;
//   * per row: covariates in generator column order (constant draws nothing,
//     uniform/Bernoulli one uniform, normal one normal), then one normal per
//     equation; errors are L z with L the lower Cholesky factor of R.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "mvop/error.hpp"
#include "mvop/likelihood.hpp"
#include "mvop/model.hpp"
#include "mvop/mvnprob.hpp"
#include "mvop/table.hpp"

namespace mvop {

class Xoshiro256StarStar {
 public:
  explicit Xoshiro256StarStar(std::uint64_t seed) {
    for (auto& s : state_) s = splitmix64(seed);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::array<std::uint64_t, 4> state_{};
};

struct CovariateDistribution {
  enum class Kind { constant, uniform, normal, bernoulli };
  Kind kind = Kind::normal;
  double a = 0.0;  // constant value, uniform low, or Bernoulli p
  double b = 1.0;  // uniform high

  static CovariateDistribution constant(double v) { return {Kind::constant, v, 0.0}; }
  static CovariateDistribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
  static CovariateDistribution standard_normal() { return {Kind::normal, 0.0, 1.0}; }
  static CovariateDistribution bernoulli(double p) { return {Kind::bernoulli, p, 0.0}; }

  void validate(const std::string& column) const {
    if (kind == Kind::uniform && !(a < b)) {
      throw InvalidParameter("covariate '" + column + "': uniform needs low < high");
    }
    if (kind == Kind::bernoulli && !(a >= 0.0 && a <= 1.0)) {
      throw InvalidParameter("covariate '" + column + "': Bernoulli p must lie in [0, 1]");
    }
    if (kind == Kind::constant && !std::isfinite(a)) {
      throw InvalidParameter("covariate '" + column + "': constant must be finite");
    }
  }

  double draw(Xoshiro256StarStar& rng) const {
    switch (kind) {
      case Kind::constant:
        return a;
      case Kind::uniform:
        return a + (b - a) * rng.uniform();
      case Kind::normal:
        return rng.normal();
      case Kind::bernoulli:
        return rng.uniform() < a ? 1.0 : 0.0;
    }
    return 0.0;
  }
};

struct CovariateGenerator {
  struct Column {
    std::string name;
    CovariateDistribution dist;
  };
  std::vector<Column> columns;

  void validate() const {
    std::set<std::string> seen;
    for (const auto& c : columns) {
      if (!seen.insert(c.name).second) throw InvalidParameter("covariate '" + c.name + "' generated twice");
      c.dist.validate(c.name);
    }
  }
};

// Lower Cholesky factor of the 3x3 correlation matrix, row-major.
inline std::array<double, 9> cholesky3(const Corr3& r) {
  if (!r.is_positive_definite()) throw InvalidParameter("correlation matrix is not positive definite");
  std::array<double, 9> l{};
  l[0] = 1.0;
  l[3] = r.r12;
  l[4] = std::sqrt(1.0 - r.r12 * r.r12);
  l[6] = r.r13;
  l[7] = (r.r23 - r.r12 * r.r13) / l[4];
  l[8] = std::sqrt(std::max(0.0, 1.0 - l[6] * l[6] - l[7] * l[7]));
  return l;
}

inline ObservationTable sample_dataset(const ModelSpec& spec, const ParameterSet& params, std::size_t n,
                                       const CovariateGenerator& gen, std::uint64_t seed) {
  spec.validate();
  params.validate(spec);
  gen.validate();
  if (n < 1) throw InvalidParameter("sample size must be at least 1");

  const std::size_t m = spec.n_equations();
  // Column positions of every equation's covariates within the generator.
  std::vector<std::vector<std::size_t>> cov_index(m);
  for (std::size_t e = 0; e < m; ++e) {
    for (const auto& name : spec.equations[e].covariates) {
      std::size_t found = gen.columns.size();
      for (std::size_t c = 0; c < gen.columns.size(); ++c) {
        if (gen.columns[c].name == name) found = c;
      }
      if (found == gen.columns.size()) throw InvalidParameter("no generator for covariate '" + name + "'");
      cov_index[e].push_back(found);
    }
  }

  const auto chol = cholesky3(params.corr);
  Xoshiro256StarStar rng(seed);
  std::vector<std::vector<double>> x(gen.columns.size(), std::vector<double>(n));
  std::vector<std::vector<double>> y(m, std::vector<double>(n));
  std::vector<double> row(gen.columns.size());
  std::vector<double> xe;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < gen.columns.size(); ++c) {
      row[c] = gen.columns[c].dist.draw(rng);
      x[c][i] = row[c];
    }
    std::array<double, 3> z{};
    for (std::size_t e = 0; e < m; ++e) z[e] = rng.normal();
    for (std::size_t e = 0; e < m; ++e) {
      double eps = 0.0;
      for (std::size_t k = 0; k <= e; ++k) eps += chol[e * 3 + k] * z[k];
      xe.clear();
      for (std::size_t idx : cov_index[e]) xe.push_back(row[idx]);
      const double latent = linear_predictor(params.beta[e], xe) + eps;
      const auto& mu = params.thresholds[e];
      int stage = 0;
      while (stage < static_cast<int>(mu.size()) && latent > mu[static_cast<std::size_t>(stage)]) ++stage;
      y[e][i] = stage;
    }
  }

  ObservationTable table;
  for (std::size_t c = 0; c < gen.columns.size(); ++c) table.add_column(gen.columns[c].name, std::move(x[c]));
  for (std::size_t e = 0; e < m; ++e) table.add_column(spec.equations[e].outcome, std::move(y[e]));
  return table;
}

// Share of rows in each stage, per equation.
inline std::vector<std::vector<double>> empirical_stage_shares(const ObservationTable& table, const ModelSpec& spec) {
  if (table.n_rows() == 0) throw DataError("cannot compute stage shares of an empty table");
  std::vector<std::vector<double>> shares;
  for (const auto& eq : spec.equations) {
    const auto& col = table.column(eq.outcome);
    std::vector<double> counts(static_cast<std::size_t>(eq.n_stages), 0.0);
    for (std::size_t i = 0; i < col.size(); ++i) {
      const double v = col[i];
      if (!(v >= 0.0 && v < eq.n_stages && v == std::floor(v))) {
        throw DataError("row " + std::to_string(i + 1) + ", column '" + eq.outcome + "': invalid stage");
      }
      counts[static_cast<std::size_t>(v)] += 1.0;
    }
    for (auto& c : counts) c /= static_cast<double>(col.size());
    shares.push_back(std::move(counts));
  }
  return shares;
}

}  // namespace mvop
