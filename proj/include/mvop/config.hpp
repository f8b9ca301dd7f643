#pragma once

// Run configuration: strict JSON parsing (unknown keys are errors, every
// error names its JSON path) and the effective-config echo with all
// defaults written out.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mvop/error.hpp"
#include "mvop/estimate.hpp"
#include "mvop/features.hpp"
#include "mvop/model.hpp"
#include "mvop/predict.hpp"
#include "mvop/simulate.hpp"

namespace mvop {

using Json = nlohmann::ordered_json;

struct SimulateConfig {
  std::size_t n = 1000;
  ParameterSet params;
  CovariateGenerator covariates;
  std::string output;  // CSV path
};

struct NamedContour {
  std::string name;
  ContourRequest request;
  bool svg = true;
};

struct StagingConfig {
  std::string input;
  std::string output;
};

struct DiaryConfig {
  std::string input;
  std::string output;
  std::vector<std::string> modes;
};

struct RunConfig {
  std::optional<ModelSpec> model;
  std::string input;
  std::string output_dir = ".";
  std::uint64_t seed = 1;
  unsigned threads = 0;
  FitOptions fit;
  bool compare_independent = false;
  std::optional<SimulateConfig> simulate;
  std::string params_file;
  std::vector<NamedContour> contours;
  std::map<std::string, std::string> merge_map_specs;  // mode -> preset name (or "custom")
  std::map<std::string, MergeMap> merge_maps;
  BandMap band_midpoints = default_band_midpoints();
  std::optional<StagingConfig> staging;
  std::optional<DiaryConfig> diary;

  const ModelSpec& require_model() const {
    if (!model) throw ConfigError("$.model: required for this command");
    return *model;
  }

  // Merge map for a mode; four_stage when the config does not name one.
  MergeMap merge_map_for(const std::string& mode) const {
    const auto it = merge_maps.find(mode);
    return it == merge_maps.end() ? merge_presets::four_stage() : it->second;
  }
};

namespace detail {

// Walks a JSON object, remembering the path and which keys were read.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const Json& at(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) throw ConfigError(path_ + "." + key + ": required key missing");
    return j_.at(key);
  }
  std::string child(const std::string& key) const { return path_ + "." + key; }
  const std::string& path() const { return path_; }

  std::string get_string(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_string()) throw ConfigError(child(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? get_string(key) : fallback;
  }
  double get_number(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number()) throw ConfigError(child(key) + ": expected a number");
    return v.get<double>();
  }
  double get_number(const std::string& key, double fallback) { return has(key) ? get_number(key) : fallback; }
  std::int64_t get_integer(const std::string& key) {
    const Json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(child(key) + ": expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t get_integer(const std::string& key, std::int64_t fallback) {
    return has(key) ? get_integer(key) : fallback;
  }
  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(child(key) + ": expected true or false");
    return v.get<bool>();
  }

  // Strict mode: anything not read is a typo or an unsupported option.
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!used_.count(item.key())) throw ConfigError(path_ + "." + item.key() + ": unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline std::vector<double> number_array(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

inline std::pair<double, double> number_pair(const Json& v, const std::string& path) {
  const auto a = number_array(v, path);
  if (a.size() != 2) throw ConfigError(path + ": expected [low, high]");
  return {a[0], a[1]};
}

inline std::vector<std::string> string_array(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string()) throw ConfigError(path + "[" + std::to_string(i) + "]: expected a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

inline ModelSpec parse_model(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  const Json& eqs = r.at("equations");
  if (!eqs.is_array()) throw ConfigError(r.child("equations") + ": expected an array");
  ModelSpec spec;
  for (std::size_t i = 0; i < eqs.size(); ++i) {
    const std::string p = r.child("equations") + "[" + std::to_string(i) + "]";
    ObjectReader er(eqs[i], p);
    EquationSpec eq;
    eq.name = er.get_string("name");
    const auto n_stages = er.get_integer("n_stages");
    if (n_stages < 2) throw ConfigError(er.child("n_stages") + ": must be at least 2");
    eq.n_stages = static_cast<int>(n_stages);
    eq.covariates = string_array(er.at("covariates"), er.child("covariates"));
    std::set<std::string> seen;
    for (std::size_t c = 0; c < eq.covariates.size(); ++c) {
      if (!seen.insert(eq.covariates[c]).second) {
        throw ConfigError(er.child("covariates") + "[" + std::to_string(c) + "]: duplicate covariate '" +
                          eq.covariates[c] + "'");
      }
    }
    eq.outcome = er.get_string("outcome", eq.name);
    er.finish();
    spec.equations.push_back(std::move(eq));
  }
  r.finish();
  try {
    spec.validate();
  } catch (const InputError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return spec;
}

inline ParameterSet parse_params(const Json& j, const std::string& path, const ModelSpec& spec) {
  ObjectReader r(j, path);
  ParameterSet p;
  const Json& beta = r.at("beta");
  const Json& thr = r.at("thresholds");
  ObjectReader br(beta, r.child("beta"));
  ObjectReader tr(thr, r.child("thresholds"));
  for (const auto& eq : spec.equations) {
    p.beta.push_back(number_array(br.at(eq.name), br.child(eq.name)));
    p.thresholds.push_back(number_array(tr.at(eq.name), tr.child(eq.name)));
    if (p.beta.back().size() != eq.covariates.size()) {
      throw ConfigError(br.child(eq.name) + ": expected " + std::to_string(eq.covariates.size()) +
                        " coefficients, one per covariate");
    }
    if (p.thresholds.back().size() != static_cast<std::size_t>(eq.n_stages - 1)) {
      throw ConfigError(tr.child(eq.name) + ": expected " + std::to_string(eq.n_stages - 1) + " thresholds");
    }
  }
  br.finish();
  tr.finish();
  if (r.has("corr")) {
    const auto c = number_array(r.at("corr"), r.child("corr"));
    if (c.size() != spec.n_correlations()) {
      throw ConfigError(r.child("corr") + ": expected " + std::to_string(spec.n_correlations()) +
                        " entries (r12[, r13, r23])");
    }
    if (c.size() >= 1) p.corr.r12 = c[0];
    if (c.size() >= 3) {
      p.corr.r13 = c[1];
      p.corr.r23 = c[2];
    }
  }
  r.finish();
  try {
    p.validate(spec);
  } catch (const InputError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return p;
}

inline CovariateGenerator parse_generator(const Json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of covariate generators");
  CovariateGenerator g;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    ObjectReader r(j[i], p);
    CovariateGenerator::Column col;
    col.name = r.get_string("name");
    const std::string dist = r.get_string("dist", "normal");
    if (dist == "normal") {
      col.dist = CovariateDistribution::standard_normal();
    } else if (dist == "uniform") {
      col.dist = CovariateDistribution::uniform(r.get_number("low", 0.0), r.get_number("high", 1.0));
    } else if (dist == "bernoulli") {
      col.dist = CovariateDistribution::bernoulli(r.get_number("p", 0.5));
    } else if (dist == "constant") {
      col.dist = CovariateDistribution::constant(r.get_number("value"));
    } else {
      throw ConfigError(r.child("dist") + ": unknown distribution '" + dist +
                        "' (normal, uniform, bernoulli, constant)");
    }
    r.finish();
    try {
      col.dist.validate(col.name);
    } catch (const InputError& e) {
      throw ConfigError(p + ": " + e.what());
    }
    g.columns.push_back(std::move(col));
  }
  try {
    g.validate();
  } catch (const InputError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return g;
}

inline MergeMap parse_merge_map(const Json& j, const std::string& path, std::string& spec_name) {
  try {
    if (j.is_string()) {
      spec_name = j.get<std::string>();
      return merge_presets::by_name(spec_name);
    }
    if (!j.is_object()) throw ConfigError(path + ": expected a preset name or a label -> ordinal object");
    spec_name = "custom";
    std::vector<std::pair<StageLabel, int>> entries;
    for (const auto& item : j.items()) {
      if (!item.value().is_number_integer()) throw ConfigError(path + "." + item.key() + ": expected an integer");
      entries.emplace_back(stage_label_from_string(item.key()), item.value().get<int>());
    }
    return MergeMap(std::move(entries));
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_relative()) path = base / path;
  path = path.lexically_normal();
  // "dir/." normalizes to "dir/"; drop the separator.
  if (!path.has_filename() && path.has_relative_path()) path = path.parent_path();
  return path.string();
}

}  // namespace detail

// Parses a configuration document. Relative paths are resolved against
// `base_dir` (normally the directory holding the config file).
inline RunConfig parse_config(const Json& j, const std::filesystem::path& base_dir = ".") {
  using detail::ObjectReader;
  const auto base = std::filesystem::absolute(base_dir);
  ObjectReader r(j, "$");
  RunConfig c;
  if (r.has("model")) c.model = detail::parse_model(r.at("model"), r.child("model"));
  c.input = detail::resolve_path(r.get_string("input", ""), base);
  c.output_dir = detail::resolve_path(r.get_string("output_dir", "."), base);
  const auto seed = r.get_integer("seed", 1);
  if (seed < 0) throw ConfigError("$.seed: must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  const auto threads = r.get_integer("threads", 0);
  if (threads < 0) throw ConfigError("$.threads: must be non-negative");
  c.threads = static_cast<unsigned>(threads);

  if (r.has("fit")) {
    ObjectReader f(r.at("fit"), r.child("fit"));
    c.fit.max_iterations = static_cast<int>(f.get_integer("max_iterations", c.fit.max_iterations));
    c.fit.grad_tolerance = f.get_number("grad_tolerance", c.fit.grad_tolerance);
    c.fit.rel_ll_tolerance = f.get_number("rel_ll_tolerance", c.fit.rel_ll_tolerance);
    if (f.has("start")) c.fit.start = detail::number_array(f.at("start"), f.child("start"));
    c.fit.independent = f.get_bool("independent", false);
    c.fit.compute_std_errors = f.get_bool("std_errors", true);
    c.compare_independent = f.get_bool("compare_independent", false);
    f.finish();
    try {
      c.fit.validate();
    } catch (const InputError& e) {
      throw ConfigError("$.fit: " + std::string(e.what()));
    }
    if (c.fit.start && c.model && c.fit.start->size() != c.model->n_parameters()) {
      throw ConfigError("$.fit.start: expected " + std::to_string(c.model->n_parameters()) + " entries");
    }
  }

  if (r.has("simulate")) {
    ObjectReader s(r.at("simulate"), r.child("simulate"));
    if (!c.model) throw ConfigError("$.simulate: needs $.model");
    SimulateConfig sim;
    const auto n = s.get_integer("n", 1000);
    if (n < 1) throw ConfigError("$.simulate.n: must be at least 1");
    sim.n = static_cast<std::size_t>(n);
    sim.params = detail::parse_params(s.at("params"), s.child("params"), *c.model);
    sim.covariates = detail::parse_generator(s.at("covariates"), s.child("covariates"));
    sim.output = detail::resolve_path(s.get_string("output", "simulated.csv"), base);
    s.finish();
    c.simulate = std::move(sim);
  }

  c.params_file = detail::resolve_path(r.get_string("params_file", ""), base);

  if (r.has("contours")) {
    const Json& arr = r.at("contours");
    if (!arr.is_array()) throw ConfigError("$.contours: expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = "$.contours[" + std::to_string(i) + "]";
      ObjectReader cr(arr[i], p);
      NamedContour nc;
      nc.name = cr.get_string("name", "contour" + std::to_string(i + 1));
      nc.request.var_a = cr.get_string("var_a");
      nc.request.var_b = cr.get_string("var_b");
      nc.request.range_a = detail::number_pair(cr.at("range_a"), cr.child("range_a"));
      nc.request.range_b = detail::number_pair(cr.at("range_b"), cr.child("range_b"));
      nc.request.resolution = static_cast<int>(cr.get_integer("resolution", 101));
      if (cr.has("baseline")) {
        ObjectReader br(cr.at("baseline"), cr.child("baseline"));
        for (const auto& item : cr.at("baseline").items()) {
          nc.request.baseline[item.key()] = br.get_number(item.key());
        }
        br.finish();
      }
      nc.request.joint = cr.get_bool("joint", false);
      nc.svg = cr.get_bool("svg", true);
      cr.finish();
      if (c.model) {
        try {
          nc.request.validate(*c.model);
        } catch (const InputError& e) {
          throw ConfigError(p + ": " + e.what());
        }
      }
      c.contours.push_back(std::move(nc));
    }
  }

  if (r.has("merge_maps")) {
    ObjectReader mr(r.at("merge_maps"), r.child("merge_maps"));
    for (const auto& item : r.at("merge_maps").items()) {
      std::string name;
      c.merge_maps.emplace(item.key(), detail::parse_merge_map(mr.at(item.key()), mr.child(item.key()), name));
      c.merge_map_specs[item.key()] = name;
    }
    mr.finish();
  }

  if (r.has("band_midpoints")) {
    const Json& b = r.at("band_midpoints");
    ObjectReader br(b, r.child("band_midpoints"));
    c.band_midpoints.clear();
    for (const auto& item : b.items()) {
      const double v = br.get_number(item.key());
      if (!(v >= 0.0)) throw ConfigError(br.child(item.key()) + ": midpoint must be non-negative");
      c.band_midpoints[normalize_band(item.key())] = v;
    }
    br.finish();
    if (c.band_midpoints.empty()) throw ConfigError("$.band_midpoints: must not be empty");
  }

  if (r.has("staging")) {
    ObjectReader sr(r.at("staging"), r.child("staging"));
    StagingConfig st;
    st.input = detail::resolve_path(sr.get_string("input"), base);
    st.output = detail::resolve_path(sr.get_string("output", "stages.csv"), base);
    sr.finish();
    c.staging = st;
  }

  if (r.has("diary")) {
    ObjectReader dr(r.at("diary"), r.child("diary"));
    DiaryConfig d;
    d.input = detail::resolve_path(dr.get_string("input"), base);
    d.output = detail::resolve_path(dr.get_string("output", "diary_indices.csv"), base);
    d.modes = detail::string_array(dr.at("modes"), dr.child("modes"));
    if (d.modes.empty()) throw ConfigError("$.diary.modes: must list at least one mode column");
    dr.finish();
    c.diary = d;
  }

  r.finish();
  return c;
}

inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, base_dir);
}

inline RunConfig parse_config(const char* text, const std::filesystem::path& base_dir = ".") {
  return parse_config(std::string(text), base_dir);
}

namespace detail {

inline Json model_to_json(const ModelSpec& spec) {
  Json eqs = Json::array();
  for (const auto& eq : spec.equations) {
    eqs.push_back(Json{{"name", eq.name}, {"n_stages", eq.n_stages}, {"covariates", eq.covariates}, {"outcome", eq.outcome}});
  }
  return Json{{"equations", eqs}};
}

inline Json params_to_json(const ParameterSet& p, const ModelSpec& spec) {
  Json beta = Json::object(), thr = Json::object();
  for (std::size_t e = 0; e < spec.n_equations(); ++e) {
    beta[spec.equations[e].name] = p.beta[e];
    thr[spec.equations[e].name] = p.thresholds[e];
  }
  Json corr = Json::array();
  if (spec.n_equations() >= 2) corr.push_back(p.corr.r12);
  if (spec.n_equations() >= 3) {
    corr.push_back(p.corr.r13);
    corr.push_back(p.corr.r23);
  }
  return Json{{"beta", beta}, {"thresholds", thr}, {"corr", corr}};
}

inline Json merge_map_to_json(const MergeMap& m) {
  Json o = Json::object();
  for (const auto& [label, ord] : m.entries()) o[std::string(to_string(label))] = ord;
  return o;
}

}  // namespace detail

// Every option with its effective value; feeding this back to parse_config
// reproduces the same RunConfig.
inline Json effective_config(const RunConfig& c) {
  Json j = Json::object();
  if (c.model) j["model"] = detail::model_to_json(*c.model);
  j["input"] = c.input;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  Json fit{{"max_iterations", c.fit.max_iterations},
           {"grad_tolerance", c.fit.grad_tolerance},
           {"rel_ll_tolerance", c.fit.rel_ll_tolerance},
           {"start", c.fit.start ? Json(*c.fit.start) : Json(nullptr)},
           {"independent", c.fit.independent},
           {"std_errors", c.fit.compute_std_errors},
           {"compare_independent", c.compare_independent}};
  j["fit"] = fit;
  if (c.simulate && c.model) {
    Json covs = Json::array();
    for (const auto& col : c.simulate->covariates.columns) {
      Json g{{"name", col.name}};
      switch (col.dist.kind) {
        case CovariateDistribution::Kind::normal:
          g["dist"] = "normal";
          break;
        case CovariateDistribution::Kind::uniform:
          g["dist"] = "uniform";
          g["low"] = col.dist.a;
          g["high"] = col.dist.b;
          break;
        case CovariateDistribution::Kind::bernoulli:
          g["dist"] = "bernoulli";
          g["p"] = col.dist.a;
          break;
        case CovariateDistribution::Kind::constant:
          g["dist"] = "constant";
          g["value"] = col.dist.a;
          break;
      }
      covs.push_back(g);
    }
    j["simulate"] = Json{{"n", c.simulate->n},
                         {"params", detail::params_to_json(c.simulate->params, *c.model)},
                         {"covariates", covs},
                         {"output", c.simulate->output}};
  }
  j["params_file"] = c.params_file;
  Json contours = Json::array();
  for (const auto& nc : c.contours) {
    Json base = Json::object();
    for (const auto& [k, v] : nc.request.baseline) base[k] = v;
    contours.push_back(Json{{"name", nc.name},
                            {"var_a", nc.request.var_a},
                            {"var_b", nc.request.var_b},
                            {"range_a", {nc.request.range_a.first, nc.request.range_a.second}},
                            {"range_b", {nc.request.range_b.first, nc.request.range_b.second}},
                            {"resolution", nc.request.resolution},
                            {"baseline", base},
                            {"joint", nc.request.joint},
                            {"svg", nc.svg}});
  }
  j["contours"] = contours;
  Json maps = Json::object();
  for (const auto& [mode, m] : c.merge_maps) maps[mode] = detail::merge_map_to_json(m);
  j["merge_maps"] = maps;
  Json bands = Json::object();
  for (const auto& [k, v] : c.band_midpoints) bands[k] = v;
  j["band_midpoints"] = bands;
  if (c.staging) j["staging"] = Json{{"input", c.staging->input}, {"output", c.staging->output}};
  if (c.diary) j["diary"] = Json{{"input", c.diary->input}, {"output", c.diary->output}, {"modes", c.diary->modes}};
  return j;
}

}  // namespace mvop
