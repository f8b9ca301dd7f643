#pragma once

// Command dispatch for the mvop executable. `run` never exits the process;
// it returns the exit status so tests can drive it in-process.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mvop/config.hpp"
#include "mvop/csv.hpp"
#include "mvop/error.hpp"
#include "mvop/estimate.hpp"
#include "mvop/features.hpp"
#include "mvop/mvnprob.hpp"
#include "mvop/parallel.hpp"
#include "mvop/predict.hpp"
#include "mvop/report.hpp"
#include "mvop/simulate.hpp"

namespace mvop {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumerical = 2 };

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_config_file(const std::string& path) {
  const auto abs = std::filesystem::absolute(path);
  return parse_config(read_text_file(abs.string()), abs.parent_path());
}

inline void ensure_parent(const std::string& file) {
  const auto parent = std::filesystem::path(file).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline std::ofstream open_output(const std::string& file) {
  ensure_parent(file);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + file + "'");
  return out;
}

inline std::string in_dir(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).lexically_normal().string();
}

inline void write_json_file(const std::string& file, const Json& j) {
  auto out = open_output(file);
  out << j.dump(2) << '\n';
}

inline std::vector<double> parse_number_list(const std::string& s, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    double v = 0.0;
    if (item == "inf" || item == "+inf") {
      v = kInf;
    } else if (item == "-inf") {
      v = -kInf;
    } else if (!parse_double(item, v)) {
      throw InputError(flag + ": cannot parse '" + item + "' as a number");
    }
    out.push_back(v);
  }
  return out;
}

inline std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Staging CSV answer fields: blank means "not asked".
inline std::optional<bool> parse_yes_no(const std::string& v, std::size_t row, const std::string& col) {
  if (v.empty()) return std::nullopt;
  if (v == "yes" || v == "1" || v == "true") return true;
  if (v == "no" || v == "0" || v == "false") return false;
  throw DataError("row " + std::to_string(row) + ", column '" + col + "': expected yes/no, found '" + v + "'");
}

inline StageLabel stage_row(const CsvDocument& doc, std::size_t r) {
  const auto& row = doc.rows[r];
  auto field = [&](const std::string& name) -> std::string {
    const std::size_t i = doc.column_index(name);
    return i == doc.header.size() ? std::string() : row[i];
  };
  const std::size_t line = r + 1;
  const std::string instrument = field("instrument");
  try {
    if (instrument == "walk_cycle") {
      WalkCycleAnswers a;
      const std::string status = field("behavior_status");
      if (status == "never_contemplated") {
        a.behavior_status = BehaviorStatus::never_contemplated;
      } else if (status == "contemplated") {
        a.behavior_status = BehaviorStatus::contemplated;
      } else if (status == "uses_mode") {
        a.behavior_status = BehaviorStatus::uses_mode;
      } else {
        throw DataError("row " + std::to_string(line) + ", column 'behavior_status': unknown value '" + status + "'");
      }
      a.realistic = parse_yes_no(field("realistic"), line, "realistic");
      a.expect_near_future = parse_yes_no(field("expect_near_future"), line, "expect_near_future");
      const std::string d = field("duration");
      if (d == "under_one_year") {
        a.duration = UseDuration::under_one_year;
      } else if (d == "one_year_or_more") {
        a.duration = UseDuration::one_year_or_more;
      } else if (!d.empty()) {
        throw DataError("row " + std::to_string(line) + ", column 'duration': unknown value '" + d + "'");
      }
      return assign_stage_walk_cycle(a);
    }
    if (instrument == "bikeshare") {
      BikeshareAnswers a;
      const auto weekly = parse_yes_no(field("weekly_use_expected"), line, "weekly_use_expected");
      if (!weekly) throw IncompleteResponse("'weekly use' answer missing");
      a.weekly_use_expected = *weekly;
      a.would_contemplate = parse_yes_no(field("would_contemplate"), line, "would_contemplate");
      a.accessible = parse_yes_no(field("accessible"), line, "accessible");
      const std::string l = field("likelihood_6mo");
      if (!l.empty()) {
        double v = 0.0;
        if (!parse_double(l, v) || v != std::floor(v)) {
          throw DataError("row " + std::to_string(line) + ", column 'likelihood_6mo': expected 1-5, found '" + l + "'");
        }
        a.likelihood_6mo = static_cast<int>(v);
      }
      return assign_stage_bikeshare(a);
    }
  } catch (const IncompleteResponse& e) {
    throw IncompleteResponse("row " + std::to_string(line) + ": " + e.what());
  }
  throw DataError("row " + std::to_string(line) + ", column 'instrument': expected walk_cycle or bikeshare, found '" +
                  instrument + "'");
}

inline ParameterSet load_params(const RunConfig& cfg, const std::string& override_path) {
  const std::string path = override_path.empty() ? cfg.params_file : override_path;
  if (path.empty()) throw ConfigError("$.params_file: required for this command (or pass --params)");
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return params_from_json(j, cfg.require_model());
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

struct Overrides {
  std::string config;
  std::string input;
  std::string output;
  std::string params;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool strict = false;
};

inline RunConfig config_with_overrides(const Overrides& o, bool config_required) {
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config_file(o.config);
  } else if (config_required) {
    throw ConfigError("--config is required for this command");
  }
  if (!o.input.empty()) cfg.input = std::filesystem::absolute(o.input).lexically_normal().string();
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  set_thread_count(cfg.threads);
  return cfg;
}

inline int cmd_simulate(const Overrides& o, std::ostream& out) {
  RunConfig cfg = config_with_overrides(o, true);
  if (!cfg.simulate) throw ConfigError("$.simulate: required for the simulate command");
  if (!o.output.empty()) cfg.simulate->output = std::filesystem::absolute(o.output).lexically_normal().string();
  const auto table = sample_dataset(cfg.require_model(), cfg.simulate->params, cfg.simulate->n,
                                    cfg.simulate->covariates, cfg.seed);
  auto f = open_output(cfg.simulate->output);
  write_table_csv(f, table);
  out << "wrote " << table.n_rows() << " rows to " << cfg.simulate->output << '\n';
  return kExitOk;
}

inline int cmd_fit(const Overrides& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = config_with_overrides(o, true);
  if (!o.output.empty()) cfg.output_dir = std::filesystem::absolute(o.output).lexically_normal().string();
  const ModelSpec& spec = cfg.require_model();
  if (cfg.input.empty()) throw ConfigError("$.input: required for the fit command (or pass --input)");
  const auto loaded = load_table(cfg.input, spec);
  if (loaded.dropped > 0) err << "warning: " << loaded.dropped << " rows dropped (missing values)\n";
  const PreparedData data(spec, loaded.table);

  FitResult joint = fit(spec, data, cfg.fit);
  std::optional<LrTest> lr;
  bool all_converged = joint.converged;
  if (cfg.compare_independent && spec.n_equations() > 1 && !cfg.fit.independent) {
    FitOptions io = cfg.fit;
    io.independent = true;
    io.start.reset();
    const FitResult indep = fit(spec, data, io);
    all_converged = all_converged && indep.converged;
    // Restarting the joint search from the independent optimum keeps the
    // comparison nested when the first joint search stopped early.
    if (indep.ll > joint.ll) {
      FitOptions jo = cfg.fit;
      jo.start = indep.unconstrained;
      joint = fit(spec, data, jo);
      all_converged = joint.converged && indep.converged;
    }
    lr = lr_test_independence(joint, indep);
    write_json_file(in_dir(cfg.output_dir, "fit_independent.json"), fit_result_to_json(indep, spec));
  }

  write_json_file(in_dir(cfg.output_dir, "fit.json"), fit_result_to_json(joint, spec, lr));
  {
    auto f = open_output(in_dir(cfg.output_dir, "fit_summary.txt"));
    write_fit_summary(f, joint, lr);
  }
  write_json_file(in_dir(cfg.output_dir, "config.effective.json"), effective_config(cfg));
  write_fit_summary(out, joint, lr);
  if (!all_converged) {
    err << "warning: optimizer did not converge (" << joint.message << ")\n";
    if (o.strict) return kExitNumerical;
  }
  return kExitOk;
}

// Per-row marginal stage probabilities for every equation. Only covariate
// columns are required; rows with blanks are dropped.
inline int cmd_predict(const Overrides& o, std::ostream& out, std::ostream& err) {
  RunConfig cfg = config_with_overrides(o, true);
  const ModelSpec& spec = cfg.require_model();
  const ParameterSet params = load_params(cfg, o.params);
  if (cfg.input.empty()) throw ConfigError("$.input: required for the predict command (or pass --input)");
  const CsvDocument doc = read_csv_file(cfg.input);
  std::vector<std::string> covs;
  for (const auto& eq : spec.equations) {
    for (const auto& c : eq.covariates) {
      if (std::find(covs.begin(), covs.end(), c) == covs.end()) covs.push_back(c);
    }
  }
  std::vector<std::size_t> idx;
  for (const auto& c : covs) {
    const std::size_t i = doc.column_index(c);
    if (i == doc.header.size()) throw DataError("input lacks required column '" + c + "'");
    idx.push_back(i);
  }
  const std::string path = o.output.empty() ? in_dir(cfg.output_dir, "predictions.csv")
                                            : std::filesystem::absolute(o.output).lexically_normal().string();
  auto f = open_output(path);
  f << "row";
  for (const auto& eq : spec.equations) {
    for (int s = 0; s < eq.n_stages; ++s) f << ',' << csv_escape(eq.name + ":p" + std::to_string(s));
    f << ',' << csv_escape(eq.name + ":argmax");
  }
  f << '\n';
  std::size_t dropped = 0, written = 0;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    CovariateRow x;
    bool missing = false;
    for (std::size_t c = 0; c < covs.size(); ++c) {
      const std::string& v = doc.rows[r][idx[c]];
      if (is_missing(v)) {
        missing = true;
        break;
      }
      double d = 0.0;
      if (!parse_double(v, d)) {
        throw DataError("row " + std::to_string(r + 1) + ", column '" + covs[c] + "': cannot parse '" + v +
                        "' as a number");
      }
      x[covs[c]] = d;
    }
    if (missing) {
      ++dropped;
      continue;
    }
    f << r + 1;
    for (std::size_t e = 0; e < spec.n_equations(); ++e) {
      const auto probs = marginal_stage_probs(params, spec, x, e);
      for (double p : probs) f << ',' << format_double(p);
      f << ',' << argmax(probs);
    }
    f << '\n';
    ++written;
  }
  if (dropped > 0) err << "warning: " << dropped << " rows dropped (missing values)\n";
  out << "wrote " << written << " rows to " << path << '\n';
  return kExitOk;
}

inline int cmd_contour(const Overrides& o, std::ostream& out) {
  RunConfig cfg = config_with_overrides(o, true);
  if (!o.output.empty()) cfg.output_dir = std::filesystem::absolute(o.output).lexically_normal().string();
  const ModelSpec& spec = cfg.require_model();
  const ParameterSet params = load_params(cfg, o.params);
  if (cfg.contours.empty()) throw ConfigError("$.contours: the contour command needs at least one request");
  for (const auto& nc : cfg.contours) {
    const ContourGrid g = contour_grid(params, spec, nc.request);
    const std::string csv = in_dir(cfg.output_dir, nc.name + ".csv");
    {
      auto f = open_output(csv);
      write_contour_csv(f, g);
    }
    out << "wrote " << csv << '\n';
    if (nc.request.joint) {
      const std::string jcsv = in_dir(cfg.output_dir, nc.name + "_joint.csv");
      auto f = open_output(jcsv);
      write_contour_joint_csv(f, g);
      out << "wrote " << jcsv << '\n';
    }
    if (nc.svg) {
      for (std::size_t e = 0; e < g.equations.size(); ++e) {
        const std::string svg = in_dir(cfg.output_dir, nc.name + "_" + g.equations[e] + ".svg");
        auto f = open_output(svg);
        write_contour_svg(f, g, e);
        out << "wrote " << svg << '\n';
      }
    }
  }
  return kExitOk;
}

inline int cmd_stage(const Overrides& o, std::ostream& out) {
  RunConfig cfg = config_with_overrides(o, false);
  std::string input = cfg.staging ? cfg.staging->input : std::string();
  std::string output = cfg.staging ? cfg.staging->output : std::string();
  if (!o.input.empty()) input = cfg.input;
  if (!o.output.empty()) output = std::filesystem::absolute(o.output).lexically_normal().string();
  if (input.empty()) throw ConfigError("$.staging.input: required (or pass --input)");
  if (output.empty()) output = "stages.csv";
  const CsvDocument doc = read_csv_file(input);
  for (const char* col : {"id", "mode", "instrument"}) {
    if (doc.column_index(col) == doc.header.size()) throw DataError(std::string("input lacks required column '") + col + "'");
  }
  CsvDocument result;
  result.header = {"id", "mode", "label", "stage"};
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const std::string mode = doc.rows[r][doc.column_index("mode")];
    const StageLabel label = stage_row(doc, r);
    int stage = 0;
    try {
      stage = cfg.merge_map_for(mode).apply(label);
    } catch (const InputError& e) {
      throw DataError("row " + std::to_string(r + 1) + ", mode '" + mode + "': " + e.what());
    }
    result.rows.push_back({doc.rows[r][doc.column_index("id")], mode, std::string(to_string(label)),
                           std::to_string(stage)});
  }
  auto f = open_output(output);
  write_csv(f, result);
  out << "wrote " << result.rows.size() << " rows to " << output << '\n';
  return kExitOk;
}

// Appends sei and hhi columns to a trip diary whose mode columns hold
// frequency band labels.
inline int cmd_sei(const Overrides& o, const std::string& modes_flag, std::ostream& out) {
  RunConfig cfg = config_with_overrides(o, false);
  std::string input = cfg.diary ? cfg.diary->input : std::string();
  std::string output = cfg.diary ? cfg.diary->output : std::string();
  std::vector<std::string> modes = cfg.diary ? cfg.diary->modes : std::vector<std::string>{};
  if (!o.input.empty()) input = cfg.input;
  if (!o.output.empty()) output = std::filesystem::absolute(o.output).lexically_normal().string();
  if (!modes_flag.empty()) modes = split_names(modes_flag);
  if (input.empty()) throw ConfigError("$.diary.input: required (or pass --input)");
  if (modes.empty()) throw ConfigError("$.diary.modes: required (or pass --modes)");
  if (output.empty()) output = "diary_indices.csv";
  CsvDocument doc = read_csv_file(input);
  std::vector<std::size_t> idx;
  for (const auto& m : modes) {
    const std::size_t i = doc.column_index(m);
    if (i == doc.header.size()) throw DataError("diary lacks mode column '" + m + "'");
    idx.push_back(i);
  }
  doc.header.push_back("sei");
  doc.header.push_back("hhi");
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    std::vector<double> f;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      try {
        f.push_back(band_to_midpoint(doc.rows[r][idx[c]], cfg.band_midpoints));
      } catch (const InputError& e) {
        throw DataError("row " + std::to_string(r + 1) + ", column '" + modes[c] + "': " + e.what());
      }
    }
    const bool any = std::any_of(f.begin(), f.end(), [](double v) { return v > 0.0; });
    // Respondents with no trips at all have no defined index; leave blank.
    doc.rows[r].push_back(any ? format_double(sei(f)) : std::string());
    doc.rows[r].push_back(any ? format_double(hhi(f)) : std::string());
  }
  auto fout = open_output(output);
  write_csv(fout, doc);
  out << "wrote " << doc.rows.size() << " rows to " << output << '\n';
  return kExitOk;
}

inline int cmd_mvnprob(const std::string& lower_s, const std::string& upper_s, const std::string& rho_s,
                       std::ostream& out) {
  const auto upper = parse_number_list(upper_s, "--upper");
  const std::size_t d = upper.size();
  if (d < 1 || d > 3) throw InputError("--upper: expected 1 to 3 bounds");
  std::vector<double> lower = lower_s.empty() ? std::vector<double>(d, -kInf) : parse_number_list(lower_s, "--lower");
  if (lower.size() != d) throw InputError("--lower: expected " + std::to_string(d) + " bounds");
  const auto rho = rho_s.empty() ? std::vector<double>{} : parse_number_list(rho_s, "--rho");
  Corr3 r;
  if (d == 2) {
    if (rho.size() > 1) throw InputError("--rho: expected one correlation for two dimensions");
    if (rho.size() == 1) r.r12 = rho[0];
  } else if (d == 3) {
    if (!rho.empty() && rho.size() != 3) throw InputError("--rho: expected r12,r13,r23");
    if (rho.size() == 3) r = Corr3{rho[0], rho[1], rho[2]};
  } else if (!rho.empty()) {
    throw InputError("--rho: not used in one dimension");
  }
  if (!r.is_positive_definite()) throw InputError("--rho: correlation matrix is not positive definite");
  std::array<double, 3> lo{-kInf, -kInf, -kInf}, hi{kInf, kInf, kInf};
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = lower[i];
    hi[i] = upper[i];
  }
  out << format_double(rectangle_prob(lo, hi, r)) << '\n';
  return kExitOk;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multivariate ordered probit estimation and stage-of-change tooling", "mvop"};
  app.require_subcommand(1);
  detail::Overrides o;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string modes, lower, upper, rho;

  auto common = [&](CLI::App* sub, bool with_params) {
    sub->add_option("-c,--config", o.config, "JSON run configuration");
    sub->add_option("-i,--input", o.input, "input CSV (overrides the config)");
    sub->add_option("-o,--output", o.output, "output file or directory (overrides the config)");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
    if (with_params) sub->add_option("-p,--params", o.params, "parameter JSON (a fit result or a bare params block)");
  };
  auto* simulate = app.add_subcommand("simulate", "draw a synthetic dataset from known parameters");
  common(simulate, false);
  simulate->add_option("--seed", seed, "RNG seed (overrides the config)");
  auto* fit_cmd = app.add_subcommand("fit", "estimate a model by maximum likelihood");
  common(fit_cmd, false);
  fit_cmd->add_flag("--strict", o.strict, "exit with status 2 when the optimizer does not converge");
  auto* predict = app.add_subcommand("predict", "per-row marginal stage probabilities");
  common(predict, true);
  auto* contour = app.add_subcommand("contour", "two-covariate stage contour grids");
  common(contour, true);
  auto* stage = app.add_subcommand("stage", "assign stage-of-change labels to survey answers");
  common(stage, false);
  auto* sei_cmd = app.add_subcommand("sei", "append SEI and HHI columns to a trip diary");
  common(sei_cmd, false);
  sei_cmd->add_option("--modes", modes, "comma-separated mode columns");
  auto* mvn = app.add_subcommand("mvnprob", "evaluate one normal rectangle probability");
  mvn->add_option("--lower", lower, "comma-separated lower bounds (default -inf)");
  mvn->add_option("--upper", upper, "comma-separated upper bounds")->required();
  mvn->add_option("--rho", rho, "r12 or r12,r13,r23 (default 0)");

  std::vector<const char*> argv{"mvop"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  for (auto* sub : {simulate, fit_cmd, predict, contour, stage, sei_cmd}) {
    if (sub->parsed()) {
      if (sub->count("--threads")) o.threads = threads;
      if (sub == simulate && sub->count("--seed")) o.seed = seed;
    }
  }

  try {
    if (simulate->parsed()) return detail::cmd_simulate(o, out);
    if (fit_cmd->parsed()) return detail::cmd_fit(o, out, err);
    if (predict->parsed()) return detail::cmd_predict(o, out, err);
    if (contour->parsed()) return detail::cmd_contour(o, out);
    if (stage->parsed()) return detail::cmd_stage(o, out);
    if (sei_cmd->parsed()) return detail::cmd_sei(o, modes, out);
    if (mvn->parsed()) return detail::cmd_mvnprob(lower, upper, rho, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mvop
