#pragma once

// Serialization of fit results and contour grids: JSON, aligned text,
// long-format CSV and SVG heat maps.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mvop/config.hpp"
#include "mvop/csv.hpp"
#include "mvop/estimate.hpp"
#include "mvop/predict.hpp"

namespace mvop {

namespace detail {

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace detail

inline Json fit_result_to_json(const FitResult& r, const ModelSpec& spec, const std::optional<LrTest>& lr = {}) {
  Json params = Json::array();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    params.push_back(Json{{"name", r.names[i]},
                          {"estimate", r.estimates[i]},
                          {"std_error", i < r.std_errors.size() ? detail::optional_number(r.std_errors[i]) : Json(nullptr)},
                          {"z", i < r.z_values.size() ? detail::optional_number(r.z_values[i]) : Json(nullptr)},
                          {"p", i < r.p_values.size() ? detail::optional_number(r.p_values[i]) : Json(nullptr)}});
  }
  Json j{{"model", detail::model_to_json(spec)},
         {"independent", r.independent},
         {"converged", r.converged},
         {"iterations", r.iterations},
         {"message", r.message},
         {"n", r.n},
         {"k", r.k},
         {"loglik", r.ll},
         {"loglik_null", r.ll_null},
         {"rho2", r.rho2},
         {"aic", r.aic},
         {"bic", r.bic},
         {"singular_information", r.singular_information},
         {"parameters", params},
         {"params", detail::params_to_json(r.params, spec)},
         {"unconstrained", r.unconstrained}};
  if (lr) j["independence_test"] = Json{{"stat", lr->stat}, {"df", lr->df}, {"p", lr->p}};
  return j;
}

// Reads a ParameterSet either from a bare {beta, thresholds, corr} object or
// from a fit result document holding one under "params".
inline ParameterSet params_from_json(const Json& j, const ModelSpec& spec) {
  if (j.is_object() && j.contains("params")) return detail::parse_params(j.at("params"), "$.params", spec);
  return detail::parse_params(j, "$", spec);
}

namespace detail {

inline std::string fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

inline std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

inline void write_fit_summary(std::ostream& out, const FitResult& r, const std::optional<LrTest>& lr = {}) {
  using detail::fixed;
  using detail::pad_left;
  using detail::pad_right;
  std::size_t name_w = 9;
  for (const auto& n : r.names) name_w = std::max(name_w, n.size());
  auto opt = [](const std::optional<double>& v, int prec) { return v ? fixed(*v, prec) : std::string("-"); };

  out << (r.independent ? "Independent" : "Joint") << " ordered probit, " << r.params.beta.size()
      << (r.params.beta.size() == 1 ? " equation\n\n" : " equations\n\n");
  out << pad_right("parameter", name_w) << pad_left("estimate", 12) << pad_left("std.err", 12) << pad_left("z", 10)
      << pad_left("p", 9) << '\n';
  out << std::string(name_w + 43, '-') << '\n';
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    out << pad_right(r.names[i], name_w) << pad_left(fixed(r.estimates[i], 4), 12)
        << pad_left(opt(r.std_errors[i], 4), 12) << pad_left(opt(r.z_values[i], 2), 10)
        << pad_left(opt(r.p_values[i], 3), 9) << '\n';
  }
  out << std::string(name_w + 43, '-') << '\n';
  out << "n            " << r.n << '\n';
  out << "k            " << r.k << '\n';
  out << "LL           " << fixed(r.ll, 2) << '\n';
  out << "LL0          " << fixed(r.ll_null, 2) << '\n';
  out << "rho2         " << fixed(r.rho2, 3) << '\n';
  out << "AIC          " << fixed(r.aic, 2) << '\n';
  out << "BIC          " << fixed(r.bic, 2) << '\n';
  out << "converged    " << (r.converged ? "yes" : "no") << " (" << r.iterations << " iterations; " << r.message
      << ")\n";
  if (r.singular_information) out << "warning      observed information is singular; some SEs are absent\n";
  if (lr) {
    out << "LR test R=I  stat " << fixed(lr->stat, 2) << ", df " << lr->df << ", p " << fixed(lr->p, 4) << '\n';
  }
}

// One line per (cell, equation, stage).
inline void write_contour_csv(std::ostream& out, const ContourGrid& g) {
  out << csv_escape(g.var_a) << ',' << csv_escape(g.var_b) << ",equation,stage,probability,is_argmax\n";
  for (const auto& c : g.cells) {
    for (std::size_t e = 0; e < g.equations.size(); ++e) {
      for (std::size_t s = 0; s < c.probs[e].size(); ++s) {
        out << format_double(c.a) << ',' << format_double(c.b) << ',' << csv_escape(g.equations[e]) << ',' << s
            << ',' << format_double(c.probs[e][s]) << ',' << (static_cast<int>(s) == c.argmax[e] ? 1 : 0) << '\n';
      }
    }
  }
}

// Most likely stage combination per cell; only meaningful for joint grids.
inline void write_contour_joint_csv(std::ostream& out, const ContourGrid& g) {
  out << csv_escape(g.var_a) << ',' << csv_escape(g.var_b);
  for (const auto& e : g.equations) out << ',' << csv_escape(e);
  out << ",probability\n";
  for (const auto& c : g.cells) {
    if (!c.joint_argmax) throw InputError("contour grid was built without joint output");
    out << format_double(c.a) << ',' << format_double(c.b);
    for (std::size_t e = 0; e < g.equations.size(); ++e) out << ',' << (*c.joint_argmax)[e];
    out << ',' << format_double(c.joint_probability) << '\n';
  }
}

inline constexpr std::array<const char*, 4> kStagePalette{"#d7191c", "#fdae61", "#a6d96a", "#1a9641"};

// Flat cells coloured by argmax stage; var_a runs left to right, var_b
// bottom to top. Stages past the fourth reuse the last colour.
inline void write_contour_svg(std::ostream& out, const ContourGrid& g, std::size_t eq) {
  if (eq >= g.equations.size()) throw InputError("unknown equation index " + std::to_string(eq));
  const std::size_t na = g.axis_a.size(), nb = g.axis_b.size();
  const int cell = std::max(2, 400 / static_cast<int>(std::max(na, nb)));
  const int margin = 50;
  const int w = cell * static_cast<int>(na), h = cell * static_cast<int>(nb);
  const int n_stages = g.n_stages[eq];
  const int legend_h = 20 * n_stages;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + 2 * margin + 120 << "\" height=\""
      << std::max(h, legend_h) + 2 * margin << "\">\n";
  out << "<title>" << g.equations[eq] << ": most likely stage</title>\n";
  out << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t ia = 0; ia < na; ++ia) {
    for (std::size_t ib = 0; ib < nb; ++ib) {
      const int s = g.cell(ia, ib).argmax[eq];
      const char* colour = kStagePalette[static_cast<std::size_t>(std::min(s, 3))];
      out << "<rect x=\"" << margin + cell * static_cast<int>(ia) << "\" y=\""
          << margin + cell * static_cast<int>(nb - 1 - ib) << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"" << colour << "\"/>\n";
    }
  }
  out << "</g>\n";
  const int ax_y = margin + h + 18;
  out << "<text x=\"" << margin << "\" y=\"" << ax_y << "\" font-size=\"11\">" << format_double(g.axis_a.front())
      << "</text>\n";
  out << "<text x=\"" << margin + w << "\" y=\"" << ax_y << "\" font-size=\"11\" text-anchor=\"end\">"
      << format_double(g.axis_a.back()) << "</text>\n";
  out << "<text x=\"" << margin + w / 2 << "\" y=\"" << ax_y + 16 << "\" font-size=\"12\" text-anchor=\"middle\">"
      << g.var_a << "</text>\n";
  out << "<text x=\"" << margin - 6 << "\" y=\"" << margin + h << "\" font-size=\"11\" text-anchor=\"end\">"
      << format_double(g.axis_b.front()) << "</text>\n";
  out << "<text x=\"" << margin - 6 << "\" y=\"" << margin + 10 << "\" font-size=\"11\" text-anchor=\"end\">"
      << format_double(g.axis_b.back()) << "</text>\n";
  out << "<text x=\"14\" y=\"" << margin + h / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << margin + h / 2 << ")\">" << g.var_b << "</text>\n";
  for (int s = 0; s < n_stages; ++s) {
    const int ly = margin + 20 * s;
    out << "<rect x=\"" << margin + w + 20 << "\" y=\"" << ly << "\" width=\"14\" height=\"14\" fill=\""
        << kStagePalette[static_cast<std::size_t>(std::min(s, 3))] << "\"/>\n";
    out << "<text x=\"" << margin + w + 40 << "\" y=\"" << ly + 11 << "\" font-size=\"11\">stage " << s
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace mvop
