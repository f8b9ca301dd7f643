#pragma once

// Stage-of-change staging rules, stage merging, trip-frequency band
// conversion and the multimodality indices (SEI, HHI).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvop/error.hpp"

namespace mvop {

enum class StageLabel { PC1, PC2, PC, C, C1, C2, P, P1, P2, A, M, AM };

inline constexpr std::array<StageLabel, 12> kAllStageLabels{
    StageLabel::PC1, StageLabel::PC2, StageLabel::PC, StageLabel::C,  StageLabel::C1, StageLabel::C2,
    StageLabel::P,   StageLabel::P1,  StageLabel::P2, StageLabel::A,  StageLabel::M,  StageLabel::AM};

inline std::string_view to_string(StageLabel s) {
  switch (s) {
    case StageLabel::PC1: return "PC1";
    case StageLabel::PC2: return "PC2";
    case StageLabel::PC: return "PC";
    case StageLabel::C: return "C";
    case StageLabel::C1: return "C1";
    case StageLabel::C2: return "C2";
    case StageLabel::P: return "P";
    case StageLabel::P1: return "P1";
    case StageLabel::P2: return "P2";
    case StageLabel::A: return "A";
    case StageLabel::M: return "M";
    case StageLabel::AM: return "AM";
  }
  return "?";
}

inline StageLabel stage_label_from_string(std::string_view s) {
  for (StageLabel l : kAllStageLabels) {
    if (to_string(l) == s) return l;
  }
  throw InputError("unknown stage label '" + std::string(s) + "'");
}

// Position in the canonical order PC < C < P < A/M. Labels sharing a rank
// differ only by sub-stage or access and carry no order between them.
inline int canonical_rank(StageLabel s) {
  switch (s) {
    case StageLabel::PC1:
    case StageLabel::PC2:
    case StageLabel::PC:
      return 0;
    case StageLabel::C:
    case StageLabel::C1:
    case StageLabel::C2:
      return 1;
    case StageLabel::P:
    case StageLabel::P1:
    case StageLabel::P2:
      return 2;
    case StageLabel::A:
    case StageLabel::M:
    case StageLabel::AM:
      return 3;
  }
  return -1;
}

// ---------------------------------------------------------------------------
// Staging

enum class BehaviorStatus { never_contemplated, contemplated, uses_mode };
enum class UseDuration { under_one_year, one_year_or_more };

struct WalkCycleAnswers {
  BehaviorStatus behavior_status = BehaviorStatus::never_contemplated;
  std::optional<bool> realistic;
  std::optional<bool> expect_near_future;
  std::optional<UseDuration> duration;
};

struct BikeshareAnswers {
  bool weekly_use_expected = false;
  std::optional<bool> would_contemplate;
  std::optional<bool> accessible;
  std::optional<int> likelihood_6mo;  // 1-5 Likert
};

// Routing for walking and cycling: the behaviour question selects exactly
// one follow-up, and that follow-up decides the stage.
inline StageLabel assign_stage_walk_cycle(const WalkCycleAnswers& a) {
  switch (a.behavior_status) {
    case BehaviorStatus::never_contemplated:
      if (!a.realistic) throw IncompleteResponse("never contemplated: 'realistic alternative' answer missing");
      if (a.expect_near_future || a.duration) {
        throw IncompleteResponse("never contemplated: unexpected follow-up answers");
      }
      return *a.realistic ? StageLabel::PC2 : StageLabel::PC1;
    case BehaviorStatus::contemplated:
      if (!a.expect_near_future) throw IncompleteResponse("contemplated: 'near future' answer missing");
      if (a.realistic || a.duration) throw IncompleteResponse("contemplated: unexpected follow-up answers");
      return *a.expect_near_future ? StageLabel::P : StageLabel::C;
    case BehaviorStatus::uses_mode:
      if (!a.duration) throw IncompleteResponse("uses mode: duration answer missing");
      if (a.realistic || a.expect_near_future) throw IncompleteResponse("uses mode: unexpected follow-up answers");
      return *a.duration == UseDuration::under_one_year ? StageLabel::A : StageLabel::M;
  }
  throw IncompleteResponse("unknown behaviour status");
}

inline StageLabel assign_stage_bikeshare(const BikeshareAnswers& a) {
  if (a.weekly_use_expected) {
    if (a.would_contemplate || a.accessible || a.likelihood_6mo) {
      throw IncompleteResponse("weekly use expected: unexpected follow-up answers");
    }
    return StageLabel::AM;
  }
  if (!a.would_contemplate) throw IncompleteResponse("'would contemplate' answer missing");
  if (!*a.would_contemplate) {
    if (a.accessible || a.likelihood_6mo) throw IncompleteResponse("never contemplating: unexpected follow-up answers");
    return StageLabel::PC;
  }
  if (!a.accessible) throw IncompleteResponse("'accessible' answer missing");
  if (!a.likelihood_6mo) throw IncompleteResponse("six-month likelihood answer missing");
  const int l = *a.likelihood_6mo;
  if (l < 1 || l > 5) throw IncompleteResponse("six-month likelihood must be on the 1-5 scale");
  if (l <= 2) return *a.accessible ? StageLabel::C2 : StageLabel::C1;
  return *a.accessible ? StageLabel::P2 : StageLabel::P1;
}

// ---------------------------------------------------------------------------
// Merging fine labels into model ordinals

class MergeMap {
 public:
  MergeMap() = default;

  // Validates surjectivity onto 0..max and order preservation; the error
  // names the first offending pair.
  explicit MergeMap(std::vector<std::pair<StageLabel, int>> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw InputError("merge map is empty");
    int max_ord = -1;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].second < 0) throw InputError("merge map ordinal must be non-negative");
      for (std::size_t j = 0; j < i; ++j) {
        if (entries_[j].first == entries_[i].first) {
          throw InputError("merge map lists " + std::string(to_string(entries_[i].first)) + " twice");
        }
      }
      max_ord = std::max(max_ord, entries_[i].second);
    }
    for (int o = 0; o <= max_ord; ++o) {
      const bool hit = std::any_of(entries_.begin(), entries_.end(), [o](const auto& e) { return e.second == o; });
      if (!hit) throw InputError("merge map skips ordinal " + std::to_string(o));
    }
    for (const auto& [la, oa] : entries_) {
      for (const auto& [lb, ob] : entries_) {
        if (canonical_rank(la) < canonical_rank(lb) && oa > ob) {
          throw InputError("merge map breaks stage order: " + std::string(to_string(la)) + "->" +
                           std::to_string(oa) + " but " + std::string(to_string(lb)) + "->" + std::to_string(ob));
        }
      }
    }
    n_stages_ = max_ord + 1;
  }

  int n_stages() const { return n_stages_; }
  const std::vector<std::pair<StageLabel, int>>& entries() const { return entries_; }

  int apply(StageLabel s) const {
    for (const auto& [l, o] : entries_) {
      if (l == s) return o;
    }
    throw InputError("stage label " + std::string(to_string(s)) + " is not covered by the merge map");
  }

 private:
  std::vector<std::pair<StageLabel, int>> entries_;
  int n_stages_ = 0;
};

inline int merge_stages(StageLabel s, const MergeMap& m) { return m.apply(s); }

namespace merge_presets {

// {PC1,PC2,PC} -> 0, {C,C1,C2} -> 1, {P,P1,P2} -> 2, {A,M,AM} -> 3.
inline MergeMap four_stage() {
  std::vector<std::pair<StageLabel, int>> e;
  for (StageLabel l : kAllStageLabels) e.emplace_back(l, canonical_rank(l));
  return MergeMap(std::move(e));
}

// Three stages, precontemplation and contemplation combined.
inline MergeMap three_stage_merge_pc_c() {
  std::vector<std::pair<StageLabel, int>> e;
  for (StageLabel l : kAllStageLabels) e.emplace_back(l, std::max(0, canonical_rank(l) - 1));
  return MergeMap(std::move(e));
}

// Three stages, contemplation and preparation combined.
inline MergeMap three_stage_merge_c_p() {
  std::vector<std::pair<StageLabel, int>> e;
  for (StageLabel l : kAllStageLabels) {
    const int r = canonical_rank(l);
    e.emplace_back(l, r <= 1 ? r : r - 1);
  }
  return MergeMap(std::move(e));
}

// Six fine walking/cycling stages in their own order.
inline MergeMap identity_walk_cycle() {
  return MergeMap({{StageLabel::PC1, 0}, {StageLabel::PC2, 1}, {StageLabel::C, 2},
                   {StageLabel::P, 3},   {StageLabel::A, 4},   {StageLabel::M, 5}});
}

// Six fine bikesharing stages in their own order.
inline MergeMap identity_bikeshare() {
  return MergeMap({{StageLabel::PC, 0}, {StageLabel::C1, 1}, {StageLabel::C2, 2},
                   {StageLabel::P1, 3}, {StageLabel::P2, 4}, {StageLabel::AM, 5}});
}

inline MergeMap by_name(const std::string& name) {
  if (name == "four_stage") return four_stage();
  if (name == "three_stage_merge_pc_c") return three_stage_merge_pc_c();
  if (name == "three_stage_merge_c_p") return three_stage_merge_c_p();
  if (name == "identity_walk_cycle") return identity_walk_cycle();
  if (name == "identity_bikeshare") return identity_bikeshare();
  throw InputError("unknown merge preset '" + name + "'");
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n{"four_stage", "three_stage_merge_pc_c", "three_stage_merge_c_p",
                                          "identity_walk_cycle", "identity_bikeshare"};
  return n;
}

}  // namespace merge_presets

// ---------------------------------------------------------------------------
// Trip frequencies and multimodality

using BandMap = std::map<std::string, double>;

// Weekly trip counts assigned to each frequency band (band midpoints).
inline BandMap default_band_midpoints() {
  return {{"0", 0.0}, {"1-2", 1.5}, {"3-4", 3.5}, {"5-6", 5.5}, {"7+", 8.0}};
}

// En and em dashes in band labels are read as ASCII hyphens.
inline std::string normalize_band(std::string_view band) {
  std::string out;
  for (std::size_t i = 0; i < band.size(); ++i) {
    if (i + 2 < band.size() + 0 && static_cast<unsigned char>(band[i]) == 0xE2 &&
        static_cast<unsigned char>(band[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(band[i + 2]) == 0x93 || static_cast<unsigned char>(band[i + 2]) == 0x94)) {
      out.push_back('-');
      i += 2;
    } else {
      out.push_back(band[i]);
    }
  }
  return out;
}

inline double band_to_midpoint(std::string_view band, const BandMap& map) {
  const auto it = map.find(normalize_band(band));
  if (it == map.end()) throw InputError("unknown frequency band '" + std::string(band) + "'");
  return it->second;
}

// Modified Shannon entropy index
//   SEI = sum_i f_i / (n M) * (1 + ln(M / f_i)),  M = max_i f_i,
// with zero-frequency modes contributing nothing.
inline double sei(std::span<const double> f) {
  if (f.empty()) throw InputError("SEI needs at least one mode");
  double m = 0.0;
  for (double x : f) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("trip frequencies must be finite and non-negative");
    m = std::max(m, x);
  }
  if (m == 0.0) throw InputError("SEI is undefined when no mode is used");
  const double n = static_cast<double>(f.size());
  double s = 0.0;
  for (double x : f) {
    if (x == 0.0) continue;
    const double share = x / m;
    s += share * (1.0 - std::log(share));
  }
  return s / n;
}

// Herfindahl-Hirschman index of mode shares.
inline double hhi(std::span<const double> f) {
  double total = 0.0;
  for (double x : f) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InputError("trip frequencies must be finite and non-negative");
    total += x;
  }
  if (!(total > 0.0)) throw InputError("HHI is undefined when no mode is used");
  double s = 0.0;
  for (double x : f) s += (x / total) * (x / total);
  return s;
}

}  // namespace mvop
