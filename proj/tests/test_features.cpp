#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mvop/features.hpp"

using namespace mvop;

namespace {

WalkCycleAnswers wc(BehaviorStatus s, std::optional<bool> realistic = {}, std::optional<bool> expect = {},
                    std::optional<UseDuration> dur = {}) {
  return WalkCycleAnswers{s, realistic, expect, dur};
}

BikeshareAnswers bs(bool weekly, std::optional<bool> contemplate = {}, std::optional<bool> access = {},
                    std::optional<int> likert = {}) {
  return BikeshareAnswers{weekly, contemplate, access, likert};
}

// Straight transcription of the index formula, including the M/f_i ratio
// the library rearranges, as an independent check.
double sei_direct(const std::vector<double>& f) {
  const double m = *std::max_element(f.begin(), f.end());
  const double n = static_cast<double>(f.size());
  double s = 0.0;
  for (double x : f) {
    if (x > 0.0) s += x / (n * m) * (1.0 + std::log(m / x));
  }
  return s;
}

}  // namespace

TEST(StagingWalkCycle, EveryLeaf) {
  using B = BehaviorStatus;
  EXPECT_EQ(assign_stage_walk_cycle(wc(B::never_contemplated, false)), StageLabel::PC1);
  EXPECT_EQ(assign_stage_walk_cycle(wc(B::never_contemplated, true)), StageLabel::PC2);
  EXPECT_EQ(assign_stage_walk_cycle(wc(B::contemplated, {}, false)), StageLabel::C);
  EXPECT_EQ(assign_stage_walk_cycle(wc(B::contemplated, {}, true)), StageLabel::P);
  EXPECT_EQ(assign_stage_walk_cycle(wc(B::uses_mode, {}, {}, UseDuration::under_one_year)), StageLabel::A);
  EXPECT_EQ(assign_stage_walk_cycle(wc(B::uses_mode, {}, {}, UseDuration::one_year_or_more)), StageLabel::M);
}

TEST(StagingWalkCycle, MissingOrExtraFollowUps) {
  using B = BehaviorStatus;
  EXPECT_THROW(assign_stage_walk_cycle(wc(B::never_contemplated)), IncompleteResponse);
  EXPECT_THROW(assign_stage_walk_cycle(wc(B::contemplated)), IncompleteResponse);
  EXPECT_THROW(assign_stage_walk_cycle(wc(B::uses_mode)), IncompleteResponse);
  EXPECT_THROW(assign_stage_walk_cycle(wc(B::never_contemplated, true, true)), IncompleteResponse);
  EXPECT_THROW(assign_stage_walk_cycle(wc(B::contemplated, false, true)), IncompleteResponse);
  EXPECT_THROW(assign_stage_walk_cycle(wc(B::uses_mode, {}, true, UseDuration::under_one_year)), IncompleteResponse);
}

TEST(StagingBikeshare, EveryPath) {
  EXPECT_EQ(assign_stage_bikeshare(bs(true)), StageLabel::AM);
  EXPECT_EQ(assign_stage_bikeshare(bs(false, false)), StageLabel::PC);
  for (int l = 1; l <= 5; ++l) {
    const bool prep = l >= 3;
    EXPECT_EQ(assign_stage_bikeshare(bs(false, true, false, l)), prep ? StageLabel::P1 : StageLabel::C1) << l;
    EXPECT_EQ(assign_stage_bikeshare(bs(false, true, true, l)), prep ? StageLabel::P2 : StageLabel::C2) << l;
  }
}

TEST(StagingBikeshare, MissingOrExtraFollowUps) {
  EXPECT_THROW(assign_stage_bikeshare(bs(false)), IncompleteResponse);
  EXPECT_THROW(assign_stage_bikeshare(bs(false, true)), IncompleteResponse);
  EXPECT_THROW(assign_stage_bikeshare(bs(false, true, true)), IncompleteResponse);
  EXPECT_THROW(assign_stage_bikeshare(bs(false, true, {}, 3)), IncompleteResponse);
  EXPECT_THROW(assign_stage_bikeshare(bs(false, true, true, 0)), IncompleteResponse);
  EXPECT_THROW(assign_stage_bikeshare(bs(false, true, true, 6)), IncompleteResponse);
  EXPECT_THROW(assign_stage_bikeshare(bs(true, true)), IncompleteResponse);
  EXPECT_THROW(assign_stage_bikeshare(bs(false, false, true)), IncompleteResponse);
}

TEST(StageLabels, StringRoundTrip) {
  for (StageLabel l : kAllStageLabels) EXPECT_EQ(stage_label_from_string(to_string(l)), l);
  EXPECT_THROW(stage_label_from_string("PC3"), InputError);
}

TEST(MergeMap, DefaultFourStage) {
  const auto m = merge_presets::four_stage();
  EXPECT_EQ(m.n_stages(), 4);
  EXPECT_EQ(merge_stages(StageLabel::PC2, m), 0);
  EXPECT_EQ(merge_stages(StageLabel::PC1, m), 0);
  EXPECT_EQ(merge_stages(StageLabel::C2, m), 1);
  EXPECT_EQ(merge_stages(StageLabel::P1, m), 2);
  EXPECT_EQ(merge_stages(StageLabel::AM, m), 3);
  EXPECT_EQ(merge_stages(StageLabel::M, m), 3);
}

TEST(MergeMap, CustomThreeStage) {
  const MergeMap m({{StageLabel::PC, 0}, {StageLabel::C, 1}, {StageLabel::P, 1}, {StageLabel::AM, 2}});
  EXPECT_EQ(m.n_stages(), 3);
  EXPECT_EQ(merge_stages(StageLabel::P, m), 1);
  EXPECT_EQ(merge_stages(StageLabel::C, m), 1);
  EXPECT_THROW(merge_stages(StageLabel::PC1, m), InputError);
}

TEST(MergeMap, PresetsForTheAmbiguousThreeStageReading) {
  const auto pc_c = merge_presets::three_stage_merge_pc_c();
  const auto c_p = merge_presets::three_stage_merge_c_p();
  EXPECT_EQ(pc_c.n_stages(), 3);
  EXPECT_EQ(c_p.n_stages(), 3);
  EXPECT_EQ(merge_stages(StageLabel::C, pc_c), 0);
  EXPECT_EQ(merge_stages(StageLabel::P, pc_c), 1);
  EXPECT_EQ(merge_stages(StageLabel::C, c_p), 1);
  EXPECT_EQ(merge_stages(StageLabel::P, c_p), 1);
  EXPECT_EQ(merge_stages(StageLabel::M, c_p), 2);
  for (const auto& name : merge_presets::names()) EXPECT_NO_THROW(merge_presets::by_name(name));
  EXPECT_THROW(merge_presets::by_name("five_stage"), InputError);
}

TEST(MergeMap, IdentityMapsGiveOwnIndex) {
  const std::vector<StageLabel> wc_order{StageLabel::PC1, StageLabel::PC2, StageLabel::C,
                                         StageLabel::P,   StageLabel::A,   StageLabel::M};
  const std::vector<StageLabel> bs_order{StageLabel::PC, StageLabel::C1, StageLabel::C2,
                                         StageLabel::P1, StageLabel::P2, StageLabel::AM};
  const auto iw = merge_presets::identity_walk_cycle();
  const auto ib = merge_presets::identity_bikeshare();
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(merge_stages(wc_order[static_cast<std::size_t>(i)], iw), i);
    EXPECT_EQ(merge_stages(bs_order[static_cast<std::size_t>(i)], ib), i);
  }
  EXPECT_EQ(iw.n_stages(), 6);
}

TEST(MergeMap, Validation) {
  try {
    MergeMap({{StageLabel::C, 1}, {StageLabel::P, 0}});
    FAIL() << "order violation accepted";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("C->1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("P->0"), std::string::npos) << msg;
  }
  EXPECT_THROW(MergeMap({{StageLabel::PC, 0}, {StageLabel::AM, 2}}), InputError);
  EXPECT_THROW(MergeMap({{StageLabel::PC, 0}, {StageLabel::PC, 0}}), InputError);
  EXPECT_THROW(MergeMap({{StageLabel::PC, -1}}), InputError);
  EXPECT_THROW(MergeMap(std::vector<std::pair<StageLabel, int>>{}), InputError);
  // Sub-stages that share a canonical rank may go either way.
  EXPECT_NO_THROW(MergeMap({{StageLabel::C2, 0}, {StageLabel::C1, 1}}));
}

TEST(Bands, DefaultMidpoints) {
  const auto m = default_band_midpoints();
  EXPECT_EQ(band_to_midpoint("0", m), 0.0);
  EXPECT_EQ(band_to_midpoint("1–2", m), 1.5);
  EXPECT_EQ(band_to_midpoint("1-2", m), 1.5);
  EXPECT_EQ(band_to_midpoint("3—4", m), 3.5);
  EXPECT_EQ(band_to_midpoint("7+", m), 8.0);
  EXPECT_THROW(band_to_midpoint("8-9", m), InputError);
  EXPECT_THROW(band_to_midpoint("", m), InputError);
}

TEST(Bands, CustomOverride) {
  BandMap m = default_band_midpoints();
  m["7+"] = 10.0;
  m["rarely"] = 0.25;
  EXPECT_EQ(band_to_midpoint("7+", m), 10.0);
  EXPECT_EQ(band_to_midpoint("rarely", m), 0.25);
}

TEST(Sei, Examples) {
  for (double m : {1e-3, 1.0, 7.0, 1e6}) EXPECT_NEAR(sei(std::vector<double>{m, m}), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(sei(std::vector<double>{4.0, 0, 0, 0, 0, 0, 0, 0}), 0.125);
  EXPECT_NEAR(sei(std::vector<double>{3.0, 3.0 / std::numbers::e}), 0.5 + 1.0 / std::numbers::e, 1e-15);
}

TEST(Sei, AllEqualIsOne) {
  for (std::size_t n = 1; n <= 10; ++n) EXPECT_NEAR(sei(std::vector<double>(n, 2.5)), 1.0, 1e-15) << n;
}

TEST(Sei, Errors) {
  EXPECT_THROW(sei(std::vector<double>(5, 0.0)), InputError);
  EXPECT_THROW(sei(std::vector<double>{}), InputError);
  EXPECT_THROW(sei(std::vector<double>{1.0, -1.0}), InputError);
  EXPECT_THROW(sei(std::vector<double>{1.0, std::nan("")}), InputError);
  EXPECT_THROW(sei(std::vector<double>{1.0, INFINITY}), InputError);
}

TEST(Sei, PropertiesOnRandomVectors) {
  std::mt19937_64 g(2024);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_real_distribution<double> u(0.0, 10.0), scale(1e-3, 1e3);
  std::bernoulli_distribution zero(0.25);
  for (int it = 0; it < 1000; ++it) {
    std::vector<double> f(static_cast<std::size_t>(len(g)));
    for (auto& x : f) x = zero(g) ? 0.0 : u(g);
    f[0] = std::max(f[0], 0.1);
    const double s = sei(f);
    EXPECT_NEAR(s, sei_direct(f), 1e-12);
    const double n = static_cast<double>(f.size());
    EXPECT_GE(s, 1.0 / n - 1e-15);
    EXPECT_LE(s, 1.0 + 1e-12);
    const double c = scale(g);
    std::vector<double> cf(f);
    for (auto& x : cf) x *= c;
    EXPECT_NEAR(sei(cf), s, 1e-12);
    std::vector<double> pf(f);
    std::shuffle(pf.begin(), pf.end(), g);
    EXPECT_NEAR(sei(pf), s, 1e-15);
  }
}

TEST(Hhi, Examples) {
  EXPECT_DOUBLE_EQ(hhi(std::vector<double>{3.0, 1.0}), 0.625);
  EXPECT_DOUBLE_EQ(hhi(std::vector<double>{0.0, 5.0, 0.0}), 1.0);
  for (std::size_t n = 1; n <= 8; ++n) EXPECT_NEAR(hhi(std::vector<double>(n, 1.5)), 1.0 / n, 1e-15);
  EXPECT_THROW(hhi(std::vector<double>{0.0, 0.0}), InputError);
  EXPECT_THROW(hhi(std::vector<double>{}), InputError);
}

TEST(Hhi, Bounds) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int it = 0; it < 200; ++it) {
    std::vector<double> f(6);
    for (auto& x : f) x = u(g);
    const double h = hhi(f);
    EXPECT_GE(h, 1.0 / 6 - 1e-15);
    EXPECT_LE(h, 1.0 + 1e-15);
  }
}
