#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "reference_ops.hpp"
#include "test_util.hpp"
#include "vabokeh/optics.hpp"
#include "vabokeh/pipeline.hpp"

using namespace vabokeh;

TEST(Aperture, Definition) {
  EXPECT_EQ(aperture_diameter(50, 2), 25.0);
  EXPECT_NEAR(aperture_diameter(50, 1.8), 27.7778, 1e-4);
  EXPECT_EQ(kDefaultFocalLengthMm, 50.0);
  EXPECT_THROW(aperture_diameter(0, 2), ArgumentError);
  EXPECT_THROW(aperture_diameter(50, -1), ArgumentError);
}

TEST(Coc, ZeroAtFocus) {
  for (double focus : {60.0, 500.0, 2000.0, 1e5}) {
    for (double n : {1.2, 1.8, 8.0, 22.0}) {
      EXPECT_EQ(coc_diameter({50, n, focus}, focus), 0.0);
    }
  }
}

TEST(Coc, WorkedCaseMatchesDirectEvaluation) {
  const double expect = (27.7777777777777778 / 2.0) * (50.0 / 4000.0) * (2000.0 / 1950.0);
  EXPECT_NEAR(coc_diameter({50, 1.8, 2000}, 4000), expect, 1e-12);
  EXPECT_NEAR(coc_diameter({50, 1.8, 2000}, 4000), ref::coc_mm(50, 1.8, 2000, 4000), 1e-12);
}

TEST(Coc, ApertureRatioIsExact) {
  const double wide = coc_diameter({50, 1.8, 2000}, 4000);
  const double narrow = coc_diameter({50, 8.0, 2000}, 4000);
  EXPECT_NEAR(narrow / wide, 0.225, 1e-15);
}

TEST(Coc, SingularityWhenFocusEqualsFocalLength) {
  EXPECT_THROW(coc_diameter({50, 1.8, 50}, 1000), SingularityError);
  EXPECT_THROW(coc_diameter({50, 1.8, 2000}, 0), ArgumentError);
}

TEST(Coc, StrictlyDecreasingInFNumber) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double focus = testutil::uniform(rng, 100, 50000);
    double d = testutil::uniform(rng, 100, 50000);
    if (d == focus) d += 1.0;
    double prev = coc_diameter({50, 1.0, focus}, d);
    for (double n = 1.4; n < 32; n *= 1.4) {
      const double r = coc_diameter({50, n, focus}, d);
      EXPECT_LT(r, prev);
      prev = r;
    }
  }
}

TEST(Coc, PiecewiseMonotoneAroundFocus) {
  const LensParams lens{50, 2.8, 3000};
  double prev = coc_diameter(lens, 200);
  for (double d = 250; d < 3000; d += 50) {
    const double r = coc_diameter(lens, d);
    EXPECT_LT(r, prev);
    prev = r;
  }
  prev = 0.0;
  for (double d = 3050; d < 100000; d *= 1.1) {
    const double r = coc_diameter(lens, d);
    EXPECT_GT(r, prev);
    prev = r;
  }
  // Continuity at the focus.
  EXPECT_LT(coc_diameter(lens, 3000 * (1 + 1e-9)), 1e-9);
}

TEST(CocMap, InFocusSceneIsZero) {
  const DepthCalibration calib;
  const double d = calib.to_normalized(2000);
  const CoCMap m = coc_map(DepthMap(4, 5, 1, d), calib, {50, 1.8, calib.to_metric(d)});
  for (double r : m.radius.data()) EXPECT_EQ(r, 0.0);
}

TEST(CocMap, TwoPlaneBackgroundLarger) {
  DepthMap d(2, 2);
  d.values() = {0.02, 0.02, 0.5, 0.5};
  const DepthCalibration calib;
  // Uncapped so neither plane saturates.
  const CoCMap m = coc_map(d, calib, {50, 1.8, calib.to_metric(0.0)}, kDefaultPixelPitchMm, 1e6);
  EXPECT_GT(m.radius(1, 0), m.radius(0, 0));
  EXPECT_EQ(m.radius(1, 0), m.radius(1, 1));
}

TEST(CocMap, MatchesScalarOracle) {
  std::mt19937_64 rng(5);
  DepthMap d(16, 16);
  for (double& v : d.values()) v = testutil::uniform(rng);
  const DepthCalibration calib{700, 20000};
  const LensParams lens{35, 2.0, 4000};
  const double pitch = 0.004, cap = 20;
  const CoCMap m = coc_map(d, calib, lens, pitch, cap);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double dist = 700 + d.values()[i] * (20000 - 700);
    const double expect = std::min(ref::coc_mm(35, 2.0, 4000, dist) / (2 * pitch), cap);
    EXPECT_NEAR(m.radius.values()[i], expect, 1e-9);
    EXPECT_GE(m.radius.values()[i], 0.0);
  }
}

TEST(CocMap, Defaults) {
  EXPECT_EQ(kDefaultPixelPitchMm, 0.005);
  EXPECT_EQ(kDefaultMaxRadiusPx, 32.0);
  EXPECT_EQ(DepthCalibration{}.near_mm, 500.0);
  EXPECT_EQ(DepthCalibration{}.far_mm, 100000.0);
}

TEST(DepthOfField, ZeroThresholdCollapsesToFocus) {
  const DepthCalibration calib;
  const LensParams lens{50, 1.8, 2000};
  const DepthInterval iv = depth_of_field(lens, 0.0, calib);
  EXPECT_NEAR(iv.lo, calib.to_normalized(2000), 1e-15);
  EXPECT_NEAR(iv.hi, calib.to_normalized(2000), 1e-15);
}

TEST(DepthOfField, MatchesBisection) {
  const DepthCalibration calib;
  const LensParams lens{50, 1.8, 2000};
  const double pitch = 0.005, thr = 1.0;
  const DepthInterval iv = depth_of_field(lens, thr, calib, pitch);
  auto radius_px = [](double d) { return ref::coc_mm(50, 1.8, 2000, d) / (2 * 0.005); };
  const double near_mm = ref::bisect(radius_px, thr, 60.0, 2000.0);
  const double far_mm = ref::bisect(radius_px, thr, 2000.0, 1e7);
  EXPECT_NEAR(iv.lo, (near_mm - 500) / (100000 - 500), 1e-9);
  EXPECT_NEAR(iv.hi, (far_mm - 500) / (100000 - 500), 1e-9);
  EXPECT_LT(iv.lo, iv.hi);
}

TEST(DepthOfField, NarrowApertureContainsWide) {
  const DepthCalibration calib;
  const DepthInterval wide = depth_of_field({50, 1.8, 2000}, 1.0, calib);
  const DepthInterval narrow = depth_of_field({50, 16, 2000}, 1.0, calib);
  EXPECT_LT(narrow.lo, wide.lo);
  EXPECT_GT(narrow.hi, wide.hi);
}

TEST(DepthOfField, UnboundedFarLimitClipsToOne) {
  const DepthInterval iv = depth_of_field({50, 16, 20000}, 10.0, DepthCalibration{});
  EXPECT_EQ(iv.hi, 1.0);
}

TEST(Config, RecordRoundTrip) {
  PipelineConfig cfg;
  cfg.focal_length_mm = 35;
  cfg.focus_distance_mm = 1234.5;
  cfg.calibration = {300, 9000};
  cfg.pixel_pitch_mm = 0.0042;
  cfg.max_radius_px = 24;
  const PipelineConfig back = PipelineConfig::from_record(TextRecord::parse(cfg.to_record().str()));
  EXPECT_EQ(back.focal_length_mm, 35);
  EXPECT_EQ(back.focus_distance_mm, 1234.5);
  EXPECT_EQ(back.calibration.near_mm, 300);
  EXPECT_EQ(back.calibration.far_mm, 9000);
  EXPECT_EQ(back.pixel_pitch_mm, 0.0042);
  EXPECT_EQ(back.max_radius_px, 24);
}

TEST(Config, FromFocalPlaneKeyword) {
  const auto rec = TextRecord::parse("# lens\nf_mm = 50\nfocus_distance_mm = from-focal-plane\n");
  EXPECT_FALSE(PipelineConfig::from_record(rec).focus_distance_mm.has_value());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(PipelineConfig::from_record(TextRecord::parse("f_nmber = 2\n")), FormatError);
  EXPECT_THROW(PipelineConfig::from_record(TextRecord::parse("f_mm = abc\n")), FormatError);
  EXPECT_THROW(PipelineConfig::from_record(TextRecord::parse("near_mm = 10\nfar_mm = 5\n")),
               ArgumentError);
  EXPECT_THROW(TextRecord::parse("no equals sign\n"), FormatError);
}

TEST(Lens, Validation) {
  EXPECT_THROW(LensParams({50, 1.8, 40}).validate(), ArgumentError);
  EXPECT_THROW(LensParams({50, 1.8, 50}).validate(), SingularityError);
  EXPECT_THROW(DepthCalibration({0, 10}).validate(), ArgumentError);
}
