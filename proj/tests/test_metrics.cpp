#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "vacfilter/figures.hpp"
#include "vacfilter/metrics.hpp"

namespace vacfilter {
namespace {

TEST(Sensitivity, IdealEqualsReflectivity) {
  for (double R : {0.1, 0.5, 0.9}) EXPECT_NEAR(sensitivity(IdealOnOff{}, R) / R, 1.0, 1e-8);
}

TEST(Sensitivity, ApdUnitEfficiency) {
  for (double pd : {1e-4, 5e-3, 0.05}) {
    EXPECT_NEAR(sensitivity(Apd{1.0, pd}, 0.5) / 0.5, (1.0 - pd) * (1.0 - pd), 1e-8);
  }
}

TEST(Sensitivity, NumericMatchesAnalytic) {
  const FilterDetector dets[] = {Apd{0.63, 1.4e-4}, match_error(HomodyneStabilized{0.84}, 5.3e-3),
                                 match_error(HomodyneRandomized{0.84}, 5.3e-3),
                                 match_error(HomodyneStabilized{0.84, 0, HdEfficiencyModel::kSqrt}, 5.3e-3)};
  for (const auto& d : dets) {
    const double R = 0.3;
    EXPECT_NEAR(sensitivity(d, R), sensitivity_analytic(d, R), 1e-8) << detector_name(d);
  }
}

TEST(Sensitivity, AnalyticMatchesPlainCentralDifference) {
  // Independent of the library's Richardson scheme.
  const FilterDetector d = match_error(HomodyneRandomized{}, 5.3e-3);
  const double R = 0.5;
  const double fd =
      0.5 * testing::central_second_derivative([&](double x) { return acceptance_probability(d, std::sqrt(R) * x); });
  EXPECT_NEAR(fd, sensitivity_analytic(d, R), 1e-5);
}

TEST(Sensitivity, IndependentOfSignalProbability) {
  const FilterDetector d = Apd{0.63, 1e-3};
  const double s = filter_figures(d, 0.5, 0.02, 1.0).S;
  for (double p : {0.1, 0.5, 0.9}) EXPECT_EQ(filter_figures(d, 0.5, p, 1.0).S, s);
}

TEST(Sensitivity, HomodyneOptimumNearCoherentStandardDeviation) {
  const ThresholdOptimum o = best_homodyne_threshold(HomodyneStabilized{});
  EXPECT_NEAR(o.threshold, 0.5, 1e-6);
  EXPECT_NEAR(o.S_over_R, 4.0 * std::sqrt(2.0 / std::numbers::pi) * 0.5 * std::exp(-0.5), 1e-10);
}

TEST(SuccessProbability, Limits) {
  EXPECT_DOUBLE_EQ(success_probability(1.0, 0.7, 0.1), 0.7);
  EXPECT_DOUBLE_EQ(success_probability(0.0, 0.7, 0.1), 0.1);
  EXPECT_NEAR(success_probability(0.02, 0.808, 5.3e-3), 0.02135, 1e-5);
  EXPECT_THROW(success_probability(1.2, 0.5, 0.1), std::invalid_argument);
}

TEST(Gain, Limits) {
  EXPECT_NEAR(gain(0.25, 0.3, 0.0), 4.0, 1e-15);
  const double ps = success_probability(0.3, 0.2, 0.2);
  EXPECT_NEAR(gain(0.3, ps, 0.2, 0.2), 1.0, 1e-15);
  EXPECT_THROW(gain(0.3, 0.0, 0.0), std::domain_error);
}

TEST(Gain, DetectsInconsistentAcceptance) {
  const double ps = success_probability(0.1, 0.5, 0.01);
  EXPECT_THROW(gain(0.1, ps, 0.01, 0.6), NumericalError);
}

TEST(Gain, NeverExceedsInverseP) {
  for (const auto& d : matched_detectors(5.3e-3)) {
    const std::vector<double> grid = photon_number_grid(1.65, 0.05);
    for (const auto& pt : gain_vs_success_curve(d, 0.02, grid)) EXPECT_LE(pt.G, 1.0 / 0.02);
  }
}

TEST(Gain, CurveEndpoint) {
  const std::vector<double> grid{0.0};
  const auto pts = gain_vs_success_curve(Apd{1.0, 5.3e-3}, 0.02, grid);
  EXPECT_NEAR(pts[0].P_S, 5.3e-3, 1e-15);
  EXPECT_NEAR(pts[0].G, 1.0, 1e-12);
}

TEST(Gain, EmptyRangeRejected) {
  EXPECT_THROW(gain_vs_success_curve(IdealOnOff{}, 0.02, std::vector<double>{}), std::invalid_argument);
}

}  // namespace
}  // namespace vacfilter
