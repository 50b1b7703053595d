#include <cmath>

#include <gtest/gtest.h>

#include "vacfilter/figures.hpp"
#include "vacfilter/montecarlo.hpp"
#include "vacfilter/rng.hpp"

namespace vacfilter {
namespace {

McConfig config(FilterDetector det, double R_alpha_sq, double p, std::uint64_t trials) {
  McConfig cfg;
  cfg.seed = 42;
  cfg.trials = trials;
  cfg.detector = det;
  cfg.mixture = ErasureMixture{CoherentAmplitude::from_photon_number(R_alpha_sq / 0.5), p, 0.5};
  return cfg;
}

void expect_within_3_sigma(const Estimate& e, double truth) {
  const double sigma = std::sqrt(truth * (1.0 - truth) / static_cast<double>(e.trials));
  EXPECT_LE(std::abs(e.value - truth), 3.0 * sigma + 1e-15) << "estimate " << e.value << " vs " << truth;
}

TEST(Rng, CounterBasedStreamsAreReproducible) {
  TrialRng a(7, 123);
  TrialRng b(7, 123);
  TrialRng c(7, 124);
  const auto x = a.next_u64();
  EXPECT_EQ(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
}

TEST(Rng, UniformInUnitInterval) {
  TrialRng r(1, 0);
  double sum = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000.0, 0.5, 0.005);
}

TEST(MonteCarlo, IdealAcceptanceMatchesClosedForm) {
  const McResult r = run_trials(config(IdealOnOff{}, 1.65, 1.0, 1000000));
  ASSERT_TRUE(r.P_accept);
  expect_within_3_sigma(*r.P_accept, 1.0 - std::exp(-1.65));
  EXPECT_FALSE(r.E.has_value());
}

TEST(MonteCarlo, HomodyneErrorRate) {
  const FilterDetector d = match_error(HomodyneRandomized{}, 0.05);
  const McResult r = run_trials(config(d, 1.0, 0.0, 400000));
  ASSERT_TRUE(r.E);
  expect_within_3_sigma(*r.E, 0.05);
  EXPECT_FALSE(r.G.has_value());
  EXPECT_FALSE(r.diagnostic.empty());
}

TEST(MonteCarlo, WorkerCountDoesNotChangeResults) {
  McConfig cfg = config(match_error(HomodyneStabilized{}, 5.3e-3), 1.0, 0.3, 200000);
  const McResult one = run_trials(cfg);
  cfg.workers = 4;
  const McResult four = run_trials(cfg);
  EXPECT_EQ(one.accepted_coherent, four.accepted_coherent);
  EXPECT_EQ(one.accepted_vacuum, four.accepted_vacuum);
  EXPECT_EQ(one.all.counts, four.all.counts);
  EXPECT_EQ(one.P_S.value, four.P_S.value);
}

TEST(MonteCarlo, SimulateTrialMatchesRun) {
  const McConfig cfg = config(Apd{0.63, 0.01}, 1.0, 0.5, 1000);
  std::uint64_t accepted = 0;
  for (std::uint64_t i = 0; i < cfg.trials; ++i) accepted += simulate_trial(cfg, i).accepted;
  EXPECT_EQ(accepted, run_trials(cfg).accepted);
}

TEST(MonteCarlo, NoAcceptanceGivesDiagnostic) {
  const McResult r = run_trials(config(IdealOnOff{}, 1.0, 0.0, 1000));
  EXPECT_EQ(r.accepted, 0u);
  EXPECT_FALSE(r.G.has_value());
  EXPECT_NE(r.diagnostic.find("no trial"), std::string::npos);
}

TEST(MonteCarlo, InvalidConfigRejected) {
  McConfig cfg = config(IdealOnOff{}, 1.0, 0.5, 0);
  EXPECT_THROW(run_trials(cfg), std::invalid_argument);
  cfg.trials = 10;
  cfg.prep_error = -1.0;
  EXPECT_THROW(run_trials(cfg), std::invalid_argument);
}

TEST(Verification, VacuumHistogramHasQuarterVariance) {
  McConfig cfg = config(IdealOnOff{}, 1.0, 0.0, 100000);
  const McResult r = run_trials(cfg);
  double m1 = 0.0;
  double m2 = 0.0;
  for (int k = 0; k < r.all.spec.bins; ++k) {
    const double x = r.all.bin_center(k);
    m1 += r.all.counts[k] * x;
    m2 += r.all.counts[k] * x * x;
  }
  const double n = static_cast<double>(r.all.total());
  const double var = m2 / n - (m1 / n) * (m1 / n) - r.all.bin_width() * r.all.bin_width() / 12.0;
  // Sample variance of 1e5 normals has relative standard error sqrt(2/n).
  EXPECT_NEAR(var, 0.25, 3.0 * 0.25 * std::sqrt(2.0 / n) + 1e-3);
}

TEST(Verification, AcceptedSubsetOfIdealFilterIsCoherent) {
  McConfig cfg = config(IdealOnOff{}, 1.65, 0.3, 100000);
  const auto vh = verification_histogram(cfg, Subset::kAccepted);
  EXPECT_GT(vh.p_value, 0.001);
  const double mean = std::sqrt(1.65);
  const auto peak = std::max_element(vh.density.begin(), vh.density.end()) - vh.density.begin();
  EXPECT_NEAR(vh.histogram.bin_center(static_cast<int>(peak)), mean, vh.histogram.bin_width());
}

TEST(Verification, RejectedMeanStaysNearZero) {
  McConfig cfg = config(IdealOnOff{}, 1.65, 0.3, 50000);
  const McResult r = run_trials(cfg);
  double m = 0.0;
  for (int k = 0; k < r.rejected_hist.spec.bins; ++k) m += r.rejected_hist.counts[k] * r.rejected_hist.bin_center(k);
  m /= static_cast<double>(r.rejected_hist.total());
  // Rejected trials mix vacuum with the 19% of coherent states that did not click.
  EXPECT_LT(m, 0.3);
}

TEST(Verification, DisabledVerificationRejected) {
  McConfig cfg = config(IdealOnOff{}, 1.0, 0.5, 10);
  cfg.verify = false;
  EXPECT_THROW(verification_histogram(cfg, Subset::kAll), std::invalid_argument);
}

TEST(Calibration, PrepErrorReachesTargetError) {
  const FilterDetector apd = Apd{0.63, 1.4e-4};
  const double eps = calibrate_prep_error(apd, 0.5, 5.3e-3);
  EXPECT_NEAR(acceptance_probability(apd, std::sqrt(0.5) * eps), 5.3e-3, 1e-12);
  EXPECT_THROW(calibrate_prep_error(apd, 0.5, 1e-5), std::invalid_argument);
}

TEST(Calibration, SimulatedErrorWithLeak) {
  const FilterDetector apd = Apd{0.63, 1.4e-4};
  McConfig cfg = config(apd, 1.0, 0.0, 400000);
  cfg.prep_error = calibrate_prep_error(apd, 0.5, 5.3e-3);
  const McResult r = run_trials(cfg);
  expect_within_3_sigma(*r.E, 5.3e-3);
}

}  // namespace
}  // namespace vacfilter
