#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "vacfilter/filter_detectors.hpp"
#include "vacfilter/fock_oracle.hpp"

namespace vacfilter::fock {
namespace {

TEST(BuildState, Vacuum) {
  const FockState v = build_state(VacuumSpec{}, 5);
  EXPECT_EQ(v.ensemble().front().amps[0], Complex(1.0));
  EXPECT_NEAR(v.trace_deficit(), 0.0, 1e-15);
}

TEST(BuildState, CoherentMeanPhotonNumber) {
  const FockState c = build_state(CoherentSpec{1.0}, 30);
  EXPECT_NEAR(mean_photon_number(c, 0), 1.0, 1e-10);
}

TEST(BuildState, CutoffGuard) {
  EXPECT_THROW(build_state(CoherentSpec{3.0}, 20), std::invalid_argument);
  EXPECT_THROW(build_state(TmsvSpec{50.0}, 10), std::invalid_argument);
}

TEST(BuildState, TmsvReducedVariance) {
  const FockState t = build_state(TmsvSpec{1.2}, 40);
  const int a[] = {0};
  const Moments m = fock_moments(t, a);
  EXPECT_NEAR(m.cm(0, 0), 1.2, 1e-8);
  EXPECT_NEAR(m.cm(1, 1), 1.2, 1e-8);
}

TEST(BuildState, ThermalMoments) {
  const FockState t = build_state(ThermalSpec{0.3}, 40);
  const int a[] = {0};
  EXPECT_NEAR(fock_moments(t, a).cm(0, 0), 1.6, 1e-10);
}

TEST(Moments, CoherentMeanConvention) {
  const Complex alpha(0.7, -0.4);
  const int a[] = {0};
  const Moments m = fock_moments(build_state(CoherentSpec{alpha}, 30), a);
  EXPECT_NEAR(m.mean(0), 2.0 * alpha.real(), 1e-12);
  EXPECT_NEAR(m.mean(1), 2.0 * alpha.imag(), 1e-12);
  EXPECT_NEAR(m.cm(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(m.cm(0, 1), 0.0, 1e-10);
}

TEST(Moments, TmsvMatchesGaussianCore) {
  const int ab[] = {0, 1};
  const Moments m = fock_moments(build_state(TmsvSpec{1.5}, 40), ab);
  EXPECT_LT((m.cm - CovMatrix::tmsv(1.5).matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(BeamSplitter, CoherentSplitsIntoProductOfCoherentStates) {
  const Complex alpha(1.3, 0.2);
  const double T = 0.35;
  const int N = 30;
  const FockState in = FockState::product(build_state(CoherentSpec{alpha}, N), build_state(VacuumSpec{}, N));
  const FockState out = fock_beamsplitter(in, 0, 1, T);
  const FockState expected = FockState::product(build_state(CoherentSpec{std::sqrt(T) * alpha}, N),
                                                build_state(CoherentSpec{std::sqrt(1.0 - T) * alpha}, N));
  EXPECT_GT(fidelity(expected, out), 1.0 - 1e-10);
}

TEST(BeamSplitter, UnitTransmissivityIsIdentity) {
  const int N = 20;
  const FockState in = FockState::product(build_state(CoherentSpec{0.8}, N), build_state(CoherentSpec{-0.5}, N));
  EXPECT_GT(fidelity(in, fock_beamsplitter(in, 0, 1, 1.0)), 1.0 - 1e-14);
}

TEST(BeamSplitter, MatchesGaussianOnTwoSqueezedModes) {
  const int N = 30;
  const FockState in = FockState::product(build_state(TmsvSpec{1.3}, N), build_state(VacuumSpec{}, N));
  const FockState out = fock_beamsplitter(in, 1, 2, 0.4);
  const int all[] = {0, 1, 2};
  const Moments m = fock_moments(out, all);
  const Matrix s = beamsplitter_symplectic(3, 1, 2, 0.4);
  const Matrix cm = CovMatrix::direct_sum(CovMatrix::tmsv(1.3), CovMatrix::vacuum(1)).matrix();
  EXPECT_LT((m.cm - s * cm * s.transpose()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(BeamSplitter, TruncationLossIsReported) {
  // Both inputs combine into one mode with |alpha|^2 = 3.92, too much for N = 16.
  const int N = 16;
  const FockState in = FockState::product(build_state(CoherentSpec{1.4}, N), build_state(CoherentSpec{1.4}, N));
  EXPECT_THROW(fock_beamsplitter(in, 0, 1, 0.5), NumericalError);
}

TEST(Displacement, MovesVacuumToCoherent) {
  const Complex alpha(0.6, 0.9);
  const FockState d = fock_displace(build_state(VacuumSpec{}, 30), 0, alpha);
  EXPECT_GT(fidelity(build_state(CoherentSpec{alpha}, 30), d), 1.0 - 1e-12);
}

TEST(Povm, VacuumNeverClicks) {
  const auto r = povm_expectation(build_state(VacuumSpec{}, 5), 0, NoClickPovm{1.0, 0.0});
  EXPECT_NEAR(r.probability, 1.0, 1e-15);
  EXPECT_THROW(povm_expectation(build_state(VacuumSpec{}, 5), 0, ClickPovm{1.0, 0.0}), NumericalError);
}

TEST(Povm, ConditionedStateIsNormalized) {
  const FockState c = build_state(CoherentSpec{1.1}, 30);
  const auto r = povm_expectation(c, 0, ClickPovm{0.6, 0.01});
  EXPECT_NEAR(r.conditioned.trace(), 1.0, 1e-10);
  EXPECT_GE(r.probability, 0.0);
  EXPECT_LE(r.probability, 1.0);
}

TEST(Povm, CoherentNoClickClosedForm) {
  const double beta = 0.9;
  const double eta = 0.63;
  const double pd = 0.005;
  const auto r = povm_expectation(build_state(CoherentSpec{beta}, 30), 0, NoClickPovm{eta, pd});
  EXPECT_NEAR(r.probability, (1.0 - pd) * std::exp(-eta * beta * beta), 1e-12);
}

TEST(Povm, ApdClosedFormEqualsEffectiveEfficiencyPovm) {
  // The APD acceptance formula puts (1 - p_d) inside the exponent; it equals
  // the microscopic POVM with efficiency eta (1 - p_d), not with bare eta.
  const double eta = 0.63;
  const double pd = 0.005;
  for (double beta : {0.3, 1.0, 1.8}) {
    const FockState c = build_state(CoherentSpec{beta}, 40);
    const double closed = 1.0 - acceptance_probability(Apd{eta, pd}, beta);
    const double eff = povm_expectation(c, 0, NoClickPovm{eta * (1.0 - pd), pd}).probability;
    const double bare = povm_expectation(c, 0, NoClickPovm{eta, pd}).probability;
    EXPECT_NEAR(closed, eff, 1e-12);
    EXPECT_GT(std::abs(closed - bare), 1e-6);
  }
}

TEST(Povm, QuadratureIntervalMatchesHomodyneFormula) {
  const double B = 0.8;
  const double beta = 0.7;
  const double inf = std::numeric_limits<double>::infinity();
  const QuadratureIntervalPovm accept{{{-inf, -B}, {B, inf}}, 0.0};
  const auto r = povm_expectation(build_state(CoherentSpec{beta}, 30), 0, accept);
  EXPECT_NEAR(r.probability, testing::hds_reference(B, beta), 1e-9);
}

TEST(Povm, QuadratureIntervalRespectsLoPhase) {
  const double B = 0.5;
  const double inf = std::numeric_limits<double>::infinity();
  const Complex alpha(0.0, 0.9);
  const QuadratureIntervalPovm accept{{{-inf, -B}, {B, inf}}, std::numbers::pi / 2.0};
  const auto r = povm_expectation(build_state(CoherentSpec{alpha}, 30), 0, accept);
  EXPECT_NEAR(r.probability, testing::hds_reference(B, 0.9), 1e-9);
}

TEST(Povm, QuadratureMatrixIsIdentityOverWholeLine) {
  const double inf = std::numeric_limits<double>::infinity();
  const Eigen::MatrixXcd pi = quadrature_interval_matrix({{{-inf, inf}}, 0.0}, 20);
  EXPECT_LT((pi - Eigen::MatrixXcd::Identity(21, 21)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Convergence, DoublingCutoffChangesLittle) {
  std::mt19937_64 rng(5);
  const auto s = testing::random_scenario(rng);
  const auto a = povm_expectation(testing::fock_tap_state(s, 20), 2, NoClickPovm{s.eta, s.dark_count});
  const auto b = povm_expectation(testing::fock_tap_state(s, 40), 2, NoClickPovm{s.eta, s.dark_count});
  const int ab[] = {0, 1};
  EXPECT_NEAR(a.probability, b.probability, 1e-8);
  EXPECT_LT((fock_moments(a.conditioned, ab).cm - fock_moments(b.conditioned, ab).cm).cwiseAbs().maxCoeff(), 1e-8);
}

}  // namespace
}  // namespace vacfilter::fock
