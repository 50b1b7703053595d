#include <cmath>

#include <gtest/gtest.h>

#include "vacfilter/fock_oracle.hpp"
#include "vacfilter/qkd_security.hpp"

namespace vacfilter {
namespace {

// Click-conditioned covariance of the filtered scenario in the Fock basis.
Matrix fock_filtered_cm(const QkdScenario& sc, int cutoff, double* ps) {
  using namespace fock;
  const double mu = sc.tmsv_variance();
  const FockState vac = build_state(VacuumSpec{}, cutoff);
  std::vector<PureComponent> ens;
  const FockState tmsv = build_state(TmsvSpec{mu}, cutoff);
  for (auto c : tmsv.ensemble()) {
    c.weight *= sc.p;
    ens.push_back(std::move(c));
  }
  if (sc.p < 1.0) {
    const auto th =
        FockState::product(build_state(ThermalSpec{0.5 * (sc.vacuum_branch_variance() - 1.0)}, cutoff), vac);
    for (auto c : th.ensemble()) {
      c.weight *= 1.0 - sc.p;
      ens.push_back(std::move(c));
    }
  }
  FockState st = FockState::product(FockState(2, cutoff, std::move(ens)), vac);
  st = fock_beamsplitter(st, 1, 2, sc.filter->transmissivity);
  const auto click = povm_expectation(st, 2, ClickPovm{sc.filter->eta, sc.filter->dark_count});
  *ps = click.probability;
  const int ab[] = {0, 1};
  return fock_moments(click.conditioned, ab).cm;
}

TEST(QkdScenario, DerivedQuantities) {
  const QkdScenario sc{2.0, 0.5};
  EXPECT_DOUBLE_EQ(sc.tmsv_variance(), 1.25);
  EXPECT_DOUBLE_EQ(sc.sigma(), 0.25);
  EXPECT_DOUBLE_EQ((QkdScenario{1.0, 0.5}.sigma()), 0.0);
  EXPECT_THROW((QkdScenario{0.9, 0.5}.validate()), std::invalid_argument);
}

TEST(JointState, PureTmsvAtUnitTransmission) {
  const auto st = joint_state(QkdScenario{3.0, 1.0});
  ASSERT_EQ(st.components().size(), 1u);
  const auto nu = symplectic_eigenvalues(st.components()[0].cm);
  EXPECT_NEAR(nu[0], 1.0, 1e-9);
  EXPECT_NEAR(nu[1], 1.0, 1e-9);
}

TEST(JointState, UnitVIsVacuum) {
  const auto st = joint_state(QkdScenario{1.0, 0.4});
  for (const auto& c : st.components()) EXPECT_TRUE(c.cm.matrix().isIdentity(1e-15));
}

TEST(JointState, MomentsMatchFockOracle) {
  const QkdScenario sc{1.2, 0.5};
  const Moments g = mixture_moments(joint_state(sc));
  const int cutoff = 25;
  using namespace fock;
  std::vector<PureComponent> ens;
  const FockState tmsv = build_state(TmsvSpec{sc.tmsv_variance()}, cutoff);
  for (auto c : tmsv.ensemble()) {
    c.weight *= 0.5;
    ens.push_back(c);
  }
  const FockState thermal = FockState::product(
      build_state(ThermalSpec{0.5 * (sc.vacuum_branch_variance() - 1.0)}, cutoff), build_state(VacuumSpec{}, cutoff));
  for (auto c : thermal.ensemble()) {
    c.weight *= 0.5;
    ens.push_back(c);
  }
  const int ab[] = {0, 1};
  const Moments f = fock_moments(FockState(2, cutoff, std::move(ens)), ab);
  EXPECT_LT((f.cm - g.cm).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FilteredCovariance, IdealFilterAtUnitVHasNoClicks) {
  QkdScenario sc{1.0, 1.0, QkdFilter{0.5, 1.0, 0.0}};
  EXPECT_THROW(filtered_covariance(sc), NumericalError);
}

TEST(FilteredCovariance, IdealFilterRemovesVacuumBranch) {
  // With a perfect detector the vacuum branch never clicks, so CV' equals
  // the click-conditioned TMSV-branch covariance.
  const QkdScenario mixed{2.0, 0.3, QkdFilter{0.6, 1.0, 0.0}};
  const QkdScenario pure{2.0, 1.0, QkdFilter{0.6, 1.0, 0.0}};
  const auto a = filtered_covariance(mixed);
  const auto b = filtered_covariance(pure);
  EXPECT_LT((a.cv_prime - b.cv_prime).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(a.P_S, 0.3 * b.P_S, 1e-12);
}

TEST(FilteredCovariance, MatchesFockOracle) {
  const QkdScenario sc{1.1, 0.5, QkdFilter{0.7, 0.63, 0.005}};
  const auto g = filtered_covariance(sc);
  double ps = 0.0;
  const Matrix f = fock_filtered_cm(sc, 20, &ps);
  EXPECT_NEAR(g.P_S, ps, 1e-9);
  EXPECT_LT((g.cv_prime - f).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FilteredCovariance, IdealLimitMatchesFockClickConditioning) {
  const QkdScenario sc{3.0, 0.4, QkdFilter{0.5, 1.0, 0.0}};
  const auto g = filtered_covariance(sc);
  double ps = 0.0;
  const Matrix f = fock_filtered_cm(sc, 40, &ps);
  EXPECT_NEAR(g.P_S, ps, 1e-9);
  EXPECT_LT((g.cv_prime - f).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SymmetricForm, RejectsLargeAsymmetry) {
  Matrix cv = CovMatrix::tmsv(2.0).matrix();
  cv(0, 0) += 1e-6;
  EXPECT_THROW(symmetric_form(cv), std::invalid_argument);
  cv(0, 0) -= 1e-6 - 1e-10;
  EXPECT_NO_THROW(symmetric_form(cv));
}

TEST(KeyRate, NoCorrelationsNoKey) {
  const Matrix cv = CovMatrix::direct_sum(CovMatrix::thermal(2.0), CovMatrix::thermal(1.5)).matrix();
  const KeyRateResult r = key_rate(cv, 1.0);
  EXPECT_NEAR(r.I_ab, 0.0, 1e-15);
  EXPECT_GE(r.chi_bE, -1e-15);
  EXPECT_LE(r.K_lower, 1e-15);
}

TEST(KeyRate, PureTmsvPositiveForAllV) {
  for (double V : {1.01, 1.5, 3.0, 10.0}) {
    const KeyRateResult r = scenario_key_rate(QkdScenario{V, 1.0});
    EXPECT_GT(r.K_lower, 0.0) << V;
    EXPECT_GE(r.chi_bE, -1e-12);
  }
}

TEST(KeyRate, SymplecticEigenvaluesAgreeWithGeneralSolver) {
  const QkdScenario sc{2.5, 0.8, QkdFilter{0.4, 0.7, 0.01}};
  const Matrix cv = filtered_covariance(sc).cv_prime;
  const auto nu = symplectic_eigenvalues(cv);
  const KeyRateResult r = key_rate(cv, 1.0);
  const SymmetricForm f = symmetric_form(cv);
  const double chi_general = thermal_entropy(0.5 * (nu[0] - 1.0)) + thermal_entropy(0.5 * (nu[1] - 1.0)) -
                             thermal_entropy(0.5 * (f.a - f.c * f.c / (f.b + 1.0) - 1.0));
  EXPECT_NEAR(r.chi_bE, chi_general, 1e-9);
}

TEST(KeyRate, UnphysicalRejected) {
  Matrix cv = Matrix::Identity(4, 4) * 0.5;
  EXPECT_THROW(key_rate(cv, 1.0), std::invalid_argument);
}

TEST(WeakSqueezing, Arithmetic) {
  EXPECT_EQ(weak_squeezing_keyrate(1.0, 0.5, 0.5, 1.0), 0.0);
  EXPECT_EQ(weak_squeezing_keyrate(1.0, 0.5, 0.0, 1.2), 0.0);
  EXPECT_NEAR(weak_squeezing_keyrate(1.0, 0.1, 0.9, 1.1), 1.99e-4, 5e-7);
}

TEST(WeakSqueezing, MatchesNumericAtVNearOne) {
  for (double p : {1.0, 0.5, 0.1}) {
    for (double T : {0.1, 0.3, 0.9}) {
      const QkdScenario sc{1.01, p, QkdFilter{T, 1.0, 0.0}};
      const KeyRateResult r = scenario_key_rate(sc, KeyProtocol::kHeterodyne, Prefactor::kSignalSuccess);
      const double approx = weak_squeezing_keyrate(p, r.P_S, T, 1.01);
      EXPECT_NEAR(approx / r.K_lower, 1.0, 0.05) << "p=" << p << " T=" << T;
    }
  }
}

TEST(WeakSqueezing, CrossCheckAtModerateSqueezing) {
  const QkdScenario sc{1.1, 1.0, QkdFilter{0.9, 1.0, 0.0}};
  const KeyRateResult r = scenario_key_rate(sc, KeyProtocol::kHeterodyne, Prefactor::kSignalSuccess);
  EXPECT_NEAR(weak_squeezing_keyrate(1.0, r.P_S, 0.9, 1.1) / r.K_lower, 1.0, 0.15);
}

TEST(Optimizer, IdealFilterBeatsNoFilter) {
  QkdSetting none;
  QkdSetting ideal;
  ideal.filter = FilterParams{1.0, 0.0};
  for (double p : {0.3, 0.6, 0.9}) {
    EXPECT_GE(maximize_key_rate(p, ideal).K_lower, maximize_key_rate(p, none).K_lower) << p;
  }
}

TEST(Optimizer, Deterministic) {
  QkdSetting s;
  s.filter = FilterParams{0.63, 0.005};
  const auto a = maximize_key_rate(0.4, s);
  const auto b = maximize_key_rate(0.4, s);
  EXPECT_EQ(a.K_lower, b.K_lower);
  EXPECT_EQ(*a.V_opt, *b.V_opt);
}

TEST(Pmin, MonotoneInDarkCount) {
  double prev = 0.0;
  for (double pd : {5e-5, 2e-4, 5e-4, 2e-3, 5e-3}) {
    QkdSetting s;
    s.filter = FilterParams{0.63, pd};
    const double pm = p_min_search(s).p_min;
    EXPECT_GT(pm, prev) << pd;
    prev = pm;
  }
}

TEST(Pmin, DecreasingInEfficiency) {
  double prev = 1.0;
  for (double eta : {0.4, 0.63, 0.9}) {
    QkdSetting s;
    s.filter = FilterParams{eta, 5e-4};
    const double pm = p_min_search(s).p_min;
    EXPECT_LT(pm, prev) << eta;
    prev = pm;
  }
}

TEST(Pmin, IdealFilterBelowFloor) {
  QkdSetting s;
  s.filter = FilterParams{1.0, 0.0};
  const PminResult r = p_min_search(s);
  EXPECT_TRUE(r.below_floor);
  EXPECT_FALSE(r.trace.empty());
}

TEST(Pmin, HomodyneProtocolVariantRuns) {
  QkdSetting s;
  s.protocol = KeyProtocol::kHomodyne;
  const PminResult r = p_min_search(s);
  EXPECT_GT(r.p_min, 0.5);
  EXPECT_LT(r.p_min, 1.0);
}

}  // namespace
}  // namespace vacfilter
