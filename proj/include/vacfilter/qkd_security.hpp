#pragma once

// Gaussian key-rate lower bound for the entanglement-based picture of the
// filtered erasure channel.
//
// Parametrization: V is the single-mode squeezing variance. The TMSV that
// Alice prepares then has local quadrature variance mu = (V + 1/V)/2 and the
// equivalent Gaussian modulation variance is sigma = mu - 1. In the erasure
// branch Alice keeps her TMSV half, which is thermal with the same variance
// mu, and Bob receives vacuum.

#include <optional>
#include <string>
#include <vector>

#include "vacfilter/gaussian_core.hpp"

namespace vacfilter {

enum class KeyProtocol { kHeterodyne, kHomodyne };

enum class VacuumBranchModel {
  /// TMSV local variance (V + 1/V)/2, erasure branch thermal at the same variance.
  kTmsvMarginal,
  /// TMSV local variance V, erasure branch thermal at (V + 1/V)/2.
  kRemapped,
};

enum class Prefactor {
  /// K = P_S (I - chi).
  kSuccess,
  /// K = p P_S (I - chi).
  kSignalSuccess,
};

std::string to_string(KeyProtocol protocol);
std::string to_string(VacuumBranchModel model);
std::string to_string(Prefactor prefactor);

/// On/off filter on a tap of reflectivity R = 1 - T in Bob's arm.
struct QkdFilter {
  double transmissivity = 0.5;
  double eta = 1.0;
  double dark_count = 0.0;

  double reflectivity() const { return 1.0 - transmissivity; }
};

struct QkdScenario {
  double V = 1.0;
  double p = 1.0;
  std::optional<QkdFilter> filter;
  VacuumBranchModel vacuum_model = VacuumBranchModel::kTmsvMarginal;

  /// Local variance of the TMSV branch.
  double tmsv_variance() const;
  /// Variance of Alice's thermal state in the erasure branch.
  double vacuum_branch_variance() const;
  /// Displacement variance (V + 1/V)/2 - 1.
  double sigma() const { return 0.5 * (V + 1.0 / V) - 1.0; }

  void validate() const;
};

/// Two-mode (A, B) mixture: weight p TMSV, weight 1 - p thermal(A) x vacuum(B).
GaussianMixtureState joint_state(const QkdScenario& scenario);

struct FilteredCovariance {
  /// Click-conditioned covariance (CV - P0 CV0) / P_S.
  Matrix cv_prime;
  /// Unconditioned covariance of A, B after the tap, tap traced out.
  Matrix cv;
  /// No-click-conditioned covariance.
  Matrix cv0;
  double P_S = 0.0;
  double P0 = 0.0;
};

/// Throws NumericalError when P_S is numerically zero or a mean is nonzero.
FilteredCovariance filtered_covariance(const QkdScenario& scenario);

/// Covariance of the scenario as seen by the key-rate bound: the filtered
/// click-conditioned CM if a filter is present, the mixture CM otherwise.
Matrix scenario_covariance(const QkdScenario& scenario, double* success_probability = nullptr);

struct SymmetricForm {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

/// Extracts [[a I, c Z], [c Z, b I]]. Blocks are averaged when the deviation
/// from this structure is below 1e-8; larger deviations throw.
SymmetricForm symmetric_form(const Matrix& cv);

struct KeyRateResult {
  double K_lower = 0.0;
  double I_ab = 0.0;
  double chi_bE = 0.0;
  double P_S = 1.0;
  double multiplier = 1.0;
  std::optional<double> V_opt;
  std::optional<double> T_opt;
};

/// Reverse-reconciliation bound multiplier * (I_ab - chi_bE).
KeyRateResult key_rate(const Matrix& cv, double multiplier,
                       KeyProtocol protocol = KeyProtocol::kHeterodyne);

/// Key rate of a scenario with the chosen prefactor (filtered) or 1 (no filter).
KeyRateResult scenario_key_rate(const QkdScenario& scenario,
                                KeyProtocol protocol = KeyProtocol::kHeterodyne,
                                Prefactor prefactor = Prefactor::kSuccess);

/// p P_S (1/2) log2(e/2) T (V - 1)^2.
double weak_squeezing_keyrate(double p, double P_S, double T, double V);

struct OptimizerOptions {
  double v_min = 1.001;
  double v_max = 16.0;
  int v_points = 60;
  double t_min = 0.01;
  double t_max = 0.99;
  int t_points = 50;
  /// Compass-search iterations after the grid.
  int max_refinements = 400;
};

struct FilterParams {
  double eta = 1.0;
  double dark_count = 0.0;
};

struct QkdSetting {
  std::optional<FilterParams> filter;
  VacuumBranchModel vacuum_model = VacuumBranchModel::kTmsvMarginal;
  KeyProtocol protocol = KeyProtocol::kHeterodyne;
  Prefactor prefactor = Prefactor::kSuccess;
};

/// Maximizes K over V (and T when filtered): deterministic grid followed by
/// compass search in (log(V - 1), T).
KeyRateResult maximize_key_rate(double p, const QkdSetting& setting,
                                const OptimizerOptions& options = {});

struct PminStep {
  double p = 0.0;
  double K_max = 0.0;
  double V_opt = 0.0;
  std::optional<double> T_opt;
};

struct PminResult {
  double p_min = 0.0;
  /// True when K > 0 already at the search floor; p_min is then an upper bound.
  bool below_floor = false;
  double tolerance = 0.0;
  std::vector<PminStep> trace;
};

struct PminOptions {
  double floor = 1e-3;
  double tolerance = 1e-4;
  OptimizerOptions optimizer;
};

/// Smallest p with positive optimized key rate, by bisection. Throws
/// NumericalError if the key rate is not positive at p = 1.
PminResult p_min_search(const QkdSetting& setting, const PminOptions& options = {});

}  // namespace vacfilter
