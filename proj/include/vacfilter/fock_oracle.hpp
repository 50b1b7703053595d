#pragma once

// Truncated Fock-space reference implementation. Desk scale only (up to
// three modes, cutoff <= 60). Used to validate the Gaussian calculus and the
// detector models; no performance goals.
//
// Mixed states are stored as ensembles of dense pure-state tensors rather
// than dense density tensors: every state the oracle needs (coherent, TMSV,
// thermal, and their products) has a small ensemble decomposition, while a
// three-mode density tensor at cutoff 40 would not fit in memory.

#include <complex>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "vacfilter/gaussian_core.hpp"

namespace vacfilter::fock {

using Complex = std::complex<double>;

/// Truncation deficit allowed when building states.
inline constexpr double kBuildDeficitBound = 1e-10;
/// Truncation deficit allowed after operations.
inline constexpr double kOperationDeficitBound = 1e-8;

struct PureComponent {
  double weight = 1.0;
  /// Row-major tensor, mode 0 most significant, each index in [0, cutoff].
  std::vector<Complex> amps;
};

class FockState {
 public:
  FockState(int modes, int cutoff, std::vector<PureComponent> ensemble);

  static FockState product(const FockState& a, const FockState& b);

  int modes() const { return modes_; }
  int cutoff() const { return cutoff_; }
  std::size_t dim() const { return dim_; }
  const std::vector<PureComponent>& ensemble() const { return ensemble_; }

  /// Sum of weight * |psi|^2.
  double trace() const;
  double trace_deficit() const { return 1.0 - trace(); }

 private:
  int modes_;
  int cutoff_;
  std::size_t dim_;
  std::vector<PureComponent> ensemble_;
};

struct VacuumSpec {};
struct CoherentSpec {
  Complex alpha;
};
/// Two-mode squeezed vacuum with local quadrature variance v (vacuum = 1):
/// sqrt(1 - l^2) sum_n l^n |n, n>, l = tanh r = sqrt((v - 1)/(v + 1)).
struct TmsvSpec {
  double v = 1.0;
};
struct ThermalSpec {
  double mean_photons = 0.0;
};
using StateSpec = std::variant<VacuumSpec, CoherentSpec, TmsvSpec, ThermalSpec>;

/// Builds the state; TMSV has two modes, the others one. Throws
/// std::invalid_argument when the cutoff is too small (|alpha|^2 > cutoff/4
/// or truncation deficit above 1e-10).
FockState build_state(const StateSpec& spec, int cutoff);

/// Exact beam splitter on the truncated space with the same convention as
/// vacfilter::apply_beamsplitter. Throws NumericalError if truncation loses
/// more than 1e-8 of the trace.
FockState fock_beamsplitter(const FockState& state, int mode_i, int mode_j, double transmissivity);

/// Displacement D(alpha) on one mode.
FockState fock_displace(const FockState& state, int mode, Complex alpha);

/// Means and covariance matrix (vacuum = identity) of the listed modes.
Moments fock_moments(const FockState& state, std::span<const int> modes);

double mean_photon_number(const FockState& state, int mode);

/// <phi| rho |phi> for a pure reference state.
double fidelity(const FockState& pure_reference, const FockState& state);

struct NoClickPovm {
  double eta = 1.0;
  double dark_count = 0.0;
};
struct ClickPovm {
  double eta = 1.0;
  double dark_count = 0.0;
};
/// Homodyne outcome x_theta (vacuum variance 1/4) inside any of the
/// intervals; bounds may be +-infinity.
struct QuadratureIntervalPovm {
  std::vector<std::pair<double, double>> intervals;
  double lo_phase = 0.0;
};
using Povm = std::variant<NoClickPovm, ClickPovm, QuadratureIntervalPovm>;

struct PovmOutcome {
  double probability = 0.0;
  /// Normalized post-measurement state sqrt(Pi) rho sqrt(Pi) / p. The
  /// measured mode is kept; use fock_moments on the other modes.
  FockState conditioned;
};

/// Throws NumericalError when the outcome has zero probability.
PovmOutcome povm_expectation(const FockState& state, int mode, const Povm& povm);

/// Matrix <m| Pi |n> of a quadrature-interval POVM on one mode.
Eigen::MatrixXcd quadrature_interval_matrix(const QuadratureIntervalPovm& povm, int cutoff);

}  // namespace vacfilter::fock
