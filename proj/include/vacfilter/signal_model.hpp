#pragma once

// Coherent-state alphabet, erasure channel and tap split.
//
// Homodyne-facing quadratures in this header use vacuum variance 1/4, so a
// coherent state |alpha> measured at LO phase theta has mean
// Re(alpha e^{-i theta}) and standard deviation 1/2. Multiply by 2 to get the
// shot-noise units of gaussian_core.hpp.

#include <cmath>
#include <complex>

namespace vacfilter {

inline constexpr double kVacuumQuadratureVariance = 0.25;

struct CoherentAmplitude {
  double re = 0.0;
  double im = 0.0;

  static CoherentAmplitude real(double a) { return {a, 0.0}; }
  /// Real amplitude with the given mean photon number.
  static CoherentAmplitude from_photon_number(double n) { return {std::sqrt(n), 0.0}; }

  std::complex<double> value() const { return {re, im}; }
  double magnitude() const { return std::hypot(re, im); }
  double mean_photon_number() const { return re * re + im * im; }
  CoherentAmplitude scaled(double f) const { return {f * re, f * im}; }
};

/// rho = p |alpha><alpha| + (1 - p) |0><0| followed by a tap of
/// reflectivity R. The signal arm keeps sqrt(T) alpha with T = 1 - R.
struct ErasureMixture {
  CoherentAmplitude alpha;
  double p = 1.0;
  double R = 0.5;

  double T() const { return 1.0 - R; }
  CoherentAmplitude signal_amplitude() const { return alpha.scaled(std::sqrt(T())); }
  CoherentAmplitude tap_amplitude() const { return alpha.scaled(std::sqrt(R)); }
  void validate() const;
};

struct PostFilterMixture {
  double p_prime = 1.0;
  CoherentAmplitude transmitted_alpha;
};

struct ArmPair {
  CoherentAmplitude signal;
  CoherentAmplitude tap;
};

/// Joint distribution after the tap: both arms carry the attenuated
/// amplitudes with probability p, both are vacuum otherwise.
struct TapSplit {
  double p_coherent = 1.0;
  ArmPair coherent;
  ArmPair vacuum;
};

TapSplit tap_split(const ErasureMixture& mix);

/// Posterior coherent probability p' = p P / (p P + (1 - p) E).
/// Throws std::domain_error when the filter never accepts.
PostFilterMixture posterior_mixture(const ErasureMixture& mix, double p_accept, double error);

/// Quadrature mean of |alpha> at LO phase theta, vacuum variance 1/4.
double homodyne_mean(CoherentAmplitude alpha, double lo_phase);

double normal_density(double x, double mean, double variance);

/// Verification-arm quadrature density of the filtered state.
double marginal_density(const PostFilterMixture& mix, double lo_phase, double x);
/// Verification-arm density before filtering: p |sqrt(T) alpha> + (1-p) |0>.
/// With R = 0 this is the raw channel output.
double marginal_density(const ErasureMixture& mix, double lo_phase, double x);

}  // namespace vacfilter
