#include "vacfilter/signal_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vacfilter {

void ErasureMixture::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("transmission probability p outside [0, 1]");
  if (!(R >= 0.0 && R <= 1.0)) throw std::invalid_argument("tap reflectivity R outside [0, 1]");
  if (!std::isfinite(alpha.re) || !std::isfinite(alpha.im)) {
    throw std::invalid_argument("coherent amplitude must be finite");
  }
}

TapSplit tap_split(const ErasureMixture& mix) {
  mix.validate();
  return {mix.p, {mix.signal_amplitude(), mix.tap_amplitude()}, {}};
}

PostFilterMixture posterior_mixture(const ErasureMixture& mix, double p_accept, double error) {
  mix.validate();
  if (!(error >= 0.0) || !(p_accept >= error) || p_accept > 1.0) {
    throw std::invalid_argument("posterior needs 0 <= E <= P_accept <= 1");
  }
  const double signal = mix.p * p_accept;
  const double success = signal + (1.0 - mix.p) * error;
  if (!(success > 0.0)) throw std::domain_error("filter never accepts: posterior undefined");
  return {signal / success, mix.signal_amplitude()};
}

double homodyne_mean(CoherentAmplitude alpha, double lo_phase) {
  return alpha.re * std::cos(lo_phase) + alpha.im * std::sin(lo_phase);
}

double normal_density(double x, double mean, double variance) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

double marginal_density(const PostFilterMixture& mix, double lo_phase, double x) {
  const double a = homodyne_mean(mix.transmitted_alpha, lo_phase);
  return mix.p_prime * normal_density(x, a, kVacuumQuadratureVariance) +
         (1.0 - mix.p_prime) * normal_density(x, 0.0, kVacuumQuadratureVariance);
}

double marginal_density(const ErasureMixture& mix, double lo_phase, double x) {
  mix.validate();
  return marginal_density(PostFilterMixture{mix.p, mix.signal_amplitude()}, lo_phase, x);
}

}  // namespace vacfilter
