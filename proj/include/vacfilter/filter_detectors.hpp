#pragma once

// Acceptance and error probabilities of the filter detectors.

#include <string>
#include <variant>

#include "vacfilter/signal_model.hpp"

namespace vacfilter {

/// How homodyne efficiency scales the signal amplitude. `kLinear` uses
/// a = eta |beta|, the form the acceptance formulas were published with;
/// `kSqrt` uses the loss-channel amplitude a = sqrt(eta) |beta|.
enum class HdEfficiencyModel { kLinear, kSqrt };

/// Perfect on/off detector: accepts with 1 - exp(-|beta|^2), never errs.
struct IdealOnOff {};

struct Apd {
  double eta = 1.0;
  double dark_count = 0.0;
};

struct HomodyneStabilized {
  double eta = 1.0;
  double threshold = 0.0;
  HdEfficiencyModel model = HdEfficiencyModel::kLinear;
};

struct HomodyneRandomized {
  double eta = 1.0;
  double threshold = 0.0;
  HdEfficiencyModel model = HdEfficiencyModel::kLinear;
};

using FilterDetector = std::variant<IdealOnOff, Apd, HomodyneStabilized, HomodyneRandomized>;

/// Throws std::invalid_argument when parameters are out of range.
void validate(const FilterDetector& det);

/// Short identifier: "ideal", "apd", "hds" or "hdr".
std::string detector_name(const FilterDetector& det);

bool is_homodyne(const FilterDetector& det);

/// Homodyne signal amplitude a for input amplitude |beta|.
double homodyne_amplitude(double eta, double beta_magnitude, HdEfficiencyModel model);

/// Probability that the detector accepts the coherent state |beta>.
/// The phase-randomized integral is evaluated by adaptive Gauss-Kronrod
/// quadrature at relative tolerance 1e-12 (error below 1e-10).
double acceptance_probability(const FilterDetector& det, double beta_magnitude);
inline double acceptance_probability(const FilterDetector& det, CoherentAmplitude beta) {
  return acceptance_probability(det, beta.magnitude());
}

/// Acceptance probability for vacuum input, E = P(0).
double error_probability(const FilterDetector& det);

/// Stabilized homodyne acceptance for signal amplitude a and threshold B:
/// [erfc(sqrt2 (B + a)) + erfc(sqrt2 (B - a))] / 2.
double homodyne_stabilized_acceptance(double threshold, double a);

/// Phase-averaged counterpart: (1/2pi) Int erfc(sqrt2 (B - a cos th)) dth.
double homodyne_randomized_acceptance(double threshold, double a);

/// Threshold B >= 0 with erfc(sqrt2 B) = target. Valid for 0 < target <= 1;
/// the same B serves both homodyne variants.
double threshold_for_error(double target_error);

/// Rebuilds a detector with its threshold or dark count chosen so that
/// error_probability equals `target_error`. IdealOnOff is returned as is.
FilterDetector match_error(const FilterDetector& det, double target_error);

}  // namespace vacfilter
