#pragma once

// Sensitivity, gain and success probability of a filter.

#include <optional>
#include <span>
#include <vector>

#include "vacfilter/filter_detectors.hpp"

namespace vacfilter {

struct FilterFigures {
  double S = 0.0;
  double S_over_R = 0.0;
  double G = 0.0;
  double P_S = 0.0;
  double E = 0.0;
};

/// S = 1/2 d^2/dx^2 P(sqrt(R) x) at x = 0, x the input amplitude |alpha|.
/// Central second differences at h = 1e-2, 5e-3, 2.5e-3 combined by two
/// Richardson steps (truncation error O(h^6)).
double sensitivity(const FilterDetector& det, double R);

/// Closed-form sensitivity where one exists (all four detectors do):
///   ideal: R;  APD: eta (1-p_d)^2 R;
///   HDS: 4 sqrt(2/pi) k^2 R B exp(-2B^2);  HDR: half of HDS,
/// with k = eta (linear) or sqrt(eta) (sqrt efficiency model).
double sensitivity_analytic(const FilterDetector& det, double R);

/// P_S = p P + (1 - p) E.
double success_probability(double p, double p_accept, double error);

/// G = (1/p) (1 - (1 - p) E / P_S). When `p_accept` is supplied the result
/// is also checked against P_accept / P_S (to 1e-12 relative) and a
/// NumericalError is thrown on disagreement.
double gain(double p, double success, double error, std::optional<double> p_accept = std::nullopt);

FilterFigures filter_figures(const FilterDetector& det, double R, double p, double R_alpha_sq);

struct GainPoint {
  double R_alpha_sq = 0.0;
  double P_S = 0.0;
  double G = 0.0;
};

/// Parametric (P_S, G) samples over mean photon numbers R|alpha|^2 in the tap.
std::vector<GainPoint> gain_vs_success_curve(const FilterDetector& det, double p,
                                             std::span<const double> R_alpha_sq);

struct ThresholdOptimum {
  double threshold = 0.0;
  double S_over_R = 0.0;
};

/// Sweeps the homodyne threshold on [0, b_max] and returns the maximizer of
/// S/R (golden-section refinement after a coarse scan).
ThresholdOptimum best_homodyne_threshold(const FilterDetector& homodyne, double b_max = 3.0);

}  // namespace vacfilter
