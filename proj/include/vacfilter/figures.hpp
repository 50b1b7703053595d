#pragma once

// Data behind the filter-comparison figures: verification marginals,
// acceptance curves, sensitivity versus error, gain and gain versus success.
// Each figure is a set of tables holding theory curves and Monte-Carlo points.

#include <cstdint>
#include <string>
#include <vector>

#include "vacfilter/filter_detectors.hpp"
#include "vacfilter/report.hpp"

namespace vacfilter {

struct FigureParams {
  double R = 0.5;
  double R_alpha_sq_max = 1.65;
  double R_alpha_sq_step = 0.05;
  double p = 0.02;
  double E = 5.3e-3;
  /// APD used as the experimental filter of the marginal figure.
  double apd_eta = 0.63;
  double apd_dark_count = 1.4e-4;
  std::uint64_t seed = 1;
  /// Trials per Monte-Carlo point; for the marginal figure, samples per case.
  std::uint64_t trials = 100000;
  unsigned workers = 1;
};

enum class FigureId { kFig3, kFig4, kFig5a, kFig5b, kFig5c };

std::string to_string(FigureId id);
/// Parses "fig3", "fig4", "fig5a", "fig5b" or "fig5c".
FigureId parse_figure(const std::string& name);
std::vector<FigureId> all_figures();

/// The three matched-error detectors with unit efficiency: APD, HDS, HDR.
std::vector<FilterDetector> matched_detectors(double E);

/// Grid 0, step, ..., max (inclusive up to rounding).
std::vector<double> photon_number_grid(double max, double step);

struct GoodnessOfFit {
  std::string name;
  std::uint64_t samples = 0;
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 0.0;
};

struct FigureData {
  FigureId id = FigureId::kFig3;
  std::vector<Table> tables;
  /// Chi-square tests of the marginal figure (empty for the others).
  std::vector<GoodnessOfFit> fits;
};

FigureData make_figure(FigureId id, const FigureParams& params);

}  // namespace vacfilter
