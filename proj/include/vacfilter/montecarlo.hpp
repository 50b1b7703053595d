#pragma once

// Trial-level simulation: prepare -> erasure channel -> tap -> filter
// decision -> verification homodyne on the signal arm.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vacfilter/filter_detectors.hpp"
#include "vacfilter/signal_model.hpp"

namespace vacfilter {

enum class Truth { kCoherent, kVacuum };

struct TrialRecord {
  Truth truth = Truth::kVacuum;
  std::optional<bool> click;      // on/off detectors
  std::optional<double> tap_x;    // homodyne detectors
  bool accepted = false;
  std::optional<double> verify_x;
};

struct HistogramSpec {
  double lo = -2.5;
  double hi = 3.5;
  int bins = 60;
};

/// Equal-width bins on [lo, hi) plus underflow and overflow counters.
struct Histogram {
  HistogramSpec spec;
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;

  explicit Histogram(HistogramSpec s = {});
  void add(double x);
  void merge(const Histogram& other);
  double bin_width() const { return (spec.hi - spec.lo) / spec.bins; }
  double bin_lo(int k) const { return spec.lo + k * bin_width(); }
  double bin_center(int k) const { return bin_lo(k) + 0.5 * bin_width(); }
  std::uint64_t total() const;
};

struct McConfig {
  std::uint64_t seed = 1;
  std::uint64_t trials = 100000;
  unsigned workers = 1;
  FilterDetector detector = IdealOnOff{};
  ErasureMixture mixture;
  /// Residual coherent amplitude left in "vacuum" slots by imperfect
  /// preparation. 0 means perfect vacuum.
  double prep_error = 0.0;
  /// LO phase of the verification homodyne, relative to alpha.
  double verify_lo_phase = 0.0;
  bool verify = true;
  HistogramSpec histogram;

  void validate() const;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;

  /// Frequency hits/trials with binomial standard error sqrt(q(1-q)/n).
  static Estimate binomial(std::uint64_t hits, std::uint64_t trials);
};

struct McResult {
  std::uint64_t trials = 0;
  std::uint64_t coherent_trials = 0;
  std::uint64_t accepted = 0;
  std::uint64_t accepted_coherent = 0;
  std::uint64_t accepted_vacuum = 0;

  std::optional<Estimate> P_accept;  // absent if no coherent trials
  std::optional<Estimate> E;         // absent if no vacuum trials
  Estimate P_S;
  /// G = p'/p with p' the coherent fraction among accepted trials; absent
  /// (with `diagnostic` set) when nothing was accepted.
  std::optional<Estimate> G;
  std::string diagnostic;

  Histogram all;
  Histogram accepted_hist;
  Histogram rejected_hist;
};

/// One trial, a pure function of (cfg, index).
TrialRecord simulate_trial(const McConfig& cfg, std::uint64_t index);

/// Runs cfg.trials trials on cfg.workers threads. Results are bit-identical
/// for any worker count.
McResult run_trials(const McConfig& cfg);

enum class Subset { kAll, kAccepted, kRejected };

struct VerificationHistogram {
  Subset subset = Subset::kAll;
  Histogram histogram;
  /// Analytic marginal density at each bin center.
  std::vector<double> density;
  /// Expected counts per bin (underflow, bins..., overflow).
  std::vector<double> expected;
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 0.0;
};

/// Histogram of verification quadratures for one subset, overlaid with the
/// analytic marginal of the matching mixture (pre-filter for kAll, posterior
/// for kAccepted / kRejected) and a chi-square goodness-of-fit test with
/// bins merged until each expected count is at least 5.
VerificationHistogram verification_histogram(const McConfig& cfg, Subset subset);
VerificationHistogram verification_histogram(const McConfig& cfg, const McResult& run,
                                             Subset subset);

/// Leak amplitude epsilon >= 0 such that a "vacuum" slot prepared as
/// |epsilon> is accepted with probability target_error (tap amplitude
/// sqrt(R) epsilon). target_error must not be below the detector's own E.
double calibrate_prep_error(const FilterDetector& det, double R, double target_error);

}  // namespace vacfilter
