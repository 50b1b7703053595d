#include "vacfilter/figures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vacfilter/metrics.hpp"
#include "vacfilter/montecarlo.hpp"

namespace vacfilter {

namespace {

nlohmann::json opt(const std::optional<Estimate>& e, bool error = false) {
  if (!e) return nullptr;
  return error ? e->std_error : e->value;
}

McConfig base_config(const FigureParams& fp, const FilterDetector& det, double R_alpha_sq, double p,
                     std::uint64_t stream) {
  McConfig cfg;
  cfg.seed = fp.seed + stream;
  cfg.trials = fp.trials;
  cfg.workers = fp.workers;
  cfg.detector = det;
  cfg.mixture = ErasureMixture{CoherentAmplitude::from_photon_number(R_alpha_sq / fp.R), p, fp.R};
  cfg.verify = false;
  return cfg;
}

FigureData fig3(const FigureParams& fp) {
  const FilterDetector apd = Apd{fp.apd_eta, fp.apd_dark_count};
  const double leak = calibrate_prep_error(apd, fp.R, fp.E);

  McConfig perturbed = base_config(fp, apd, fp.R_alpha_sq_max, fp.p, 0);
  perturbed.verify = true;
  perturbed.prep_error = leak;

  McConfig vacuum = perturbed;
  vacuum.seed = fp.seed + 1;
  vacuum.mixture.p = 0.0;
  vacuum.prep_error = 0.0;

  // Enough trials that the accepted subset alone holds about `trials` samples.
  const double pa = acceptance_probability(apd, perturbed.mixture.tap_amplitude());
  const double ps = success_probability(fp.p, pa, fp.E);
  McConfig filtered = perturbed;
  filtered.seed = fp.seed + 2;
  filtered.trials = static_cast<std::uint64_t>(std::ceil(1.1 * static_cast<double>(fp.trials) / ps));

  const auto h_pert = verification_histogram(perturbed, Subset::kAll);
  const auto h_vac = verification_histogram(vacuum, Subset::kAll);
  const auto h_filt = verification_histogram(filtered, Subset::kAccepted);

  const CoherentAmplitude signal = perturbed.mixture.signal_amplitude();
  const FilterDetector hds = matched_detectors(fp.E)[1];
  const double pa_hds = acceptance_probability(hds, perturbed.mixture.tap_amplitude());
  const PostFilterMixture ideal{1.0, signal};
  const PostFilterMixture hds_post = posterior_mixture(perturbed.mixture, pa_hds, fp.E);

  FigureData out;
  out.id = FigureId::kFig3;
  Table t{"fig3",
          {"x", "theory_perturbed", "theory_vacuum", "theory_filtered_apd", "theory_filtered_ideal",
           "theory_filtered_hds", "mc_perturbed", "mc_perturbed_err", "mc_vacuum", "mc_vacuum_err",
           "mc_filtered_apd", "mc_filtered_apd_err"},
          {}};
  const Histogram& ref = h_pert.histogram;
  auto density = [](const Histogram& h, int k) {
    const double n = static_cast<double>(h.total()) * h.bin_width();
    return std::pair{static_cast<double>(h.counts[k]) / n, std::sqrt(static_cast<double>(h.counts[k])) / n};
  };
  for (int k = 0; k < ref.spec.bins; ++k) {
    const double x = ref.bin_center(k);
    const auto [dp, ep] = density(h_pert.histogram, k);
    const auto [dv, ev] = density(h_vac.histogram, k);
    const auto [df, ef] = density(h_filt.histogram, k);
    t.add_row({x, h_pert.density[k], h_vac.density[k], h_filt.density[k], marginal_density(ideal, 0.0, x),
               marginal_density(hds_post, 0.0, x), dp, ep, dv, ev, df, ef});
  }
  Table fits{"fig3_fits", {"case", "samples", "chi2", "dof", "p_value"}, {}};
  const std::pair<const char*, const VerificationHistogram*> cases[] = {
      {"perturbed", &h_pert}, {"vacuum", &h_vac}, {"filtered_apd", &h_filt}};
  for (const auto& [name, h] : cases) {
    GoodnessOfFit g{name, h->histogram.total(), h->chi2, h->dof, h->p_value};
    fits.add_row({g.name, g.samples, g.chi2, g.dof, g.p_value});
    out.fits.push_back(g);
  }
  Table meta{"fig3_parameters", {"parameter", "value"}, {}};
  meta.add_row({"p", fp.p});
  meta.add_row({"R", fp.R});
  meta.add_row({"R_alpha_sq", fp.R_alpha_sq_max});
  meta.add_row({"E", fp.E});
  meta.add_row({"apd_eta", fp.apd_eta});
  meta.add_row({"apd_dark_count", fp.apd_dark_count});
  meta.add_row({"prep_error", leak});
  out.tables = {std::move(t), std::move(fits), std::move(meta)};
  return out;
}

FigureData fig4(const FigureParams& fp) {
  FigureData out;
  out.id = FigureId::kFig4;
  Table t{"fig4", {"detector", "R_alpha_sq", "P_theory", "P_mc", "P_mc_stderr"}, {}};
  const auto grid = photon_number_grid(fp.R_alpha_sq_max, fp.R_alpha_sq_step);
  std::uint64_t stream = 0;
  for (const auto& det : matched_detectors(fp.E)) {
    for (double n : grid) {
      const McResult run = run_trials(base_config(fp, det, n, 1.0, stream++));
      t.add_row({detector_name(det), n, acceptance_probability(det, std::sqrt(n)), opt(run.P_accept),
                 opt(run.P_accept, true)});
    }
  }
  out.tables.push_back(std::move(t));
  return out;
}

FigureData fig5a(const FigureParams& fp) {
  FigureData out;
  out.id = FigureId::kFig5a;
  std::vector<double> errors;
  const int points = 41;
  for (int k = 0; k < points; ++k) errors.push_back(std::pow(10.0, -4.0 + 3.5 * k / (points - 1)));
  errors.push_back(fp.E);
  std::sort(errors.begin(), errors.end());
  Table t{"fig5a", {"E", "S_over_R_apd", "S_over_R_hds", "S_over_R_hdr"}, {}};
  for (double e : errors) {
    std::vector<nlohmann::json> row{e};
    for (const auto& det : matched_detectors(e)) row.emplace_back(sensitivity(det, fp.R) / fp.R);
    t.add_row(std::move(row));
  }
  Table best{"fig5a_best_threshold", {"detector", "threshold", "E", "S_over_R"}, {}};
  for (const FilterDetector det : {FilterDetector{HomodyneStabilized{}}, FilterDetector{HomodyneRandomized{}}}) {
    const ThresholdOptimum o = best_homodyne_threshold(det);
    best.add_row({detector_name(det), o.threshold, std::erfc(std::sqrt(2.0) * o.threshold), o.S_over_R});
  }
  out.tables = {std::move(t), std::move(best)};
  return out;
}

FigureData fig5bc(const FigureParams& fp, FigureId id) {
  FigureData out;
  out.id = id;
  Table t = id == FigureId::kFig5b
                ? Table{"fig5b",
                        {"detector", "R_alpha_sq", "G_theory", "G_mc", "G_mc_stderr", "P_S_theory", "P_S_mc",
                         "P_S_mc_stderr"},
                        {}}
                : Table{"fig5c",
                        {"detector", "R_alpha_sq", "P_S", "G", "G_single_curve", "P_S_mc", "P_S_mc_stderr",
                         "G_mc", "G_mc_stderr"},
                        {}};
  const auto grid = photon_number_grid(fp.R_alpha_sq_max, fp.R_alpha_sq_step);
  std::uint64_t stream = 0;
  for (const auto& det : matched_detectors(fp.E)) {
    const auto curve = gain_vs_success_curve(det, fp.p, grid);
    for (const auto& pt : curve) {
      const McResult run = run_trials(base_config(fp, det, pt.R_alpha_sq, fp.p, stream++));
      if (id == FigureId::kFig5b) {
        t.add_row({detector_name(det), pt.R_alpha_sq, pt.G, opt(run.G), opt(run.G, true), pt.P_S, run.P_S.value,
                   run.P_S.std_error});
      } else {
        const double single = (1.0 - (1.0 - fp.p) * fp.E / pt.P_S) / fp.p;
        t.add_row({detector_name(det), pt.R_alpha_sq, pt.P_S, pt.G, single, run.P_S.value, run.P_S.std_error,
                   opt(run.G), opt(run.G, true)});
      }
    }
  }
  out.tables.push_back(std::move(t));
  return out;
}

}  // namespace

std::string to_string(FigureId id) {
  switch (id) {
    case FigureId::kFig3: return "fig3";
    case FigureId::kFig4: return "fig4";
    case FigureId::kFig5a: return "fig5a";
    case FigureId::kFig5b: return "fig5b";
    case FigureId::kFig5c: return "fig5c";
  }
  return "unknown";
}

FigureId parse_figure(const std::string& name) {
  for (FigureId id : all_figures()) {
    if (to_string(id) == name) return id;
  }
  throw std::invalid_argument("unknown figure '" + name + "' (expected fig3, fig4, fig5a, fig5b or fig5c)");
}

std::vector<FigureId> all_figures() {
  return {FigureId::kFig3, FigureId::kFig4, FigureId::kFig5a, FigureId::kFig5b, FigureId::kFig5c};
}

std::vector<FilterDetector> matched_detectors(double E) {
  return {match_error(Apd{1.0, 0.0}, E), match_error(HomodyneStabilized{}, E),
          match_error(HomodyneRandomized{}, E)};
}

std::vector<double> photon_number_grid(double max, double step) {
  if (!(max >= 0.0) || !(step > 0.0)) throw std::invalid_argument("invalid photon-number grid");
  std::vector<double> g;
  const auto n = static_cast<int>(std::floor(max / step + 1e-9));
  for (int k = 0; k <= n; ++k) g.push_back(k * step);
  if (max - g.back() > 1e-9 * std::max(1.0, max)) g.push_back(max);
  return g;
}

FigureData make_figure(FigureId id, const FigureParams& params) {
  if (!(params.R > 0.0 && params.R < 1.0)) throw std::invalid_argument("figure R must lie in (0, 1)");
  if (params.trials < 1) throw std::invalid_argument("trials must be >= 1");
  switch (id) {
    case FigureId::kFig3: return fig3(params);
    case FigureId::kFig4: return fig4(params);
    case FigureId::kFig5a: return fig5a(params);
    case FigureId::kFig5b:
    case FigureId::kFig5c: return fig5bc(params, id);
  }
  throw std::invalid_argument("unknown figure");
}

}  // namespace vacfilter
