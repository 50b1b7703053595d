#include "vacfilter/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "vacfilter/errors.hpp"
#include "vacfilter/figures.hpp"
#include "vacfilter/fock_oracle.hpp"
#include "vacfilter/gaussian_core.hpp"
#include "vacfilter/metrics.hpp"
#include "vacfilter/montecarlo.hpp"
#include "vacfilter/qkd_security.hpp"
#include "vacfilter/report.hpp"

namespace vacfilter::cli {

namespace {

using nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Opts {
  std::uint64_t seed = 1;
  std::uint64_t trials = 100000;
  unsigned workers = 1;
  std::string format = "csv";
  std::string out;

  std::string detector;
  double eta = 1.0;
  double pd = 0.0;
  double threshold = 0.0;
  double error = 5.3e-3;
  std::string hd_efficiency = "linear";

  std::string grid = "0:1.65:0.05";
  double R = 0.5;
  double p = 0.02;
  double R_alpha_sq = 1.65;
  double prep_error = 0.0;
  double target_error = 0.0;
  bool best_threshold = false;

  std::string subset = "accepted";
  double lo_phase = 0.0;
  int bins = 60;
  double x_min = -2.5;
  double x_max = 3.5;

  double V = 1.1;
  double qkd_p = 1.0;
  bool no_filter = false;
  std::string vacuum_branch = "tmsv-marginal";
  std::string protocol = "heterodyne";
  std::string prefactor = "ps";
  bool optimize = false;
  double tolerance = 1e-4;
  double floor = 1e-3;
  int curve_points = 0;

  std::string oracle_case = "noclick";
  double beta = 1.0;
  int cutoff = 40;

  std::vector<std::string> figures;
};

// ---- option registration -------------------------------------------------

void add_output(CLI::App* s, Opts& o) {
  s->add_option("--format", o.format, "Output format: csv or json")->capture_default_str();
  s->add_option("--out", o.out, "Output file (default: standard output)");
}

void add_mc(CLI::App* s, Opts& o) {
  s->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  s->add_option("--trials", o.trials, "Monte-Carlo trials")->capture_default_str();
  s->add_option("--workers", o.workers, "Worker threads")->capture_default_str();
}

void add_detector(CLI::App* s, Opts& o) {
  s->add_option("--detector", o.detector, "ideal, apd, hds or hdr (default: the three matched detectors)");
  s->add_option("--eta", o.eta, "Detector efficiency")->capture_default_str();
  s->add_option("--pd", o.pd, "APD dark-count probability")->capture_default_str();
  s->add_option("--threshold", o.threshold, "Homodyne threshold B");
  s->add_option("--error", o.error, "Target error probability E used to set p_d or B")->capture_default_str();
  s->add_option("--hd-efficiency", o.hd_efficiency, "Homodyne efficiency model: linear or sqrt")
      ->capture_default_str();
}

std::unique_ptr<CLI::App> build_app(Opts& o) {
  auto app = std::make_unique<CLI::App>("Vacuum filtering of coherent-state alphabets: detector models, "
                                        "Monte-Carlo and Gaussian key-rate bounds",
                                        "vacfilter");
  app->require_subcommand(1);
  app->set_version_flag("--version", library_version());

  auto* acc = app->add_subcommand("acceptance", "Acceptance probability curves");
  add_detector(acc, o);
  acc->add_option("--grid", o.grid, "R|alpha|^2 grid start:stop:step or comma list")->capture_default_str();
  add_output(acc, o);

  auto* err = app->add_subcommand("error", "Error probability E of each detector");
  add_detector(err, o);
  add_output(err, o);

  auto* sen = app->add_subcommand("sensitivity", "Sensitivity S and S/R");
  add_detector(sen, o);
  sen->add_option("--R", o.R, "Tap reflectivity")->capture_default_str();
  sen->add_flag("--best-threshold", o.best_threshold, "Also sweep the homodyne threshold for maximal S/R");
  add_output(sen, o);

  auto* gain = app->add_subcommand("gain", "Success probability and gain curves");
  add_detector(gain, o);
  gain->add_option("--p", o.p, "Coherent-state probability")->capture_default_str();
  gain->add_option("--grid", o.grid, "R|alpha|^2 grid")->capture_default_str();
  add_output(gain, o);

  auto* sim = app->add_subcommand("simulate", "Monte-Carlo estimates (trial_stats table)");
  add_detector(sim, o);
  add_mc(sim, o);
  sim->add_option("--p", o.p, "Coherent-state probability")->capture_default_str();
  sim->add_option("--R", o.R, "Tap reflectivity")->capture_default_str();
  sim->add_option("--grid", o.grid, "R|alpha|^2 grid")->capture_default_str();
  sim->add_option("--prep-error", o.prep_error, "Residual coherent amplitude in vacuum slots");
  sim->add_option("--target-error", o.target_error, "Calibrate prep-error to reach this E");
  add_output(sim, o);

  auto* mar = app->add_subcommand("marginal", "Verification quadrature histogram with analytic marginal");
  add_detector(mar, o);
  add_mc(mar, o);
  mar->add_option("--p", o.p, "Coherent-state probability")->capture_default_str();
  mar->add_option("--R", o.R, "Tap reflectivity")->capture_default_str();
  mar->add_option("--R-alpha-sq", o.R_alpha_sq, "Mean photon number on the tap")->capture_default_str();
  mar->add_option("--prep-error", o.prep_error, "Residual coherent amplitude in vacuum slots");
  mar->add_option("--target-error", o.target_error, "Calibrate prep-error to reach this E");
  mar->add_option("--subset", o.subset, "all, accepted or rejected")->capture_default_str();
  mar->add_option("--lo-phase", o.lo_phase, "Verification LO phase")->capture_default_str();
  mar->add_option("--bins", o.bins, "Histogram bins")->capture_default_str();
  mar->add_option("--x-min", o.x_min, "Histogram lower edge")->capture_default_str();
  mar->add_option("--x-max", o.x_max, "Histogram upper edge")->capture_default_str();
  add_output(mar, o);

  auto* fig = app->add_subcommand("figures", "Write figure data files");
  fig->add_option("which", o.figures, "fig3, fig4, fig5a, fig5b, fig5c (default: all)");
  add_mc(fig, o);
  fig->add_option("--p", o.p, "Coherent-state probability")->capture_default_str();
  fig->add_option("--R", o.R, "Tap reflectivity")->capture_default_str();
  fig->add_option("--error", o.error, "Matched error probability")->capture_default_str();
  fig->add_option("--format", o.format, "csv or json")->capture_default_str();
  fig->add_option("--out", o.out, "Output directory (default: current directory)");

  auto* qkd = app->add_subcommand("qkd", "Gaussian key-rate bounds");
  qkd->require_subcommand(1);
  auto add_qkd_common = [&](CLI::App* s) {
    s->add_flag("--no-filter", o.no_filter, "Evaluate without the vacuum filter");
    s->add_option("--eta", o.eta, "Filter APD efficiency")->capture_default_str();
    s->add_option("--pd", o.pd, "Filter APD dark-count probability")->capture_default_str();
    s->add_option("--vacuum-branch", o.vacuum_branch, "tmsv-marginal or remapped")->capture_default_str();
    s->add_option("--protocol", o.protocol, "heterodyne or homodyne")->capture_default_str();
    s->add_option("--prefactor", o.prefactor, "ps or p_ps")->capture_default_str();
    add_output(s, o);
  };
  auto* kr = qkd->add_subcommand("keyrate", "Key rate of one scenario");
  add_qkd_common(kr);
  kr->add_option("--V", o.V, "Squeezing variance V >= 1")->capture_default_str();
  kr->add_option("--p", o.qkd_p, "Transmission probability")->capture_default_str();
  kr->add_option("--R", o.R, "Filter tap reflectivity")->capture_default_str();
  kr->add_flag("--optimize", o.optimize, "Maximize over V (and the tap) at this p");
  auto* pm = qkd->add_subcommand("pmin", "Minimum transmission probability with a positive key rate");
  add_qkd_common(pm);
  pm->add_option("--tolerance", o.tolerance, "Bisection tolerance")->capture_default_str();
  pm->add_option("--floor", o.floor, "Smallest p searched")->capture_default_str();
  pm->add_option("--curve-points", o.curve_points, "Also sample the optimized K(p) at this many points")
      ->capture_default_str();

  auto* ora = app->add_subcommand("oracle", "Fock-space spot checks of the Gaussian calculus");
  ora->add_option("--case", o.oracle_case, "noclick or tmsv-tap")->capture_default_str();
  ora->add_option("--beta", o.beta, "Tap coherent amplitude (noclick)")->capture_default_str();
  ora->add_option("--eta", o.eta, "Detector efficiency")->capture_default_str();
  ora->add_option("--pd", o.pd, "Dark-count probability")->capture_default_str();
  ora->add_option("--V", o.V, "TMSV local variance (tmsv-tap)")->capture_default_str();
  ora->add_option("--R", o.R, "Tap reflectivity (tmsv-tap)")->capture_default_str();
  ora->add_option("--cutoff", o.cutoff, "Fock cutoff per mode")->capture_default_str();
  add_output(ora, o);
  return app;
}

// ---- config handling -----------------------------------------------------

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

CLI::App* active_leaf(CLI::App* app) {
  for (CLI::App* s : app->get_subcommands()) return active_leaf(s);
  return app;
}

void collect_names(const CLI::App* app, std::set<std::string>& names) {
  for (const CLI::Option* opt : app->get_options()) {
    for (const auto& n : opt->get_lnames()) names.insert(n);
  }
  for (const CLI::App* s : app->get_subcommands([](const CLI::App*) { return true; })) collect_names(s, names);
}

bool truthy(const std::string& v) { return v == "1" || v == "true" || v == "yes" || v == "on"; }

// Appends config values for options of the active subcommand that the
// command line left unset.
std::vector<std::string> merge_config(const std::vector<std::string>& args,
                                      const std::map<std::string, std::string>& config) {
  Opts probe_opts;
  auto probe = build_app(probe_opts);
  std::vector<std::string> rev(args.rbegin(), args.rend());
  probe->parse(rev);
  std::set<std::string> known;
  collect_names(probe.get(), known);
  CLI::App* leaf = active_leaf(probe.get());

  std::vector<std::string> merged = args;
  for (const auto& [key, value] : config) {
    if (!known.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
    const CLI::Option* opt = leaf->get_option_no_throw("--" + key);
    if (opt == nullptr || opt->count() > 0) continue;
    if (opt->get_type_size() == 0) {
      if (truthy(value)) merged.push_back("--" + key);
    } else {
      merged.push_back("--" + key);
      merged.push_back(value);
    }
  }
  return merged;
}

// ---- parameter helpers ---------------------------------------------------

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw std::invalid_argument("invalid grid value '" + s + "'");
    return v;
  };
  if (spec.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(number(trim(item)));
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
      throw std::invalid_argument("grid must be start:stop:step with step > 0");
    }
    const auto n = static_cast<int>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
    for (int k = 0; k <= n; ++k) out.push_back(parts[0] + k * parts[2]);
  } else {
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(number(trim(item)));
  }
  if (out.empty()) throw std::invalid_argument("grid is empty");
  for (double v : out) {
    if (!(v >= 0.0)) throw std::invalid_argument("grid values must be >= 0");
  }
  return out;
}

bool given(CLI::App* sub, const std::string& name) {
  const CLI::Option* opt = sub->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

HdEfficiencyModel parse_hd_model(const std::string& s) {
  if (s == "linear") return HdEfficiencyModel::kLinear;
  if (s == "sqrt") return HdEfficiencyModel::kSqrt;
  throw std::invalid_argument("--hd-efficiency must be linear or sqrt");
}

std::vector<FilterDetector> detectors(CLI::App* sub, const Opts& o, bool allow_all = true) {
  const HdEfficiencyModel model = parse_hd_model(o.hd_efficiency);
  if (o.detector.empty()) {
    if (!allow_all) throw std::invalid_argument("--detector is required");
    auto dets = matched_detectors(o.error);
    for (auto& d : dets) {
      std::visit([&](auto& x) {
        using D = std::decay_t<decltype(x)>;
        if constexpr (!std::is_same_v<D, IdealOnOff>) x.eta = o.eta;
        if constexpr (std::is_same_v<D, HomodyneStabilized> || std::is_same_v<D, HomodyneRandomized>) {
          x.model = model;
        }
      }, d);
    }
    for (const auto& d : dets) validate(d);
    return dets;
  }
  FilterDetector det;
  if (o.detector == "ideal") {
    det = IdealOnOff{};
  } else if (o.detector == "apd") {
    Apd a{o.eta, o.pd};
    if (!given(sub, "--pd") && given(sub, "--error")) a = std::get<Apd>(match_error(a, o.error));
    det = a;
  } else if (o.detector == "hds" || o.detector == "hdr") {
    const bool explicit_b = given(sub, "--threshold");
    if (o.detector == "hds") {
      HomodyneStabilized h{o.eta, o.threshold, model};
      det = explicit_b ? FilterDetector{h} : match_error(h, o.error);
    } else {
      HomodyneRandomized h{o.eta, o.threshold, model};
      det = explicit_b ? FilterDetector{h} : match_error(h, o.error);
    }
  } else {
    throw std::invalid_argument("--detector must be ideal, apd, hds or hdr");
  }
  validate(det);
  return {det};
}

json detector_parameter(const FilterDetector& d) {
  if (const auto* a = std::get_if<Apd>(&d)) return a->dark_count;
  if (const auto* h = std::get_if<HomodyneStabilized>(&d)) return h->threshold;
  if (const auto* h = std::get_if<HomodyneRandomized>(&d)) return h->threshold;
  return nullptr;
}

json detector_eta(const FilterDetector& d) {
  return std::visit([](const auto& x) -> json {
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, IdealOnOff>) {
      return 1.0;
    } else {
      return x.eta;
    }
  }, d);
}

void check_format(const std::string& f) {
  if (f != "csv" && f != "json") throw std::invalid_argument("--format must be csv or json");
}

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

// ---- output --------------------------------------------------------------

struct Output {
  std::string kind;
  std::vector<Table> tables;
  json result = json::object();
};

void write_output(std::ostream& os, const Output& out, const Provenance& prov, const std::string& format) {
  if (format == "json") {
    os << make_document(out.kind, prov, out.tables, out.result).dump(2) << "\n";
    return;
  }
  std::vector<Table> tables = out.tables;
  if (!out.result.empty()) {
    Table r{out.kind, {}, {}};
    std::vector<json> row;
    for (const auto& [k, v] : out.result.items()) {
      if (v.is_structured()) continue;
      r.columns.push_back(k);
      row.push_back(v);
    }
    r.add_row(std::move(row));
    tables.insert(tables.begin(), std::move(r));
  }
  for (std::size_t k = 0; k < tables.size(); ++k) {
    if (k) os << "\n";
    write_csv(os, tables[k], prov);
  }
}

void emit(const Opts& o, const Output& out, const Provenance& prov, std::ostream& stdout_stream) {
  if (o.out.empty()) {
    write_output(stdout_stream, out, prov, o.format);
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw std::invalid_argument("cannot open output file '" + o.out + "'");
  write_output(f, out, prov, o.format);
}

// ---- commands --------------------------------------------------------------

Output cmd_acceptance(CLI::App* sub, const Opts& o) {
  const auto grid = parse_grid(o.grid);
  Output out{"acceptance", {{"acceptance", {"detector", "eta", "parameter", "E", "R_alpha_sq", "P"}, {}}}};
  for (const auto& d : detectors(sub, o)) {
    const double e = error_probability(d);
    for (double n : grid) {
      out.tables[0].add_row({detector_name(d), detector_eta(d), detector_parameter(d), e, n,
                             acceptance_probability(d, std::sqrt(n))});
    }
  }
  return out;
}

Output cmd_error(CLI::App* sub, const Opts& o) {
  Output out{"error", {{"error", {"detector", "eta", "parameter", "E"}, {}}}};
  for (const auto& d : detectors(sub, o)) {
    out.tables[0].add_row({detector_name(d), detector_eta(d), detector_parameter(d), error_probability(d)});
  }
  return out;
}

Output cmd_sensitivity(CLI::App* sub, const Opts& o) {
  Output out{"sensitivity",
             {{"sensitivity", {"detector", "eta", "parameter", "E", "R", "S", "S_over_R", "S_analytic"}, {}}}};
  for (const auto& d : detectors(sub, o)) {
    const double s = sensitivity(d, o.R);
    out.tables[0].add_row({detector_name(d), detector_eta(d), detector_parameter(d), error_probability(d), o.R,
                           s, s / o.R, sensitivity_analytic(d, o.R)});
  }
  if (o.best_threshold) {
    Table best{"best_threshold", {"detector", "threshold", "E", "S_over_R"}, {}};
    for (const auto& d : detectors(sub, o)) {
      if (!is_homodyne(d)) continue;
      const ThresholdOptimum t = best_homodyne_threshold(d);
      best.add_row({detector_name(d), t.threshold, std::erfc(std::sqrt(2.0) * t.threshold), t.S_over_R});
    }
    out.tables.push_back(std::move(best));
  }
  return out;
}

Output cmd_gain(CLI::App* sub, const Opts& o) {
  check_unit(o.p, "--p");
  const auto grid = parse_grid(o.grid);
  Output out{"gain", {{"gain", {"detector", "R_alpha_sq", "P_accept", "E", "P_S", "G"}, {}}}};
  for (const auto& d : detectors(sub, o)) {
    const auto curve = gain_vs_success_curve(d, o.p, grid);
    for (const auto& pt : curve) {
      out.tables[0].add_row({detector_name(d), pt.R_alpha_sq, acceptance_probability(d, std::sqrt(pt.R_alpha_sq)),
                             error_probability(d), pt.P_S, pt.G});
    }
  }
  return out;
}

McConfig mc_config(CLI::App* sub, const Opts& o, const FilterDetector& d, double R_alpha_sq) {
  McConfig cfg;
  cfg.seed = o.seed;
  cfg.trials = o.trials;
  cfg.workers = o.workers;
  cfg.detector = d;
  if (!(o.R > 0.0 && o.R <= 1.0)) throw std::invalid_argument("--R must lie in (0, 1]");
  cfg.mixture = ErasureMixture{CoherentAmplitude::from_photon_number(R_alpha_sq / o.R), o.p, o.R};
  cfg.prep_error = o.prep_error;
  if (given(sub, "--target-error")) cfg.prep_error = calibrate_prep_error(d, o.R, o.target_error);
  return cfg;
}

Output cmd_simulate(CLI::App* sub, const Opts& o) {
  check_unit(o.p, "--p");
  const auto grid = parse_grid(o.grid);
  Output out{"simulate", {trial_stats_table()}};
  Table counts{"trial_counts",
               {"detector", "R_alpha_sq", "trials", "coherent_trials", "accepted", "accepted_coherent",
                "accepted_vacuum", "prep_error", "diagnostic"},
               {}};
  for (const auto& d : detectors(sub, o)) {
    for (double n : grid) {
      McConfig cfg = mc_config(sub, o, d, n);
      cfg.verify = false;
      const McResult run = run_trials(cfg);
      add_trial_stats(out.tables[0], d, n, run);
      counts.add_row({detector_name(d), n, run.trials, run.coherent_trials, run.accepted, run.accepted_coherent,
                      run.accepted_vacuum, cfg.prep_error, run.diagnostic});
    }
  }
  out.tables.push_back(std::move(counts));
  return out;
}

Output cmd_marginal(CLI::App* sub, Opts o) {
  check_unit(o.p, "--p");
  if (o.detector.empty()) o.detector = "apd";
  const FilterDetector d = detectors(sub, o, false).front();
  McConfig cfg = mc_config(sub, o, d, o.R_alpha_sq);
  cfg.verify_lo_phase = o.lo_phase;
  cfg.histogram = HistogramSpec{o.x_min, o.x_max, o.bins};
  Subset subset = Subset::kAll;
  if (o.subset == "accepted") {
    subset = Subset::kAccepted;
  } else if (o.subset == "rejected") {
    subset = Subset::kRejected;
  } else if (o.subset != "all") {
    throw std::invalid_argument("--subset must be all, accepted or rejected");
  }
  const VerificationHistogram vh = verification_histogram(cfg, subset);
  Output out{"marginal", {{"marginal", {"x", "theory", "mc", "mc_err", "count"}, {}}}};
  const Histogram& h = vh.histogram;
  const double norm = static_cast<double>(h.total()) * h.bin_width();
  for (int k = 0; k < h.spec.bins; ++k) {
    const double c = static_cast<double>(h.counts[k]);
    out.tables[0].add_row({h.bin_center(k), vh.density[k], c / norm, std::sqrt(c) / norm, h.counts[k]});
  }
  out.result = {{"subset", o.subset},       {"samples", h.total()}, {"chi2", vh.chi2},
                {"dof", vh.dof},            {"p_value", vh.p_value}, {"prep_error", cfg.prep_error},
                {"detector", detector_name(d)}};
  return out;
}

Output cmd_figures(const Opts& o, const Provenance& prov) {
  FigureParams fp;
  fp.seed = o.seed;
  fp.trials = o.trials;
  fp.workers = o.workers;
  fp.p = o.p;
  fp.R = o.R;
  fp.E = o.error;
  std::vector<FigureId> ids;
  if (o.figures.empty() || (o.figures.size() == 1 && o.figures[0] == "all")) {
    ids = all_figures();
  } else {
    for (const auto& f : o.figures) ids.push_back(parse_figure(f));
  }
  const std::filesystem::path dir = o.out.empty() ? std::filesystem::path(".") : std::filesystem::path(o.out);
  std::filesystem::create_directories(dir);
  Output summary{"figures", {{"figures", {"figure", "table", "path", "rows"}, {}}}};
  for (FigureId id : ids) {
    const FigureData fd = make_figure(id, fp);
    if (o.format == "json") {
      const auto path = dir / (to_string(id) + ".json");
      std::ofstream f(path);
      if (!f) throw std::invalid_argument("cannot write " + path.string());
      f << make_document(to_string(id), prov, fd.tables).dump(2) << "\n";
      for (const auto& t : fd.tables) summary.tables[0].add_row({to_string(id), t.name, path.string(), t.rows.size()});
    } else {
      for (const auto& t : fd.tables) {
        const auto path = dir / (t.name + ".csv");
        std::ofstream f(path);
        if (!f) throw std::invalid_argument("cannot write " + path.string());
        write_csv(f, t, prov);
        summary.tables[0].add_row({to_string(id), t.name, path.string(), t.rows.size()});
      }
    }
  }
  return summary;
}

QkdSetting qkd_setting(CLI::App* sub, const Opts& o) {
  QkdSetting s;
  if (!o.no_filter) {
    s.filter = FilterParams{o.eta, o.pd};
  } else if (given(sub, "--eta") || given(sub, "--pd")) {
    throw std::invalid_argument("--no-filter conflicts with --eta/--pd");
  }
  if (o.vacuum_branch == "tmsv-marginal") {
    s.vacuum_model = VacuumBranchModel::kTmsvMarginal;
  } else if (o.vacuum_branch == "remapped") {
    s.vacuum_model = VacuumBranchModel::kRemapped;
  } else {
    throw std::invalid_argument("--vacuum-branch must be tmsv-marginal or remapped");
  }
  if (o.protocol == "heterodyne") {
    s.protocol = KeyProtocol::kHeterodyne;
  } else if (o.protocol == "homodyne") {
    s.protocol = KeyProtocol::kHomodyne;
  } else {
    throw std::invalid_argument("--protocol must be heterodyne or homodyne");
  }
  if (o.prefactor == "ps") {
    s.prefactor = Prefactor::kSuccess;
  } else if (o.prefactor == "p_ps") {
    s.prefactor = Prefactor::kSignalSuccess;
  } else {
    throw std::invalid_argument("--prefactor must be ps or p_ps");
  }
  return s;
}

json key_rate_json(const KeyRateResult& r) {
  json j = {{"K_lower", r.K_lower}, {"I_ab", r.I_ab},  {"chi_bE", r.chi_bE},
            {"P_S", r.P_S},         {"multiplier", r.multiplier}};
  j["V_opt"] = r.V_opt ? json(*r.V_opt) : json(nullptr);
  j["T_opt"] = r.T_opt ? json(*r.T_opt) : json(nullptr);
  return j;
}

Output cmd_qkd_keyrate(CLI::App* sub, const Opts& o) {
  const QkdSetting s = qkd_setting(sub, o);
  KeyRateResult r;
  if (o.optimize) {
    check_unit(o.qkd_p, "--p");
    r = maximize_key_rate(o.qkd_p, s);
  } else {
    QkdScenario sc{o.V, o.qkd_p, std::nullopt, s.vacuum_model};
    if (s.filter) sc.filter = QkdFilter{1.0 - o.R, s.filter->eta, s.filter->dark_count};
    r = scenario_key_rate(sc, s.protocol, s.prefactor);
  }
  Output out{"qkd_keyrate", {}, key_rate_json(r)};
  out.result["p"] = o.qkd_p;
  if (!o.optimize) out.result["V"] = o.V;
  return out;
}

Output cmd_qkd_pmin(CLI::App* sub, const Opts& o) {
  const QkdSetting s = qkd_setting(sub, o);
  PminOptions po;
  po.tolerance = o.tolerance;
  po.floor = o.floor;
  const PminResult r = p_min_search(s, po);
  Output out{"qkd_pmin", {{"pmin_trace", {"p", "K_max", "V_opt", "T_opt"}, {}}}};
  for (const auto& st : r.trace) {
    out.tables[0].add_row({st.p, st.K_max, st.V_opt, st.T_opt ? json(*st.T_opt) : json(nullptr)});
  }
  if (o.curve_points > 0) {
    Table curve{"k_curve", {"p", "K_max", "V_opt", "T_opt"}, {}};
    for (int k = 0; k < o.curve_points; ++k) {
      const double p = o.curve_points == 1 ? 1.0 : o.floor + (1.0 - o.floor) * k / (o.curve_points - 1);
      const KeyRateResult kr = maximize_key_rate(p, s);
      curve.add_row({p, kr.K_lower, kr.V_opt ? json(*kr.V_opt) : json(nullptr),
                     kr.T_opt ? json(*kr.T_opt) : json(nullptr)});
    }
    out.tables.push_back(std::move(curve));
  }
  out.result = {{"p_min", r.p_min},
                {"below_floor", r.below_floor},
                {"tolerance", r.tolerance},
                {"filter", s.filter ? "apd" : "none"},
                {"eta", s.filter ? json(s.filter->eta) : json(nullptr)},
                {"pd", s.filter ? json(s.filter->dark_count) : json(nullptr)},
                {"vacuum_branch", to_string(s.vacuum_model)},
                {"protocol", to_string(s.protocol)}};
  return out;
}

Output cmd_oracle(const Opts& o) {
  Output out{"oracle", {{"oracle", {"quantity", "fock", "reference", "abs_diff"}, {}}}};
  auto row = [&](const std::string& q, double f, double ref) {
    out.tables[0].add_row({q, f, ref, std::abs(f - ref)});
  };
  if (o.oracle_case == "noclick") {
    const auto tap = fock::build_state(fock::CoherentSpec{o.beta}, o.cutoff);
    const auto bare = fock::povm_expectation(tap, 0, fock::NoClickPovm{o.eta, o.pd});
    const auto eff = fock::povm_expectation(tap, 0, fock::NoClickPovm{o.eta * (1.0 - o.pd), o.pd});
    const double closed = 1.0 - acceptance_probability(Apd{o.eta, o.pd}, std::abs(o.beta));
    // Conditioning keeps at least one mode, so pair the tap with a spectator vacuum.
    Vector mean = Vector::Zero(4);
    mean.head<2>() = coherent_mean(o.beta);
    const auto g = condition_on_noclick(GaussianMixtureState::pure(CovMatrix::vacuum(2), mean), 0, o.eta, o.pd);
    row("noclick_vs_gaussian", bare.probability, g.weight_off);
    row("noclick_effective_eta_vs_closed_form", eff.probability, closed);
    row("noclick_bare_eta_vs_closed_form", bare.probability, closed);
  } else if (o.oracle_case == "tmsv-tap") {
    const double T = 1.0 - o.R;
    auto fs = fock::FockState::product(fock::build_state(fock::TmsvSpec{o.V}, o.cutoff),
                                       fock::build_state(fock::VacuumSpec{}, o.cutoff));
    fs = fock::fock_beamsplitter(fs, 1, 2, T);
    const auto fo = fock::povm_expectation(fs, 2, fock::NoClickPovm{o.eta, o.pd});
    const int ab[] = {0, 1};
    const Moments fm = fock::fock_moments(fo.conditioned, ab);
    const auto gs = apply_beamsplitter(
        GaussianMixtureState::tensor(GaussianMixtureState::pure(CovMatrix::tmsv(o.V)),
                                     GaussianMixtureState::pure(CovMatrix::vacuum(1))),
        1, 2, T);
    const auto go = condition_on_noclick(gs, 2, o.eta, o.pd);
    const Moments gm = mixture_moments(go.conditioned);
    row("noclick_probability", fo.probability, go.weight_off);
    row("conditional_cm_max_abs_diff", (fm.cm - gm.cm).cwiseAbs().maxCoeff(), 0.0);
    for (int r = 0; r < 4; ++r) {
      for (int c = r; c < 4; ++c) {
        row("cm_" + std::to_string(r) + std::to_string(c), fm.cm(r, c), gm.cm(r, c));
      }
    }
  } else {
    throw std::invalid_argument("--case must be noclick or tmsv-tap");
  }
  out.result = {{"case", o.oracle_case}, {"cutoff", o.cutoff}};
  return out;
}

std::string join(const std::vector<std::string>& args) {
  std::string s = "vacfilter";
  for (const auto& a : args) s += " " + a;
  return s;
}

}  // namespace

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read configuration file '" + path + "'");
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Opts o;
  std::unique_ptr<CLI::App> app;
  std::string config_path;
  try {
    std::vector<std::string> merged = args;
    if (const char* env = std::getenv("VACFILTER_CONFIG"); env != nullptr && *env != '\0') {
      config_path = env;
      merged = merge_config(args, read_config_file(config_path));
    }
    app = build_app(o);
    std::vector<std::string> rev(merged.rbegin(), merged.rend());
    app->parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and --version
      Opts tmp;
      auto help_app = build_app(tmp);
      return help_app->exit(e, out, err);
    }
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    check_format(o.format);
    Provenance prov{join(args), std::nullopt, default_conventions()};
    if (!config_path.empty()) prov.conventions["config_file"] = config_path;
    CLI::App* leaf = active_leaf(app.get());
    const std::string name = leaf->get_name();
    if (name == "simulate" || name == "marginal" || name == "figures") prov.seed = o.seed;
    if (name != "qkd" && name != "keyrate" && name != "pmin" && name != "oracle") {
      prov.conventions["hd_efficiency"] = o.hd_efficiency;
    }
    if (name == "keyrate" || name == "pmin") {
      prov.conventions["qkd_protocol"] = o.protocol;
      prov.conventions["qkd_vacuum_branch"] = o.vacuum_branch;
      prov.conventions["qkd_prefactor"] = o.prefactor;
    }

    Output result;
    if (name == "acceptance") {
      result = cmd_acceptance(leaf, o);
    } else if (name == "error") {
      result = cmd_error(leaf, o);
    } else if (name == "sensitivity") {
      result = cmd_sensitivity(leaf, o);
    } else if (name == "gain") {
      result = cmd_gain(leaf, o);
    } else if (name == "simulate") {
      result = cmd_simulate(leaf, o);
    } else if (name == "marginal") {
      result = cmd_marginal(leaf, o);
    } else if (name == "figures") {
      result = cmd_figures(o, prov);
      write_output(out, result, prov, o.format);
      return kExitOk;
    } else if (name == "keyrate") {
      result = cmd_qkd_keyrate(leaf, o);
    } else if (name == "pmin") {
      result = cmd_qkd_pmin(leaf, o);
    } else if (name == "oracle") {
      result = cmd_oracle(o);
    } else {
      throw std::invalid_argument("unknown command");
    }
    emit(o, result, prov, out);
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace vacfilter::cli
