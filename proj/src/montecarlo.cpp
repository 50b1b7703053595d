#include "vacfilter/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/tools/roots.hpp>

#include "vacfilter/errors.hpp"
#include "vacfilter/rng.hpp"

namespace vacfilter {

namespace {

constexpr std::uint64_t kBlockSize = 1 << 15;

// Per-configuration constants shared by every trial.
struct TrialPlan {
  double p = 0.0;
  double click_coherent = 0.0;  // on/off detectors
  double click_vacuum = 0.0;
  double tap_a_coherent = 0.0;  // homodyne detectors: signal amplitude a
  double tap_a_vacuum = 0.0;
  double threshold = 0.0;
  bool homodyne = false;
  bool randomized = false;
  double verify_mean_coherent = 0.0;
  double verify_mean_vacuum = 0.0;
};

TrialPlan make_plan(const McConfig& cfg) {
  TrialPlan plan;
  const ErasureMixture& mix = cfg.mixture;
  plan.p = mix.p;
  const double tap_coh = mix.tap_amplitude().magnitude();
  const double tap_vac = std::sqrt(mix.R) * cfg.prep_error;
  plan.click_coherent = acceptance_probability(cfg.detector, tap_coh);
  plan.click_vacuum = acceptance_probability(cfg.detector, tap_vac);
  if (const auto* d = std::get_if<HomodyneStabilized>(&cfg.detector)) {
    plan.homodyne = true;
    plan.threshold = d->threshold;
    plan.tap_a_coherent = homodyne_amplitude(d->eta, tap_coh, d->model);
    plan.tap_a_vacuum = homodyne_amplitude(d->eta, tap_vac, d->model);
  } else if (const auto* d = std::get_if<HomodyneRandomized>(&cfg.detector)) {
    plan.homodyne = true;
    plan.randomized = true;
    plan.threshold = d->threshold;
    plan.tap_a_coherent = homodyne_amplitude(d->eta, tap_coh, d->model);
    plan.tap_a_vacuum = homodyne_amplitude(d->eta, tap_vac, d->model);
  }
  plan.verify_mean_coherent = homodyne_mean(mix.signal_amplitude(), cfg.verify_lo_phase);
  plan.verify_mean_vacuum =
      homodyne_mean(CoherentAmplitude::real(std::sqrt(mix.T()) * cfg.prep_error), cfg.verify_lo_phase);
  return plan;
}

TrialRecord run_one(const McConfig& cfg, const TrialPlan& plan, std::uint64_t index) {
  TrialRng rng(cfg.seed, index);
  TrialRecord rec;
  rec.truth = rng.uniform() < plan.p ? Truth::kCoherent : Truth::kVacuum;
  const bool coherent = rec.truth == Truth::kCoherent;
  if (plan.homodyne) {
    const double a = coherent ? plan.tap_a_coherent : plan.tap_a_vacuum;
    const double phase = plan.randomized ? std::cos(2.0 * std::numbers::pi * rng.uniform()) : 1.0;
    const double x = a * phase + 0.5 * rng.normal();
    rec.tap_x = x;
    rec.accepted = std::abs(x) > plan.threshold;
  } else {
    const bool click = rng.uniform() < (coherent ? plan.click_coherent : plan.click_vacuum);
    rec.click = click;
    rec.accepted = click;
  }
  if (cfg.verify) {
    const double mean = coherent ? plan.verify_mean_coherent : plan.verify_mean_vacuum;
    rec.verify_x = mean + 0.5 * rng.normal();
  }
  return rec;
}

struct Tally {
  std::uint64_t trials = 0;
  std::uint64_t coherent = 0;
  std::uint64_t accepted_coherent = 0;
  std::uint64_t accepted_vacuum = 0;
  Histogram all;
  Histogram accepted;
  Histogram rejected;

  explicit Tally(const HistogramSpec& spec) : all(spec), accepted(spec), rejected(spec) {}

  void merge(const Tally& o) {
    trials += o.trials;
    coherent += o.coherent;
    accepted_coherent += o.accepted_coherent;
    accepted_vacuum += o.accepted_vacuum;
    all.merge(o.all);
    accepted.merge(o.accepted);
    rejected.merge(o.rejected);
  }
};

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

struct TwoComponentMarginal {
  double w = 0.0;  // coherent weight
  double mean_coherent = 0.0;
  double mean_vacuum = 0.0;

  double density(double x) const {
    return w * normal_density(x, mean_coherent, kVacuumQuadratureVariance) +
           (1.0 - w) * normal_density(x, mean_vacuum, kVacuumQuadratureVariance);
  }
  double cdf(double x) const {
    return w * normal_cdf(x, mean_coherent, 0.5) + (1.0 - w) * normal_cdf(x, mean_vacuum, 0.5);
  }
};

}  // namespace

Histogram::Histogram(HistogramSpec s) : spec(s) {
  if (!(s.hi > s.lo) || s.bins < 1) throw std::invalid_argument("invalid histogram range");
  counts.assign(static_cast<std::size_t>(s.bins), 0);
}

void Histogram::add(double x) {
  if (x < spec.lo) {
    ++underflow;
  } else if (x >= spec.hi) {
    ++overflow;
  } else {
    auto k = static_cast<int>((x - spec.lo) / bin_width());
    ++counts[static_cast<std::size_t>(std::min(k, spec.bins - 1))];
  }
}

void Histogram::merge(const Histogram& other) {
  for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
  underflow += other.underflow;
  overflow += other.overflow;
}

std::uint64_t Histogram::total() const {
  std::uint64_t n = underflow + overflow;
  for (auto c : counts) n += c;
  return n;
}

void McConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (!(prep_error >= 0.0) || !std::isfinite(prep_error)) {
    throw std::invalid_argument("prep_error must be finite and >= 0");
  }
  mixture.validate();
  vacfilter::validate(detector);
  static_cast<void>(Histogram{histogram});
}

Estimate Estimate::binomial(std::uint64_t hits, std::uint64_t trials) {
  if (trials == 0) throw std::invalid_argument("binomial estimate needs at least one trial");
  const double q = static_cast<double>(hits) / static_cast<double>(trials);
  return {q, std::sqrt(q * (1.0 - q) / static_cast<double>(trials)), hits, trials};
}

TrialRecord simulate_trial(const McConfig& cfg, std::uint64_t index) {
  cfg.validate();
  return run_one(cfg, make_plan(cfg), index);
}

McResult run_trials(const McConfig& cfg) {
  cfg.validate();
  const TrialPlan plan = make_plan(cfg);
  const std::uint64_t blocks = (cfg.trials + kBlockSize - 1) / kBlockSize;
  std::vector<Tally> partial(blocks, Tally(cfg.histogram));
  std::atomic<std::uint64_t> next{0};

  auto worker = [&] {
    for (std::uint64_t b = next++; b < blocks; b = next++) {
      Tally& t = partial[b];
      const std::uint64_t begin = b * kBlockSize;
      const std::uint64_t end = std::min(cfg.trials, begin + kBlockSize);
      for (std::uint64_t i = begin; i < end; ++i) {
        const TrialRecord rec = run_one(cfg, plan, i);
        const bool coherent = rec.truth == Truth::kCoherent;
        ++t.trials;
        t.coherent += coherent;
        if (rec.accepted) (coherent ? t.accepted_coherent : t.accepted_vacuum)++;
        if (rec.verify_x) {
          t.all.add(*rec.verify_x);
          (rec.accepted ? t.accepted : t.rejected).add(*rec.verify_x);
        }
      }
    }
  };

  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::uint64_t>(cfg.workers, blocks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  }

  Tally total(cfg.histogram);
  for (const auto& t : partial) total.merge(t);

  McResult r;
  r.trials = total.trials;
  r.coherent_trials = total.coherent;
  r.accepted_coherent = total.accepted_coherent;
  r.accepted_vacuum = total.accepted_vacuum;
  r.accepted = total.accepted_coherent + total.accepted_vacuum;
  const std::uint64_t vacuum = total.trials - total.coherent;
  if (total.coherent > 0) r.P_accept = Estimate::binomial(total.accepted_coherent, total.coherent);
  if (vacuum > 0) r.E = Estimate::binomial(total.accepted_vacuum, vacuum);
  r.P_S = Estimate::binomial(r.accepted, total.trials);
  if (r.accepted == 0) {
    r.diagnostic = "gain undefined: no trial was accepted";
  } else if (cfg.mixture.p <= 0.0) {
    r.diagnostic = "gain undefined: p = 0";
  } else {
    Estimate post = Estimate::binomial(r.accepted_coherent, r.accepted);
    r.G = Estimate{post.value / cfg.mixture.p, post.std_error / cfg.mixture.p, post.hits,
                   post.trials};
  }
  r.all = std::move(total.all);
  r.accepted_hist = std::move(total.accepted);
  r.rejected_hist = std::move(total.rejected);
  return r;
}

VerificationHistogram verification_histogram(const McConfig& cfg, Subset subset) {
  if (!cfg.verify) throw std::invalid_argument("verification homodyne is disabled");
  return verification_histogram(cfg, run_trials(cfg), subset);
}

VerificationHistogram verification_histogram(const McConfig& cfg, const McResult& run,
                                             Subset subset) {
  if (!cfg.verify) throw std::invalid_argument("verification homodyne is disabled");
  const TrialPlan plan = make_plan(cfg);
  const double p = cfg.mixture.p;
  TwoComponentMarginal m{p, plan.verify_mean_coherent, plan.verify_mean_vacuum};
  const Histogram* h = &run.all;
  if (subset == Subset::kAccepted) {
    h = &run.accepted_hist;
    const double num = p * plan.click_coherent;
    const double den = num + (1.0 - p) * plan.click_vacuum;
    m.w = den > 0.0 ? num / den : 0.0;
  } else if (subset == Subset::kRejected) {
    h = &run.rejected_hist;
    const double num = p * (1.0 - plan.click_coherent);
    const double den = num + (1.0 - p) * (1.0 - plan.click_vacuum);
    m.w = den > 0.0 ? num / den : 0.0;
  }
  const std::uint64_t n = h->total();
  if (n == 0) throw std::domain_error("verification histogram: selected subset is empty");

  VerificationHistogram out;
  out.subset = subset;
  out.histogram = *h;
  const int bins = h->spec.bins;
  const double total = static_cast<double>(n);

  // Cells: underflow, bins..., overflow.
  std::vector<double> observed;
  observed.reserve(bins + 2);
  out.expected.reserve(bins + 2);
  observed.push_back(static_cast<double>(h->underflow));
  out.expected.push_back(total * m.cdf(h->spec.lo));
  for (int k = 0; k < bins; ++k) {
    observed.push_back(static_cast<double>(h->counts[k]));
    out.expected.push_back(total * (m.cdf(h->bin_lo(k + 1)) - m.cdf(h->bin_lo(k))));
    out.density.push_back(m.density(h->bin_center(k)));
  }
  observed.push_back(static_cast<double>(h->overflow));
  out.expected.push_back(total * (1.0 - m.cdf(h->spec.hi)));

  std::vector<std::pair<double, double>> groups;  // (observed, expected)
  double obs_acc = 0.0;
  double exp_acc = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    obs_acc += observed[k];
    exp_acc += out.expected[k];
    if (exp_acc >= 5.0) {
      groups.emplace_back(obs_acc, exp_acc);
      obs_acc = exp_acc = 0.0;
    }
  }
  if (exp_acc > 0.0 || obs_acc > 0.0) {
    if (groups.empty()) {
      groups.emplace_back(obs_acc, exp_acc);
    } else {
      groups.back().first += obs_acc;
      groups.back().second += exp_acc;
    }
  }
  for (const auto& [o, e] : groups) {
    if (e > 0.0) out.chi2 += (o - e) * (o - e) / e;
  }
  out.dof = static_cast<int>(groups.size()) - 1;
  if (out.dof >= 1) {
    out.p_value = boost::math::cdf(
        boost::math::complement(boost::math::chi_squared(out.dof), out.chi2));
  } else {
    out.p_value = 1.0;
  }
  return out;
}

double calibrate_prep_error(const FilterDetector& det, double R, double target_error) {
  if (!(R > 0.0 && R <= 1.0)) throw std::invalid_argument("calibration needs 0 < R <= 1");
  const double floor = error_probability(det);
  if (!(target_error >= floor && target_error < 1.0)) {
    throw std::invalid_argument("target error below the detector's own error floor");
  }
  if (target_error == floor) return 0.0;
  auto f = [&](double eps) { return acceptance_probability(det, std::sqrt(R) * eps) - target_error; };
  double hi = 1.0;
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e6) throw NumericalError("prep_error calibration failed to bracket");
  }
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, hi, tol, iters);
  return 0.5 * (a + b);
}

}  // namespace vacfilter
