#include "vacfilter/qkd_security.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "vacfilter/errors.hpp"

namespace vacfilter {

namespace {

constexpr double kStructureTol = 1e-8;
constexpr double kMeanTol = 1e-12;
constexpr double kMinSuccess = 1e-14;
// Key rates closer to zero than this are rounding noise near V = 1.
constexpr double kPositiveKeyTol = 1e-10;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_zero_mean(const Vector& mean, const char* what) {
  if (mean.size() > 0 && mean.cwiseAbs().maxCoeff() > kMeanTol) {
    throw NumericalError(std::string(what) + " has a nonzero mean");
  }
}

// Symplectic eigenvalues of [[a I, c Z], [c Z, b I]], larger first.
std::pair<double, double> symmetric_eigenvalues(const SymmetricForm& f) {
  const double delta = f.a * f.a + f.b * f.b - 2.0 * f.c * f.c;
  const double d = f.a * f.b - f.c * f.c;
  const double disc = std::max(0.0, delta * delta - 4.0 * d * d);
  const double nu1 = std::sqrt(0.5 * (delta + std::sqrt(disc)));
  // nu1 nu2 = sqrt(det) avoids the cancellation in the smaller root.
  return {nu1, d / nu1};
}

double safe_key(double p, double V, std::optional<double> T, const QkdSetting& s) {
  QkdScenario sc{V, p, std::nullopt, s.vacuum_model};
  if (s.filter) sc.filter = QkdFilter{*T, s.filter->eta, s.filter->dark_count};
  try {
    return scenario_key_rate(sc, s.protocol, s.prefactor).K_lower;
  } catch (const std::exception&) {
    return kNegInf;
  }
}

}  // namespace

std::string to_string(KeyProtocol protocol) {
  return protocol == KeyProtocol::kHeterodyne ? "heterodyne" : "homodyne";
}

std::string to_string(VacuumBranchModel model) {
  return model == VacuumBranchModel::kTmsvMarginal ? "tmsv-marginal" : "remapped";
}

std::string to_string(Prefactor prefactor) {
  return prefactor == Prefactor::kSuccess ? "ps" : "p_ps";
}

double QkdScenario::tmsv_variance() const {
  return vacuum_model == VacuumBranchModel::kTmsvMarginal ? 0.5 * (V + 1.0 / V) : V;
}

double QkdScenario::vacuum_branch_variance() const { return 0.5 * (V + 1.0 / V); }

void QkdScenario::validate() const {
  if (!(V >= 1.0)) throw std::invalid_argument("V must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  if (filter) {
    if (!(filter->transmissivity > 0.0 && filter->transmissivity < 1.0)) {
      throw std::invalid_argument("filter tap needs 0 < R < 1");
    }
    if (!(filter->eta > 0.0 && filter->eta <= 1.0)) throw std::invalid_argument("eta must lie in (0, 1]");
    if (!(filter->dark_count >= 0.0 && filter->dark_count < 1.0)) {
      throw std::invalid_argument("dark-count probability must lie in [0, 1)");
    }
  }
}

GaussianMixtureState joint_state(const QkdScenario& scenario) {
  scenario.validate();
  std::vector<GaussianComponent> comps;
  const Vector zero = Vector::Zero(4);
  if (scenario.p > 0.0) {
    comps.push_back({scenario.p, zero, CovMatrix::tmsv(scenario.tmsv_variance())});
  }
  if (scenario.p < 1.0) {
    comps.push_back({1.0 - scenario.p, zero,
                     CovMatrix::direct_sum(CovMatrix::thermal(scenario.vacuum_branch_variance()),
                                           CovMatrix::vacuum(1))});
  }
  return GaussianMixtureState(std::move(comps));
}

FilteredCovariance filtered_covariance(const QkdScenario& scenario) {
  scenario.validate();
  if (!scenario.filter) throw std::invalid_argument("filtered_covariance needs a filter");
  const QkdFilter& f = *scenario.filter;

  const auto with_tap = GaussianMixtureState::tensor(joint_state(scenario),
                                                     GaussianMixtureState::pure(CovMatrix::vacuum(1)));
  const auto split = apply_beamsplitter(with_tap, 1, 2, f.transmissivity);

  const Moments all = mixture_moments(split);
  check_zero_mean(all.mean, "filtered state");

  const NoClickResult off = condition_on_noclick(split, 2, f.eta, f.dark_count);
  const Moments cond = mixture_moments(off.conditioned);
  check_zero_mean(cond.mean, "no-click state");

  FilteredCovariance out;
  out.cv = all.cm.topLeftCorner(4, 4);
  out.cv0 = cond.cm;
  out.P0 = off.weight_off;
  out.P_S = 1.0 - off.weight_off;
  if (!(out.P_S > kMinSuccess)) {
    throw NumericalError("filter success probability is numerically zero");
  }
  out.cv_prime = (out.cv - out.P0 * out.cv0) / out.P_S;
  out.cv_prime = 0.5 * (out.cv_prime + out.cv_prime.transpose()).eval();
  return out;
}

Matrix scenario_covariance(const QkdScenario& scenario, double* success_probability) {
  if (scenario.filter) {
    FilteredCovariance f = filtered_covariance(scenario);
    if (success_probability) *success_probability = f.P_S;
    return f.cv_prime;
  }
  const Moments m = mixture_moments(joint_state(scenario));
  check_zero_mean(m.mean, "joint state");
  if (success_probability) *success_probability = 1.0;
  return m.cm;
}

SymmetricForm symmetric_form(const Matrix& cv) {
  if (cv.rows() != 4 || cv.cols() != 4) throw std::invalid_argument("key rate needs a two-mode CM");
  SymmetricForm f{0.5 * (cv(0, 0) + cv(1, 1)), 0.5 * (cv(2, 2) + cv(3, 3)),
                  0.5 * (cv(0, 2) - cv(1, 3))};
  Matrix model = Matrix::Zero(4, 4);
  model(0, 0) = model(1, 1) = f.a;
  model(2, 2) = model(3, 3) = f.b;
  model(0, 2) = model(2, 0) = f.c;
  model(1, 3) = model(3, 1) = -f.c;
  const double dev = (cv - model).cwiseAbs().maxCoeff();
  if (dev > kStructureTol) {
    throw std::invalid_argument("covariance matrix is not of symmetric form (deviation " +
                                std::to_string(dev) + ")");
  }
  return f;
}

KeyRateResult key_rate(const Matrix& cv, double multiplier, KeyProtocol protocol) {
  if (!(multiplier >= 0.0)) throw std::invalid_argument("key-rate multiplier must be >= 0");
  const SymmetricForm f = symmetric_form(cv);
  const auto [nu1, nu2] = symmetric_eigenvalues(f);
  if (!(nu2 >= 1.0 - kPhysicalityTol) || !(f.b >= 1.0 - kPhysicalityTol)) {
    throw std::invalid_argument("covariance matrix is unphysical");
  }
  double info = 0.0;
  double nu3 = 1.0;
  if (protocol == KeyProtocol::kHeterodyne) {
    const double cond = f.a - f.c * f.c / (f.b + 1.0);
    info = std::log2((f.a + 1.0) / (cond + 1.0));
    nu3 = cond;
  } else {
    const double cond = f.a - f.c * f.c / f.b;
    info = 0.5 * std::log2(f.a / cond);
    nu3 = std::sqrt(f.a * cond);
  }
  const double chi = thermal_entropy(0.5 * (nu1 - 1.0)) + thermal_entropy(0.5 * (nu2 - 1.0)) -
                     thermal_entropy(0.5 * (nu3 - 1.0));
  KeyRateResult r;
  r.I_ab = info;
  r.chi_bE = chi;
  r.multiplier = multiplier;
  r.K_lower = multiplier * (info - chi);
  return r;
}

KeyRateResult scenario_key_rate(const QkdScenario& scenario, KeyProtocol protocol,
                                Prefactor prefactor) {
  double ps = 1.0;
  const Matrix cv = scenario_covariance(scenario, &ps);
  double multiplier = 1.0;
  if (scenario.filter) multiplier = prefactor == Prefactor::kSuccess ? ps : scenario.p * ps;
  KeyRateResult r = key_rate(cv, multiplier, protocol);
  r.P_S = ps;
  return r;
}

double weak_squeezing_keyrate(double p, double P_S, double T, double V) {
  if (!(V >= 1.0)) throw std::invalid_argument("V must be >= 1");
  const double c = 0.5 * std::log2(std::numbers::e / 2.0);
  return p * P_S * c * T * (V - 1.0) * (V - 1.0);
}

KeyRateResult maximize_key_rate(double p, const QkdSetting& setting, const OptimizerOptions& o) {
  if (!(o.v_min > 1.0 && o.v_max > o.v_min && o.v_points >= 2)) {
    throw std::invalid_argument("invalid V search range");
  }
  const bool filtered = setting.filter.has_value();
  const double u_lo = std::log(o.v_min - 1.0);
  const double u_hi = std::log(o.v_max - 1.0);
  const int t_points = filtered ? o.t_points : 1;
  auto eval = [&](double u, double t) {
    return safe_key(p, 1.0 + std::exp(u), filtered ? std::optional<double>(t) : std::nullopt, setting);
  };

  double best = kNegInf;
  double best_u = u_lo;
  double best_t = 0.5;
  for (int i = 0; i < o.v_points; ++i) {
    const double u = u_lo + (u_hi - u_lo) * i / (o.v_points - 1);
    for (int j = 0; j < t_points; ++j) {
      const double t = t_points == 1 ? 0.5 : o.t_min + (o.t_max - o.t_min) * j / (t_points - 1);
      const double k = eval(u, t);
      if (k > best) {
        best = k;
        best_u = u;
        best_t = t;
      }
    }
  }
  if (best == kNegInf) throw NumericalError("key rate could not be evaluated on the search grid");

  // Compass search; the step shrinks when no neighbour improves.
  const double t_floor = 1e-4;
  const double t_ceil = 1.0 - 1e-4;
  double du = (u_hi - u_lo) / (o.v_points - 1);
  double dt = filtered ? (o.t_max - o.t_min) / (o.t_points - 1) : 0.0;
  for (int it = 0; it < o.max_refinements && (du > 1e-9 || dt > 1e-9); ++it) {
    bool moved = false;
    const std::pair<double, double> dirs[] = {{du, 0.0}, {-du, 0.0}, {0.0, dt}, {0.0, -dt}};
    for (auto [su, st] : dirs) {
      if (su == 0.0 && st == 0.0) continue;
      const double u = std::clamp(best_u + su, u_lo, u_hi);
      const double t = std::clamp(best_t + st, t_floor, t_ceil);
      const double k = eval(u, t);
      if (k > best) {
        best = k;
        best_u = u;
        best_t = t;
        moved = true;
        break;
      }
    }
    if (!moved) {
      du *= 0.5;
      dt *= 0.5;
    }
  }

  const double v_opt = 1.0 + std::exp(best_u);
  QkdScenario sc{v_opt, p, std::nullopt, setting.vacuum_model};
  if (filtered) sc.filter = QkdFilter{best_t, setting.filter->eta, setting.filter->dark_count};
  KeyRateResult r = scenario_key_rate(sc, setting.protocol, setting.prefactor);
  r.V_opt = v_opt;
  if (filtered) r.T_opt = best_t;
  return r;
}

PminResult p_min_search(const QkdSetting& setting, const PminOptions& options) {
  if (!(options.floor > 0.0 && options.floor < 1.0)) throw std::invalid_argument("floor must lie in (0, 1)");
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be > 0");
  PminResult out;
  out.tolerance = options.tolerance;
  auto probe = [&](double p) {
    const KeyRateResult r = maximize_key_rate(p, setting, options.optimizer);
    out.trace.push_back({p, r.K_lower, r.V_opt.value_or(1.0), r.T_opt});
    return r.I_ab - r.chi_bE > kPositiveKeyTol;
  };
  if (!probe(1.0)) throw NumericalError("optimizer found no positive key rate even at p = 1");
  if (probe(options.floor)) {
    out.p_min = options.floor;
    out.below_floor = true;
    return out;
  }
  double lo = options.floor;
  double hi = 1.0;
  while (hi - lo > options.tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.p_min = 0.5 * (lo + hi);
  return out;
}

}  // namespace vacfilter
