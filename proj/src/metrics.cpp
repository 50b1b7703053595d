#include "vacfilter/metrics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

#include "vacfilter/detail/overloaded.hpp"
#include "vacfilter/errors.hpp"

namespace vacfilter {

using detail::Overloaded;

namespace {

// 2 (P(sqrt(R) h) - P(0)) / h^2; P is even in the amplitude.
double second_difference(const FilterDetector& det, double R, double p0, double h) {
  const double ph = acceptance_probability(det, std::sqrt(R) * h);
  return 2.0 * (ph - p0) / (h * h);
}

void check_reflectivity(double R) {
  if (!(R > 0.0 && R <= 1.0)) throw std::invalid_argument("reflectivity must lie in (0, 1]");
}

double homodyne_gain_factor(double eta, HdEfficiencyModel model) {
  return model == HdEfficiencyModel::kLinear ? eta * eta : eta;
}

}  // namespace

double sensitivity(const FilterDetector& det, double R) {
  check_reflectivity(R);
  const double p0 = acceptance_probability(det, 0.0);
  const double h = 1e-2;
  const double d1 = second_difference(det, R, p0, h);
  const double d2 = second_difference(det, R, p0, h / 2.0);
  const double d3 = second_difference(det, R, p0, h / 4.0);
  // Error expansion is even in h: c2 h^2 + c4 h^4 + ...
  const double r1 = (4.0 * d2 - d1) / 3.0;
  const double r2 = (4.0 * d3 - d2) / 3.0;
  return 0.5 * (16.0 * r2 - r1) / 15.0;
}

double sensitivity_analytic(const FilterDetector& det, double R) {
  check_reflectivity(R);
  validate(det);
  const double c = 4.0 * std::sqrt(2.0 / std::numbers::pi);
  return std::visit(
      Overloaded{
          [&](const IdealOnOff&) { return R; },
          [&](const Apd& d) { return d.eta * (1.0 - d.dark_count) * (1.0 - d.dark_count) * R; },
          [&](const HomodyneStabilized& d) {
            const double b = d.threshold;
            return c * homodyne_gain_factor(d.eta, d.model) * R * b * std::exp(-2.0 * b * b);
          },
          [&](const HomodyneRandomized& d) {
            const double b = d.threshold;
            return 0.5 * c * homodyne_gain_factor(d.eta, d.model) * R * b * std::exp(-2.0 * b * b);
          },
      },
      det);
}

double success_probability(double p, double p_accept, double error) {
  for (double v : {p, p_accept, error}) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
  }
  return p * p_accept + (1.0 - p) * error;
}

double gain(double p, double success, double error, std::optional<double> p_accept) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("gain needs 0 < p <= 1");
  if (!(success > 0.0)) throw std::domain_error("gain undefined: success probability is zero");
  const double g = (1.0 - (1.0 - p) * error / success) / p;
  if (p_accept) {
    const double direct = *p_accept / success;
    if (std::abs(g - direct) > 1e-12 * std::max(1.0, std::abs(direct))) {
      throw NumericalError("gain disagrees with P_accept / P_S");
    }
  }
  return g;
}

FilterFigures filter_figures(const FilterDetector& det, double R, double p, double R_alpha_sq) {
  const double pa = acceptance_probability(det, std::sqrt(R_alpha_sq));
  const double e = error_probability(det);
  const double ps = success_probability(p, pa, e);
  const double s = sensitivity(det, R);
  return {s, s / R, gain(p, ps, e, pa), ps, e};
}

std::vector<GainPoint> gain_vs_success_curve(const FilterDetector& det, double p,
                                             std::span<const double> R_alpha_sq) {
  if (R_alpha_sq.empty()) throw std::invalid_argument("photon-number range is empty");
  const double e = error_probability(det);
  std::vector<GainPoint> out;
  out.reserve(R_alpha_sq.size());
  for (double n : R_alpha_sq) {
    if (!(n >= 0.0)) throw std::invalid_argument("mean photon number must be >= 0");
    const double pa = acceptance_probability(det, std::sqrt(n));
    const double ps = success_probability(p, pa, e);
    out.push_back({n, ps, gain(p, ps, e)});
  }
  return out;
}

ThresholdOptimum best_homodyne_threshold(const FilterDetector& homodyne, double b_max) {
  if (!is_homodyne(homodyne)) throw std::invalid_argument("threshold sweep needs a homodyne detector");
  auto s_direct = [&](double b) {
    FilterDetector d = homodyne;
    std::visit(Overloaded{[&](HomodyneStabilized& h) { h.threshold = b; },
                          [&](HomodyneRandomized& h) { h.threshold = b; }, [](auto&) {}},
               d);
    return sensitivity_analytic(d, 1.0);
  };
  const int coarse = 300;
  double best_b = 0.0;
  double best_s = -1.0;
  for (int k = 0; k <= coarse; ++k) {
    const double b = b_max * k / coarse;
    const double s = s_direct(b);
    if (s > best_s) {
      best_s = s;
      best_b = b;
    }
  }
  const double step = b_max / coarse;
  const auto [b, neg_s] = boost::math::tools::brent_find_minima(
      [&](double x) { return -s_direct(x); }, std::max(0.0, best_b - step),
      std::min(b_max, best_b + step), 50);
  return {b, -neg_s};
}

}  // namespace vacfilter
