#include "vacfilter/filter_detectors.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "vacfilter/detail/overloaded.hpp"

namespace vacfilter {

namespace {

using detail::Overloaded;

void check_efficiency(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("efficiency must lie in (0, 1]");
}

void check_threshold(double b) {
  if (!(b >= 0.0) || !std::isfinite(b)) throw std::invalid_argument("threshold must be finite and >= 0");
}

}  // namespace

void validate(const FilterDetector& det) {
  std::visit(Overloaded{
                 [](const IdealOnOff&) {},
                 [](const Apd& d) {
                   check_efficiency(d.eta);
                   if (!(d.dark_count >= 0.0 && d.dark_count < 1.0)) {
                     throw std::invalid_argument("dark-count probability must lie in [0, 1)");
                   }
                 },
                 [](const HomodyneStabilized& d) {
                   check_efficiency(d.eta);
                   check_threshold(d.threshold);
                 },
                 [](const HomodyneRandomized& d) {
                   check_efficiency(d.eta);
                   check_threshold(d.threshold);
                 },
             },
             det);
}

std::string detector_name(const FilterDetector& det) {
  return std::visit(Overloaded{
                        [](const IdealOnOff&) { return std::string("ideal"); },
                        [](const Apd&) { return std::string("apd"); },
                        [](const HomodyneStabilized&) { return std::string("hds"); },
                        [](const HomodyneRandomized&) { return std::string("hdr"); },
                    },
                    det);
}

bool is_homodyne(const FilterDetector& det) {
  return std::holds_alternative<HomodyneStabilized>(det) ||
         std::holds_alternative<HomodyneRandomized>(det);
}

double homodyne_amplitude(double eta, double beta_magnitude, HdEfficiencyModel model) {
  return model == HdEfficiencyModel::kLinear ? eta * beta_magnitude
                                             : std::sqrt(eta) * beta_magnitude;
}

double homodyne_stabilized_acceptance(double threshold, double a) {
  return 0.5 * (std::erfc(std::numbers::sqrt2 * (threshold + a)) +
                std::erfc(std::numbers::sqrt2 * (threshold - a)));
}

double homodyne_randomized_acceptance(double threshold, double a) {
  if (a == 0.0) return std::erfc(std::numbers::sqrt2 * threshold);
  // The integrand is even in theta, so integrate over [0, pi] and divide by pi.
  auto integrand = [threshold, a](double theta) {
    return std::erfc(std::numbers::sqrt2 * (threshold - a * std::cos(theta)));
  };
  double error = 0.0;
  const double integral = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
      integrand, 0.0, std::numbers::pi, 20, 1e-12, &error);
  return integral / std::numbers::pi;
}

double acceptance_probability(const FilterDetector& det, double beta_magnitude) {
  validate(det);
  const double b2 = beta_magnitude * beta_magnitude;
  return std::visit(
      Overloaded{
          [&](const IdealOnOff&) { return -std::expm1(-b2); },
          [&](const Apd& d) {
            const double keep = 1.0 - d.dark_count;
            return 1.0 - keep * std::exp(-d.eta * keep * b2);
          },
          [&](const HomodyneStabilized& d) {
            return homodyne_stabilized_acceptance(
                d.threshold, homodyne_amplitude(d.eta, beta_magnitude, d.model));
          },
          [&](const HomodyneRandomized& d) {
            return homodyne_randomized_acceptance(
                d.threshold, homodyne_amplitude(d.eta, beta_magnitude, d.model));
          },
      },
      det);
}

double error_probability(const FilterDetector& det) {
  validate(det);
  return std::visit(Overloaded{
                        [](const IdealOnOff&) { return 0.0; },
                        [](const Apd& d) { return d.dark_count; },
                        [](const HomodyneStabilized& d) {
                          return std::erfc(std::numbers::sqrt2 * d.threshold);
                        },
                        [](const HomodyneRandomized& d) {
                          return std::erfc(std::numbers::sqrt2 * d.threshold);
                        },
                    },
                    det);
}

double threshold_for_error(double target_error) {
  if (!(target_error > 0.0 && target_error <= 1.0)) {
    throw std::invalid_argument("target error probability must lie in (0, 1]");
  }
  if (target_error == 1.0) return 0.0;
  return boost::math::erfc_inv(target_error) / std::numbers::sqrt2;
}

FilterDetector match_error(const FilterDetector& det, double target_error) {
  return std::visit(Overloaded{
                        [](const IdealOnOff& d) -> FilterDetector { return d; },
                        [&](Apd d) -> FilterDetector {
                          d.dark_count = target_error;
                          return d;
                        },
                        [&](HomodyneStabilized d) -> FilterDetector {
                          d.threshold = threshold_for_error(target_error);
                          return d;
                        },
                        [&](HomodyneRandomized d) -> FilterDetector {
                          d.threshold = threshold_for_error(target_error);
                          return d;
                        },
                    },
                    det);
}

}  // namespace vacfilter
