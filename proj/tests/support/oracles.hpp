#pragma once

// Independent reference computations used by the tests. They deliberately
// avoid the library's own numerical routines (no Boost quadrature or root
// finders, no Gaussian conditioning) so that agreement is meaningful.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "vacfilter/fock_oracle.hpp"
#include "vacfilter/gaussian_core.hpp"

namespace vacfilter::testing {

/// Plain bisection for the root of a monotone function on [lo, hi].
inline double bisect(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int k = 0; k < iters; ++k) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Homodyne threshold B with erfc(sqrt(2) B) = E, by bisection.
inline double threshold_by_bisection(double E) {
  return bisect([&](double b) { return std::erfc(std::numbers::sqrt2 * b) - E; }, 0.0, 10.0);
}

/// Composite Simpson rule on [a, b] with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return s * h / 3.0;
}

/// Phase-stabilized homodyne acceptance: P(|x| > B) with x ~ N(a, 1/4).
inline double hds_reference(double B, double a) {
  return 0.5 * (std::erfc(std::numbers::sqrt2 * (B + a)) + std::erfc(std::numbers::sqrt2 * (B - a)));
}

/// Phase-randomized acceptance by Simpson integration over the LO phase.
inline double hdr_reference(double B, double a) {
  return simpson([&](double th) { return hds_reference(B, a * std::cos(th)); }, 0.0, std::numbers::pi) /
         std::numbers::pi;
}

/// Second derivative of P(sqrt(R) x) at x = 0 by a plain central difference.
inline double central_second_derivative(const std::function<double(double)>& P, double h = 1e-3) {
  return (P(h) - 2.0 * P(0.0) + P(-h)) / (h * h);
}

/// Random scenario for the Gaussian / Fock equivalence checks.
struct TapScenario {
  double v = 1.0;                  // TMSV local variance
  std::complex<double> alpha;      // displacement of mode B
  double transmissivity = 0.5;     // B -> tap beam splitter
  double eta = 1.0;
  double dark_count = 0.0;
  double p = 1.0;                  // weight of the TMSV branch; rest thermal(A) x vacuum(B)
};

inline TapScenario random_scenario(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TapScenario s;
  s.v = 1.0 + 0.5 * u(rng);
  const double r = 2.0 * std::sqrt(u(rng));
  const double phi = 2.0 * std::numbers::pi * u(rng);
  s.alpha = std::polar(r, phi);
  s.transmissivity = 0.1 + 0.8 * u(rng);
  s.eta = 0.5 + 0.5 * u(rng);
  s.dark_count = 0.01 * u(rng);
  s.p = u(rng) < 0.5 ? 1.0 : 0.2 + 0.6 * u(rng);
  return s;
}

/// Gaussian-side state: p TMSV(v) with B displaced by alpha, plus
/// (1 - p) thermal(v) x |alpha>, then a vacuum tap on B.
inline GaussianMixtureState gaussian_tap_state(const TapScenario& s) {
  Vector mean = Vector::Zero(6);
  mean.segment<2>(2) = coherent_mean(s.alpha);
  std::vector<GaussianComponent> comps;
  if (s.p > 0.0) {
    comps.push_back({s.p, mean, CovMatrix::direct_sum(CovMatrix::tmsv(s.v), CovMatrix::vacuum(1))});
  }
  if (s.p < 1.0) {
    comps.push_back({1.0 - s.p, mean,
                     CovMatrix::direct_sum(CovMatrix::thermal(s.v), CovMatrix::vacuum(2))});
  }
  return apply_beamsplitter(GaussianMixtureState(std::move(comps)), 1, 2, s.transmissivity);
}

/// Same state in the truncated Fock basis.
inline fock::FockState fock_tap_state(const TapScenario& s, int cutoff) {
  using namespace fock;
  const FockState vac = build_state(VacuumSpec{}, cutoff);
  std::vector<PureComponent> ens;
  if (s.p > 0.0) {
    const FockState tm = build_state(TmsvSpec{s.v}, cutoff);
    for (auto c : tm.ensemble()) {
      c.weight *= s.p;
      ens.push_back(std::move(c));
    }
  }
  if (s.p < 1.0) {
    const FockState th = FockState::product(build_state(ThermalSpec{0.5 * (s.v - 1.0)}, cutoff), vac);
    for (auto c : th.ensemble()) {
      c.weight *= 1.0 - s.p;
      ens.push_back(std::move(c));
    }
  }
  FockState ab(2, cutoff, std::move(ens));
  ab = fock_displace(ab, 1, s.alpha);
  return fock_beamsplitter(FockState::product(ab, vac), 1, 2, s.transmissivity);
}

}  // namespace vacfilter::testing
