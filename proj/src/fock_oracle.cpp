#include "vacfilter/fock_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "vacfilter/detail/overloaded.hpp"
#include "vacfilter/errors.hpp"

namespace vacfilter::fock {

using detail::Overloaded;

namespace {

constexpr int kMaxModes = 3;
constexpr int kMaxCutoff = 60;

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int k = 0; k < exp; ++k) r *= base;
  return r;
}

std::size_t stride_of(int modes, int cutoff, int mode) {
  return ipow(static_cast<std::size_t>(cutoff + 1), modes - 1 - mode);
}

int digit(std::size_t index, std::size_t stride, int cutoff) {
  return static_cast<int>((index / stride) % static_cast<std::size_t>(cutoff + 1));
}

void check_mode(const FockState& s, int mode) {
  if (mode < 0 || mode >= s.modes()) {
    throw std::out_of_range("mode " + std::to_string(mode) + " out of range");
  }
}

double norm2(const std::vector<Complex>& v) {
  double s = 0.0;
  for (const auto& c : v) s += std::norm(c);
  return s;
}

Complex inner(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  Complex s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::conj(a[k]) * b[k];
  return s;
}

// out = M acting on `mode` of amps.
std::vector<Complex> apply_single_mode(const std::vector<Complex>& amps, int modes, int cutoff,
                                       int mode, const Eigen::MatrixXcd& m) {
  const std::size_t stride = stride_of(modes, cutoff, mode);
  const int d = cutoff + 1;
  std::vector<Complex> out(amps.size(), 0.0);
  Eigen::VectorXcd v(d);
  for (std::size_t base = 0; base < amps.size(); ++base) {
    if (digit(base, stride, cutoff) != 0) continue;
    for (int n = 0; n < d; ++n) v(n) = amps[base + n * stride];
    const Eigen::VectorXcd w = m * v;
    for (int n = 0; n < d; ++n) out[base + n * stride] = w(n);
  }
  return out;
}

// a_mode |psi>
std::vector<Complex> annihilate(const std::vector<Complex>& amps, int modes, int cutoff, int mode) {
  const std::size_t stride = stride_of(modes, cutoff, mode);
  std::vector<Complex> out(amps.size(), 0.0);
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const int n = digit(i, stride, cutoff);
    if (n < cutoff) out[i] = std::sqrt(static_cast<double>(n + 1)) * amps[i + stride];
  }
  return out;
}

// Columns U|n, m> of the beam splitter, indexed by photons k in the first
// mode (the second holds n + m - k). Built by applying the transformed
// creation operators a_i^+ -> t a_i^+ + r a_j^+, a_j^+ -> -r a_i^+ + t a_j^+
// one photon at a time; every coefficient only depends on lower indices, so
// the recursion is exact within the truncation.
std::vector<std::vector<double>> beamsplitter_columns(int cutoff, double t, double r) {
  const int d = cutoff + 1;
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(d) * d);
  auto at = [&](int n, int m) -> std::vector<double>& { return cols[static_cast<std::size_t>(n) * d + m]; };
  auto raise = [](const std::vector<double>& v, double ci, double cj) {
    // ci a_i^+ + cj a_j^+ on a vector with total photon number v.size() - 1.
    const int total = static_cast<int>(v.size()) - 1;
    std::vector<double> w(v.size() + 1, 0.0);
    for (int k = 0; k <= total; ++k) {
      w[k + 1] += ci * std::sqrt(static_cast<double>(k + 1)) * v[k];
      w[k] += cj * std::sqrt(static_cast<double>(total - k + 1)) * v[k];
    }
    return w;
  };
  at(0, 0) = {1.0};
  for (int m = 1; m < d; ++m) {
    auto w = raise(at(0, m - 1), -r, t);
    for (auto& x : w) x /= std::sqrt(static_cast<double>(m));
    at(0, m) = std::move(w);
  }
  for (int n = 1; n < d; ++n) {
    for (int m = 0; m < d; ++m) {
      auto w = raise(at(n - 1, m), t, r);
      for (auto& x : w) x /= std::sqrt(static_cast<double>(n));
      at(n, m) = std::move(w);
    }
  }
  return cols;
}

// <k| D(alpha) |n> for k, n <= cutoff via D|n> = (a^+ - conj(alpha)) D|n-1> / sqrt(n).
Eigen::MatrixXcd displacement_matrix(int cutoff, Complex alpha) {
  const int d = cutoff + 1;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
  Complex c = std::exp(-0.5 * std::norm(alpha));
  for (int k = 0; k < d; ++k) {
    m(k, 0) = c;
    c *= alpha / std::sqrt(static_cast<double>(k + 1));
  }
  const Complex ac = std::conj(alpha);
  for (int n = 1; n < d; ++n) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(n));
    for (int k = 0; k < d; ++k) {
      Complex v = -ac * m(k, n - 1);
      if (k > 0) v += std::sqrt(static_cast<double>(k)) * m(k - 1, n - 1);
      m(k, n) = v * inv;
    }
  }
  return m;
}

// Hermite functions in the x (vacuum variance 1/4) convention at point x.
void hermite_functions(double x, int cutoff, std::vector<double>& out) {
  out.assign(cutoff + 1, 0.0);
  const double xi = std::numbers::sqrt2 * x;
  const double scale = std::pow(2.0, 0.25);
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * xi * xi);
  out[0] = scale * cur;
  for (int n = 0; n < cutoff; ++n) {
    const double next = std::sqrt(2.0 / (n + 1)) * xi * cur - std::sqrt(static_cast<double>(n) / (n + 1)) * prev;
    prev = cur;
    cur = next;
    out[n + 1] = scale * cur;
  }
}

FockState diagonal_condition(const FockState& state, int mode, const std::vector<double>& diag,
                             double& probability) {
  const std::size_t stride = stride_of(state.modes(), state.cutoff(), mode);
  std::vector<PureComponent> out;
  probability = 0.0;
  std::vector<double> masses;
  for (const auto& c : state.ensemble()) {
    PureComponent pc{c.weight, c.amps};
    for (std::size_t i = 0; i < pc.amps.size(); ++i) {
      pc.amps[i] *= std::sqrt(diag[digit(i, stride, state.cutoff())]);
    }
    const double mass = norm2(pc.amps);
    probability += c.weight * mass;
    masses.push_back(mass);
    out.push_back(std::move(pc));
  }
  if (!(probability > 0.0)) throw NumericalError("POVM outcome has zero probability");
  std::vector<PureComponent> kept;
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (masses[j] <= 0.0) continue;
    const double inv = 1.0 / std::sqrt(masses[j]);
    for (auto& a : out[j].amps) a *= inv;
    out[j].weight = out[j].weight * masses[j] / probability;
    kept.push_back(std::move(out[j]));
  }
  return FockState(state.modes(), state.cutoff(), std::move(kept));
}

}  // namespace

FockState::FockState(int modes, int cutoff, std::vector<PureComponent> ensemble)
    : modes_(modes), cutoff_(cutoff), ensemble_(std::move(ensemble)) {
  if (modes < 1 || modes > kMaxModes) throw std::invalid_argument("Fock oracle supports 1 to 3 modes");
  if (cutoff < 1 || cutoff > kMaxCutoff) throw std::invalid_argument("Fock cutoff must lie in [1, 60]");
  dim_ = ipow(static_cast<std::size_t>(cutoff + 1), modes);
  if (ensemble_.empty()) throw std::invalid_argument("Fock state needs at least one component");
  for (const auto& c : ensemble_) {
    if (c.amps.size() != dim_) throw std::invalid_argument("Fock amplitude tensor has wrong size");
    if (!(c.weight >= 0.0)) throw std::invalid_argument("negative ensemble weight");
  }
}

FockState FockState::product(const FockState& a, const FockState& b) {
  if (a.cutoff() != b.cutoff()) throw std::invalid_argument("product needs equal cutoffs");
  std::vector<PureComponent> out;
  out.reserve(a.ensemble().size() * b.ensemble().size());
  for (const auto& ca : a.ensemble()) {
    for (const auto& cb : b.ensemble()) {
      PureComponent pc{ca.weight * cb.weight, std::vector<Complex>(a.dim() * b.dim())};
      for (std::size_t i = 0; i < a.dim(); ++i) {
        if (ca.amps[i] == Complex(0.0)) continue;
        for (std::size_t j = 0; j < b.dim(); ++j) pc.amps[i * b.dim() + j] = ca.amps[i] * cb.amps[j];
      }
      out.push_back(std::move(pc));
    }
  }
  return FockState(a.modes() + b.modes(), a.cutoff(), std::move(out));
}

double FockState::trace() const {
  double t = 0.0;
  for (const auto& c : ensemble_) t += c.weight * norm2(c.amps);
  return t;
}

FockState build_state(const StateSpec& spec, int cutoff) {
  const int d = cutoff + 1;
  FockState state = std::visit(
      Overloaded{
          [&](const VacuumSpec&) {
            std::vector<Complex> v(d, 0.0);
            v[0] = 1.0;
            return FockState(1, cutoff, {{1.0, std::move(v)}});
          },
          [&](const CoherentSpec& s) {
            if (std::norm(s.alpha) > cutoff / 4.0) {
              throw std::invalid_argument("cutoff too small for |alpha|^2 (needs |alpha|^2 <= cutoff/4)");
            }
            std::vector<Complex> v(d);
            Complex c = std::exp(-0.5 * std::norm(s.alpha));
            for (int n = 0; n < d; ++n) {
              v[n] = c;
              c *= s.alpha / std::sqrt(static_cast<double>(n + 1));
            }
            return FockState(1, cutoff, {{1.0, std::move(v)}});
          },
          [&](const TmsvSpec& s) {
            if (!(s.v >= 1.0)) throw std::invalid_argument("TMSV variance must be >= 1");
            const double l = std::sqrt((s.v - 1.0) / (s.v + 1.0));
            std::vector<Complex> v(static_cast<std::size_t>(d) * d, 0.0);
            double c = std::sqrt(1.0 - l * l);
            for (int n = 0; n < d; ++n) {
              v[static_cast<std::size_t>(n) * d + n] = c;
              c *= l;
            }
            return FockState(2, cutoff, {{1.0, std::move(v)}});
          },
          [&](const ThermalSpec& s) {
            if (!(s.mean_photons >= 0.0)) throw std::invalid_argument("mean photon number must be >= 0");
            const double q = s.mean_photons / (1.0 + s.mean_photons);
            std::vector<PureComponent> ens;
            double w = 1.0 / (1.0 + s.mean_photons);
            for (int n = 0; n < d; ++n) {
              std::vector<Complex> v(d, 0.0);
              v[n] = 1.0;
              ens.push_back({w, std::move(v)});
              w *= q;
            }
            return FockState(1, cutoff, std::move(ens));
          },
      },
      spec);
  if (state.trace_deficit() > kBuildDeficitBound) {
    throw std::invalid_argument("cutoff too small: truncation deficit " +
                                std::to_string(state.trace_deficit()));
  }
  return state;
}

FockState fock_beamsplitter(const FockState& state, int mode_i, int mode_j, double transmissivity) {
  check_mode(state, mode_i);
  check_mode(state, mode_j);
  if (mode_i == mode_j) throw std::invalid_argument("beam splitter needs two distinct modes");
  if (!(transmissivity >= 0.0 && transmissivity <= 1.0)) {
    throw std::invalid_argument("transmissivity outside [0, 1]");
  }
  const int n_cut = state.cutoff();
  const int d = n_cut + 1;
  const auto cols = beamsplitter_columns(n_cut, std::sqrt(transmissivity), std::sqrt(1.0 - transmissivity));
  const std::size_t si = stride_of(state.modes(), n_cut, mode_i);
  const std::size_t sj = stride_of(state.modes(), n_cut, mode_j);

  std::vector<PureComponent> out;
  out.reserve(state.ensemble().size());
  for (const auto& c : state.ensemble()) {
    PureComponent pc{c.weight, std::vector<Complex>(c.amps.size(), 0.0)};
    for (std::size_t base = 0; base < c.amps.size(); ++base) {
      if (digit(base, si, n_cut) != 0 || digit(base, sj, n_cut) != 0) continue;
      for (int n = 0; n < d; ++n) {
        for (int m = 0; m < d; ++m) {
          const Complex a = c.amps[base + n * si + m * sj];
          if (a == Complex(0.0)) continue;
          const auto& col = cols[static_cast<std::size_t>(n) * d + m];
          const int total = n + m;
          for (int k = std::max(0, total - n_cut); k <= std::min(total, n_cut); ++k) {
            pc.amps[base + k * si + (total - k) * sj] += col[k] * a;
          }
        }
      }
    }
    out.push_back(std::move(pc));
  }
  FockState result(state.modes(), n_cut, std::move(out));
  if (result.trace_deficit() > kOperationDeficitBound) {
    throw NumericalError("beam splitter pushed " + std::to_string(result.trace_deficit()) +
                         " of the trace beyond the cutoff");
  }
  return result;
}

FockState fock_displace(const FockState& state, int mode, Complex alpha) {
  check_mode(state, mode);
  const Eigen::MatrixXcd dm = displacement_matrix(state.cutoff(), alpha);
  std::vector<PureComponent> out;
  for (const auto& c : state.ensemble()) {
    out.push_back({c.weight, apply_single_mode(c.amps, state.modes(), state.cutoff(), mode, dm)});
  }
  FockState result(state.modes(), state.cutoff(), std::move(out));
  if (result.trace_deficit() > kOperationDeficitBound) {
    throw NumericalError("displacement pushed weight beyond the cutoff");
  }
  return result;
}

Moments fock_moments(const FockState& state, std::span<const int> modes) {
  const int n = static_cast<int>(modes.size());
  if (n < 1) throw std::invalid_argument("moments need at least one mode");
  for (int m : modes) check_mode(state, m);
  Vector mean = Vector::Zero(2 * n);
  Matrix second = Matrix::Zero(2 * n, 2 * n);
  const double tr = state.trace();

  for (const auto& c : state.ensemble()) {
    if (c.weight == 0.0) continue;
    std::vector<std::vector<Complex>> lowered;
    for (int m : modes) lowered.push_back(annihilate(c.amps, state.modes(), state.cutoff(), m));
    for (int k = 0; k < n; ++k) {
      const Complex a_k = inner(c.amps, lowered[k]);
      mean(2 * k) += c.weight * 2.0 * a_k.real();
      mean(2 * k + 1) += c.weight * 2.0 * a_k.imag();
      for (int l = 0; l < n; ++l) {
        const auto kl = annihilate(lowered[l], state.modes(), state.cutoff(), modes[k]);
        const Complex aa = inner(c.amps, kl);              // <a_k a_l>
        const Complex ada = inner(lowered[k], lowered[l]);  // <a_k^+ a_l>
        const double delta = (k == l) ? norm2(c.amps) : 0.0;
        second(2 * k, 2 * l) += c.weight * (2.0 * aa.real() + 2.0 * ada.real() + delta);
        second(2 * k + 1, 2 * l + 1) += c.weight * (-2.0 * aa.real() + 2.0 * ada.real() + delta);
        second(2 * k, 2 * l + 1) += c.weight * (2.0 * aa.imag() + 2.0 * ada.imag());
      }
    }
  }
  mean /= tr;
  second /= tr;
  // p_k x_l entries follow from symmetry of the symmetrized moments.
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) second(2 * l + 1, 2 * k) = second(2 * k, 2 * l + 1);
  }
  Matrix cm = second - mean * mean.transpose();
  return {mean, 0.5 * (cm + cm.transpose())};
}

double mean_photon_number(const FockState& state, int mode) {
  check_mode(state, mode);
  double s = 0.0;
  for (const auto& c : state.ensemble()) {
    s += c.weight * norm2(annihilate(c.amps, state.modes(), state.cutoff(), mode));
  }
  return s / state.trace();
}

double fidelity(const FockState& pure_reference, const FockState& state) {
  if (pure_reference.ensemble().size() != 1 || pure_reference.dim() != state.dim()) {
    throw std::invalid_argument("fidelity needs a pure reference of matching dimension");
  }
  const auto& phi = pure_reference.ensemble().front().amps;
  double f = 0.0;
  for (const auto& c : state.ensemble()) f += c.weight * std::norm(inner(phi, c.amps));
  return f;
}

Eigen::MatrixXcd quadrature_interval_matrix(const QuadratureIntervalPovm& povm, int cutoff) {
  const int d = cutoff + 1;
  // Hermite functions up to the cutoff vanish (below 1e-20) beyond this.
  const double reach = (std::sqrt(2.0 * cutoff + 1.0) + 12.0) / std::numbers::sqrt2;
  using Rule = boost::math::quadrature::gauss<double, 30>;
  const auto& nodes = Rule::abscissa();
  const auto& weights = Rule::weights();

  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(d, d);
  std::vector<double> psi;
  auto accumulate = [&](double x, double w) {
    hermite_functions(x, cutoff, psi);
    for (int m = 0; m < d; ++m) {
      for (int n = 0; n <= m; ++n) overlap(m, n) += w * psi[m] * psi[n];
    }
  };
  for (auto [lo, hi] : povm.intervals) {
    if (!(hi > lo)) throw std::invalid_argument("quadrature interval must have hi > lo");
    lo = std::max(lo, -reach);
    hi = std::min(hi, reach);
    if (!(hi > lo)) continue;
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.1)));
    const double h = (hi - lo) / panels;
    for (int k = 0; k < panels; ++k) {
      const double mid = lo + (k + 0.5) * h;
      const double half = 0.5 * h;
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        accumulate(mid + half * nodes[q], half * weights[q]);
        if (nodes[q] != 0.0) accumulate(mid - half * nodes[q], half * weights[q]);
      }
    }
  }
  Eigen::MatrixXcd pi(d, d);
  for (int m = 0; m < d; ++m) {
    for (int n = 0; n < d; ++n) {
      const double v = m >= n ? overlap(m, n) : overlap(n, m);
      pi(m, n) = std::polar(v, (m - n) * povm.lo_phase);
    }
  }
  return pi;
}

PovmOutcome povm_expectation(const FockState& state, int mode, const Povm& povm) {
  check_mode(state, mode);
  const int d = state.cutoff() + 1;
  auto onoff_check = [](double eta, double pd) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("efficiency must lie in [0, 1]");
    if (!(pd >= 0.0 && pd < 1.0)) throw std::invalid_argument("dark-count probability must lie in [0, 1)");
  };
  auto noclick_diag = [&](double eta, double pd) {
    std::vector<double> diag(d);
    for (int n = 0; n < d; ++n) diag[n] = (1.0 - pd) * std::pow(1.0 - eta, n);
    return diag;
  };
  return std::visit(
      Overloaded{
          [&](const NoClickPovm& p) {
            onoff_check(p.eta, p.dark_count);
            double prob = 0.0;
            FockState s = diagonal_condition(state, mode, noclick_diag(p.eta, p.dark_count), prob);
            return PovmOutcome{prob, std::move(s)};
          },
          [&](const ClickPovm& p) {
            onoff_check(p.eta, p.dark_count);
            auto diag = noclick_diag(p.eta, p.dark_count);
            for (auto& v : diag) v = 1.0 - v;
            double prob = 0.0;
            FockState s = diagonal_condition(state, mode, diag, prob);
            return PovmOutcome{prob, std::move(s)};
          },
          [&](const QuadratureIntervalPovm& p) {
            const Eigen::MatrixXcd pi = quadrature_interval_matrix(p, state.cutoff());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(pi);
            const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            const Eigen::MatrixXcd root = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
            double prob = 0.0;
            std::vector<PureComponent> out;
            std::vector<double> masses;
            for (const auto& c : state.ensemble()) {
              auto amps = apply_single_mode(c.amps, state.modes(), state.cutoff(), mode, root);
              const double mass = norm2(amps);
              prob += c.weight * mass;
              masses.push_back(mass);
              out.push_back({c.weight, std::move(amps)});
            }
            if (!(prob > 0.0)) throw NumericalError("POVM outcome has zero probability");
            std::vector<PureComponent> kept;
            for (std::size_t j = 0; j < out.size(); ++j) {
              if (masses[j] <= 0.0) continue;
              const double inv = 1.0 / std::sqrt(masses[j]);
              for (auto& a : out[j].amps) a *= inv;
              out[j].weight *= masses[j] / prob;
              kept.push_back(std::move(out[j]));
            }
            return PovmOutcome{prob, FockState(state.modes(), state.cutoff(), std::move(kept))};
          },
      },
      povm);
}

}  // namespace vacfilter::fock
