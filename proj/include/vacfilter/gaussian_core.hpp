#pragma once

// Covariance-matrix calculus for multimode Gaussian states.
//
// Conventions used throughout this header:
//   * quadrature ordering (x1, p1, ..., xn, pn);
//   * vacuum covariance matrix = identity (shot-noise units);
//   * a coherent state |alpha> has mean (2 Re alpha, 2 Im alpha).
// The homodyne-facing code in signal_model.hpp uses vacuum variance 1/4
// instead; quadratures differ by a factor 2 between the two systems.

#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vacfilter/errors.hpp"

namespace vacfilter {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kPhysicalityTol = 1e-9;

/// Standard symplectic form Omega = diag([[0,1],[-1,0]], ...).
Matrix symplectic_form(int modes);

/// Mean vector of a single-mode coherent state.
Eigen::Vector2d coherent_mean(std::complex<double> alpha);

/// Real symmetric 2n x 2n covariance matrix satisfying the uncertainty
/// relation Gamma + i Omega >= 0.
///
/// Construction validates symmetry (1e-12) and physicality (1e-9). With
/// `Repair::kSymmetrizeAndClip` the input is symmetrized first and, if the
/// Hermitian form has a negative eigenvalue -d, d * I is added so the result
/// is physical. Repair is off unless requested.
class CovMatrix {
 public:
  enum class Repair { kOff, kSymmetrizeAndClip };

  explicit CovMatrix(Matrix entries, Repair repair = Repair::kOff);

  static CovMatrix vacuum(int modes);
  /// Single-mode thermal state with quadrature variance nu >= 1.
  static CovMatrix thermal(double nu);
  /// Two-mode squeezed vacuum with local quadrature variance v >= 1:
  /// [[v I, c Z], [c Z, v I]], c = sqrt(v^2 - 1), Z = diag(1, -1).
  static CovMatrix tmsv(double v);
  /// Block-diagonal direct sum.
  static CovMatrix direct_sum(const CovMatrix& a, const CovMatrix& b);

  int modes() const { return static_cast<int>(m_.rows() / 2); }
  const Matrix& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

 private:
  Matrix m_;
};

/// Smallest eigenvalue of the Hermitian matrix Gamma + i Omega.
double uncertainty_margin(const Matrix& gamma);

struct GaussianComponent {
  double weight = 1.0;
  Vector mean;
  CovMatrix cm;
};

/// Weighted list of Gaussian components. Mixtures are never moment-matched
/// here; use `mixture_moments` when a single covariance matrix is wanted.
class GaussianMixtureState {
 public:
  explicit GaussianMixtureState(std::vector<GaussianComponent> components);

  static GaussianMixtureState pure(const CovMatrix& cm);
  static GaussianMixtureState pure(const CovMatrix& cm, Vector mean);
  /// Tensor product: every pair of components, weights multiplied.
  static GaussianMixtureState tensor(const GaussianMixtureState& a,
                                     const GaussianMixtureState& b);

  int modes() const { return components_.front().cm.modes(); }
  const std::vector<GaussianComponent>& components() const { return components_; }

 private:
  std::vector<GaussianComponent> components_;
};

struct Moments {
  Vector mean;
  Matrix cm;
};

/// First and second moments of the whole mixture.
Moments mixture_moments(const GaussianMixtureState& state);

/// Beam splitter on modes (i, j): x_i' = t x_i - r x_j, x_j' = r x_i + t x_j
/// with t = sqrt(T), r = sqrt(1 - T), identically on the p block. With mode j
/// in vacuum, |alpha> on mode i leaves as |t alpha> (i) and |r alpha> (j).
GaussianMixtureState apply_beamsplitter(const GaussianMixtureState& state, int mode_i,
                                        int mode_j, double transmissivity);

/// Returns S * cm * S^T for the beam-splitter symplectic S.
Matrix beamsplitter_symplectic(int modes, int mode_i, int mode_j, double transmissivity);

struct NoClickResult {
  /// Total probability of the no-click outcome.
  double weight_off = 0.0;
  /// Unnormalized per-component no-click probabilities (weight included).
  std::vector<double> component_weights;
  /// State of the remaining modes given no click, tap mode removed.
  GaussianMixtureState conditioned;
};

/// Conditions on the no-click outcome of an on/off detector with efficiency
/// eta and dark-count probability p_d on `tap_mode`. The no-click POVM
/// element (1 - p_d)(1 - eta)^n is (1 - p_d)/eta times a thermal state with
/// covariance M = (2/eta - 1) I.
NoClickResult condition_on_noclick(const GaussianMixtureState& state, int tap_mode,
                                   double eta, double dark_count);

/// Symplectic eigenvalues, ascending. Throws std::invalid_argument on a
/// non-symmetric or non-positive-definite input.
std::vector<double> symplectic_eigenvalues(const Matrix& cm);
inline std::vector<double> symplectic_eigenvalues(const CovMatrix& cm) {
  return symplectic_eigenvalues(cm.matrix());
}

/// g(y) = (y+1) log2(y+1) - y log2 y, g(0) = 0. Entropy in bits of a
/// thermal mode with mean photon number y.
double thermal_entropy(double mean_photons);

/// Von Neumann entropy in bits.
double gaussian_entropy(const CovMatrix& cm);

}  // namespace vacfilter
