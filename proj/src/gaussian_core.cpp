#include "vacfilter/gaussian_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vacfilter {

namespace {

void check_square_even(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || m.rows() % 2 != 0) {
    throw std::invalid_argument("covariance matrix must be square with even, nonzero dimension");
  }
}

void check_symmetric(const Matrix& m) {
  check_square_even(m);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    throw std::invalid_argument("covariance matrix is not symmetric (max asymmetry " +
                                std::to_string(asym) + ")");
  }
}

void check_mode(int mode, int modes, const char* what) {
  if (mode < 0 || mode >= modes) {
    throw std::out_of_range(std::string(what) + " index " + std::to_string(mode) +
                            " out of range for " + std::to_string(modes) + " modes");
  }
}

// Quadrature indices of every mode except `removed`.
std::vector<int> rest_indices(int modes, int removed) {
  std::vector<int> idx;
  idx.reserve(2 * (modes - 1));
  for (int k = 0; k < modes; ++k) {
    if (k == removed) continue;
    idx.push_back(2 * k);
    idx.push_back(2 * k + 1);
  }
  return idx;
}

}  // namespace

Matrix symplectic_form(int modes) {
  Matrix omega = Matrix::Zero(2 * modes, 2 * modes);
  for (int k = 0; k < modes; ++k) {
    omega(2 * k, 2 * k + 1) = 1.0;
    omega(2 * k + 1, 2 * k) = -1.0;
  }
  return omega;
}

Eigen::Vector2d coherent_mean(std::complex<double> alpha) {
  return {2.0 * alpha.real(), 2.0 * alpha.imag()};
}

double uncertainty_margin(const Matrix& gamma) {
  const int n = static_cast<int>(gamma.rows() / 2);
  Eigen::MatrixXcd h = gamma.cast<std::complex<double>>();
  h += std::complex<double>(0.0, 1.0) * symplectic_form(n).cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

CovMatrix::CovMatrix(Matrix entries, Repair repair) : m_(std::move(entries)) {
  if (repair == Repair::kSymmetrizeAndClip) {
    check_square_even(m_);
    m_ = 0.5 * (m_ + m_.transpose()).eval();
    const double margin = uncertainty_margin(m_);
    if (margin < 0.0) {
      m_ += (-margin) * Matrix::Identity(m_.rows(), m_.cols());
    }
    return;
  }
  check_symmetric(m_);
  const double margin = uncertainty_margin(m_);
  if (margin < -kPhysicalityTol) {
    throw std::invalid_argument("covariance matrix violates the uncertainty relation (margin " +
                                std::to_string(margin) + ")");
  }
}

CovMatrix CovMatrix::vacuum(int modes) {
  if (modes < 1) throw std::invalid_argument("vacuum needs at least one mode");
  return CovMatrix(Matrix::Identity(2 * modes, 2 * modes));
}

CovMatrix CovMatrix::thermal(double nu) {
  if (!(nu >= 1.0)) throw std::invalid_argument("thermal variance must be >= 1");
  return CovMatrix(nu * Matrix::Identity(2, 2));
}

CovMatrix CovMatrix::tmsv(double v) {
  if (!(v >= 1.0)) throw std::invalid_argument("TMSV variance must be >= 1");
  const double c = std::sqrt(v * v - 1.0);
  Matrix m = Matrix::Zero(4, 4);
  m.diagonal().setConstant(v);
  m(0, 2) = m(2, 0) = c;
  m(1, 3) = m(3, 1) = -c;
  return CovMatrix(std::move(m));
}

CovMatrix CovMatrix::direct_sum(const CovMatrix& a, const CovMatrix& b) {
  const auto na = a.matrix().rows();
  const auto nb = b.matrix().rows();
  Matrix m = Matrix::Zero(na + nb, na + nb);
  m.topLeftCorner(na, na) = a.matrix();
  m.bottomRightCorner(nb, nb) = b.matrix();
  return CovMatrix(std::move(m));
}

GaussianMixtureState::GaussianMixtureState(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  const int modes = components_.front().cm.modes();
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight >= 0.0 && c.weight <= 1.0)) {
      throw std::invalid_argument("component weight outside [0, 1]");
    }
    if (c.cm.modes() != modes || c.mean.size() != 2 * modes) {
      throw std::invalid_argument("component dimensions disagree");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture weights sum to " + std::to_string(total));
  }
}

GaussianMixtureState GaussianMixtureState::pure(const CovMatrix& cm) {
  return pure(cm, Vector::Zero(cm.matrix().rows()));
}

GaussianMixtureState GaussianMixtureState::pure(const CovMatrix& cm, Vector mean) {
  return GaussianMixtureState({GaussianComponent{1.0, std::move(mean), cm}});
}

GaussianMixtureState GaussianMixtureState::tensor(const GaussianMixtureState& a,
                                                  const GaussianMixtureState& b) {
  std::vector<GaussianComponent> out;
  out.reserve(a.components().size() * b.components().size());
  for (const auto& ca : a.components()) {
    for (const auto& cb : b.components()) {
      Vector mean(ca.mean.size() + cb.mean.size());
      mean << ca.mean, cb.mean;
      out.push_back({ca.weight * cb.weight, std::move(mean), CovMatrix::direct_sum(ca.cm, cb.cm)});
    }
  }
  return GaussianMixtureState(std::move(out));
}

Moments mixture_moments(const GaussianMixtureState& state) {
  const auto dim = 2 * state.modes();
  Vector mean = Vector::Zero(dim);
  Matrix second = Matrix::Zero(dim, dim);
  for (const auto& c : state.components()) {
    mean += c.weight * c.mean;
    second += c.weight * (c.cm.matrix() + c.mean * c.mean.transpose());
  }
  return {mean, second - mean * mean.transpose()};
}

Matrix beamsplitter_symplectic(int modes, int mode_i, int mode_j, double transmissivity) {
  check_mode(mode_i, modes, "beam splitter mode");
  check_mode(mode_j, modes, "beam splitter mode");
  if (mode_i == mode_j) throw std::invalid_argument("beam splitter needs two distinct modes");
  if (!(transmissivity >= 0.0 && transmissivity <= 1.0)) {
    throw std::invalid_argument("transmissivity outside [0, 1]");
  }
  const double t = std::sqrt(transmissivity);
  const double r = std::sqrt(1.0 - transmissivity);
  Matrix s = Matrix::Identity(2 * modes, 2 * modes);
  for (int q = 0; q < 2; ++q) {
    const int i = 2 * mode_i + q;
    const int j = 2 * mode_j + q;
    s(i, i) = t;
    s(i, j) = -r;
    s(j, i) = r;
    s(j, j) = t;
  }
  return s;
}

GaussianMixtureState apply_beamsplitter(const GaussianMixtureState& state, int mode_i,
                                        int mode_j, double transmissivity) {
  const Matrix s = beamsplitter_symplectic(state.modes(), mode_i, mode_j, transmissivity);
  std::vector<GaussianComponent> out;
  out.reserve(state.components().size());
  for (const auto& c : state.components()) {
    Matrix cm = s * c.cm.matrix() * s.transpose();
    cm = 0.5 * (cm + cm.transpose()).eval();
    out.push_back({c.weight, s * c.mean, CovMatrix(std::move(cm))});
  }
  return GaussianMixtureState(std::move(out));
}

NoClickResult condition_on_noclick(const GaussianMixtureState& state, int tap_mode, double eta,
                                   double dark_count) {
  const int modes = state.modes();
  if (modes < 2) throw std::invalid_argument("conditioning needs at least two modes");
  check_mode(tap_mode, modes, "tap");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("efficiency must lie in (0, 1]");
  if (!(dark_count >= 0.0 && dark_count < 1.0)) {
    throw std::invalid_argument("dark-count probability must lie in [0, 1)");
  }

  const Eigen::Matrix2d measurement = (2.0 / eta - 1.0) * Eigen::Matrix2d::Identity();
  const std::vector<int> rest = rest_indices(modes, tap_mode);
  const int t0 = 2 * tap_mode;
  const int nr = static_cast<int>(rest.size());

  NoClickResult result{0.0, {}, GaussianMixtureState::pure(CovMatrix::vacuum(1))};
  std::vector<GaussianComponent> conditioned;
  conditioned.reserve(state.components().size());

  for (const auto& c : state.components()) {
    const Matrix& g = c.cm.matrix();
    const Eigen::Matrix2d tap_block = g.block<2, 2>(t0, t0);
    const Eigen::Vector2d tap_mean = c.mean.segment<2>(t0);
    Matrix cross(nr, 2);
    Matrix rest_block(nr, nr);
    Vector rest_mean(nr);
    for (int a = 0; a < nr; ++a) {
      cross(a, 0) = g(rest[a], t0);
      cross(a, 1) = g(rest[a], t0 + 1);
      rest_mean(a) = c.mean(rest[a]);
      for (int b = 0; b < nr; ++b) rest_block(a, b) = g(rest[a], rest[b]);
    }

    const Eigen::Matrix2d sum = tap_block + measurement;
    const double det = sum.determinant();
    if (!(det > 0.0)) throw NumericalError("singular tap covariance in no-click conditioning");
    const Eigen::Matrix2d inv = sum.inverse();

    const double exponent = -0.5 * tap_mean.dot(inv * tap_mean);
    const double w = c.weight * (1.0 - dark_count) * (2.0 / eta) * std::exp(exponent) /
                     std::sqrt(det);
    result.component_weights.push_back(w);
    result.weight_off += w;

    Matrix cm = rest_block - cross * inv * cross.transpose();
    cm = 0.5 * (cm + cm.transpose()).eval();
    conditioned.push_back({w, rest_mean - cross * (inv * tap_mean), CovMatrix(std::move(cm))});
  }

  if (!(result.weight_off > 0.0)) {
    throw NumericalError("no-click outcome has zero probability");
  }
  for (auto& c : conditioned) c.weight /= result.weight_off;
  // Renormalized weights can drift from 1 by rounding; pin the last one.
  double head = 0.0;
  for (std::size_t k = 0; k + 1 < conditioned.size(); ++k) head += conditioned[k].weight;
  conditioned.back().weight = std::clamp(1.0 - head, 0.0, 1.0);
  result.conditioned = GaussianMixtureState(std::move(conditioned));
  return result;
}

std::vector<double> symplectic_eigenvalues(const Matrix& cm) {
  check_symmetric(cm);
  const int n = static_cast<int>(cm.rows() / 2);
  Eigen::SelfAdjointEigenSolver<Matrix> spd(cm);
  if (spd.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("covariance matrix is not positive definite");
  }
  const Matrix root = spd.operatorSqrt();
  const Matrix antisym = root * symplectic_form(n) * root;
  Eigen::MatrixXcd h = std::complex<double>(0.0, 1.0) * antisym.cast<std::complex<double>>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> herm(h, Eigen::EigenvaluesOnly);
  // Eigenvalues come in +-nu pairs, ascending; the upper half are the nu_k.
  std::vector<double> nu(n);
  for (int k = 0; k < n; ++k) nu[k] = herm.eigenvalues()(n + k);
  std::sort(nu.begin(), nu.end());
  return nu;
}

double thermal_entropy(double mean_photons) {
  if (mean_photons <= 0.0) return 0.0;
  const double y = mean_photons;
  return (y + 1.0) * std::log2(y + 1.0) - y * std::log2(y);
}

double gaussian_entropy(const CovMatrix& cm) {
  double s = 0.0;
  for (double nu : symplectic_eigenvalues(cm)) s += thermal_entropy(0.5 * (nu - 1.0));
  return s;
}

}  // namespace vacfilter
