#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linalg.hpp"
#include "random.hpp"

namespace netphase {

// Single-mode squeezed vacuum feeding input port 1; all other ports see
// vacuum. Mean photon number and squeezing parameter are locked together by
// photons = sinh^2(r).
struct SqueezedProbe {
  double r = 0.0;
  double photons = 0.0;
};

inline void validate_probe(const SqueezedProbe& p) {
  if (!(p.r >= 0.0)) throw std::invalid_argument("SqueezedProbe: r must be >= 0");
  double n = std::sinh(p.r) * std::sinh(p.r);
  if (std::fabs(n - p.photons) > 1e-12 * std::max(1.0, p.photons))
    throw std::invalid_argument("SqueezedProbe: photons != sinh^2(r)");
}

inline SqueezedProbe make_probe_from_r(double r) {
  if (!(r >= 0.0)) throw std::invalid_argument("make_probe_from_r: r must be >= 0");
  SqueezedProbe p{r, std::sinh(r) * std::sinh(r)};
  return p;
}

inline SqueezedProbe make_probe_from_photons(double photons) {
  if (!(photons >= 0.0)) throw std::invalid_argument("make_probe_from_photons: photons must be >= 0");
  SqueezedProbe p{std::asinh(std::sqrt(photons)), photons};
  return p;
}

// 2M x 2M quadrature covariance, ordered (x_1..x_M, p_1..p_M). Validated
// symmetric, positive definite, and physical (symplectic spectrum >= 1/2).
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(Eigen::MatrixXd g) : g_(std::move(g)) {
    if (g_.rows() < 2 || g_.rows() != g_.cols() || g_.rows() % 2 != 0)
      throw std::invalid_argument("CovarianceMatrix: need even dimension >= 2");
    double scale = std::max(1.0, g_.cwiseAbs().maxCoeff());
    if ((g_ - g_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw std::invalid_argument("CovarianceMatrix: not symmetric");
    g_ = 0.5 * (g_ + g_.transpose().eval());
    Eigen::LLT<Eigen::MatrixXd> llt(g_);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("CovarianceMatrix: not positive definite");
    double nu_min = symplectic_spectrum_of(g_).minCoeff();
    if (nu_min < 0.5 - 1e-9)
      throw std::invalid_argument("CovarianceMatrix: symplectic eigenvalue " +
                                  std::to_string(nu_min) + " below the vacuum floor");
  }

  int dim() const { return static_cast<int>(g_.rows()); }
  int modes() const { return static_cast<int>(g_.rows()) / 2; }
  const Eigen::MatrixXd& mat() const { return g_; }

  // Symplectic spectrum |eig(Omega Gamma)|, M values sorted ascending.
  static Eigen::VectorXd symplectic_spectrum_of(const Eigen::MatrixXd& g) {
    int m = static_cast<int>(g.rows()) / 2;
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    omega.topRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
    omega.bottomLeftCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
    Eigen::EigenSolver<Eigen::MatrixXd> es(omega * g);
    if (es.info() != Eigen::Success) throw std::runtime_error("symplectic spectrum: eigensolver failed");
    std::vector<double> a(2 * static_cast<std::size_t>(m));
    for (int i = 0; i < 2 * m; ++i) a[static_cast<std::size_t>(i)] = std::abs(es.eigenvalues()(i));
    std::sort(a.begin(), a.end());
    Eigen::VectorXd nu(m);
    for (int i = 0; i < m; ++i) nu(i) = 0.5 * (a[2 * static_cast<std::size_t>(i)] + a[2 * static_cast<std::size_t>(i) + 1]);
    return nu;
  }

 private:
  Eigen::MatrixXd g_;
};

inline Eigen::VectorXd symplectic_eigenvalues(const CovarianceMatrix& g) {
  return CovarianceMatrix::symplectic_spectrum_of(g.mat());
}

// Orthogonal symplectic embedding of a unitary: R = [[Re U, -Im U],
// [Im U, Re U]] in (x | p) block order.
inline Eigen::MatrixXd symplectic_embed(const UnitaryMatrix& u) {
  int m = u.dim();
  Eigen::MatrixXd r(2 * m, 2 * m);
  r.topLeftCorner(m, m) = u.mat().real();
  r.topRightCorner(m, m) = -u.mat().imag();
  r.bottomLeftCorner(m, m) = u.mat().imag();
  r.bottomRightCorner(m, m) = u.mat().real();
  Eigen::MatrixXd ortho = r.transpose() * r - Eigen::MatrixXd::Identity(2 * m, 2 * m);
  if (ortho.cwiseAbs().maxCoeff() > 1e-10)
    throw std::logic_error("symplectic_embed: embedding not orthogonal");
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  omega.topRightCorner(m, m) = Eigen::MatrixXd::Identity(m, m);
  omega.bottomLeftCorner(m, m) = -Eigen::MatrixXd::Identity(m, m);
  if ((r.transpose() * omega * r - omega).cwiseAbs().maxCoeff() > 1e-10)
    throw std::logic_error("symplectic_embed: embedding not symplectic");
  return r;
}

// Gamma = R Gamma_0 R^T with Gamma_0 the squeezed-port-1 input covariance:
// diag entry e^{2r}/2 at x_1, e^{-2r}/2 at p_1, vacuum 1/2 elsewhere.
inline CovarianceMatrix propagate_covariance(const UnitaryMatrix& u, const SqueezedProbe& probe) {
  validate_probe(probe);
  int m = u.dim();
  Eigen::MatrixXd r = symplectic_embed(u);
  Eigen::VectorXd d0 = Eigen::VectorXd::Constant(2 * m, 0.5);
  d0(0) = 0.5 * std::exp(2.0 * probe.r);
  d0(m) = 0.5 * std::exp(-2.0 * probe.r);
  Eigen::MatrixXd g = r * d0.asDiagonal() * r.transpose();
  double photons_out = 0.5 * g.trace() - 0.5 * m;
  if (std::fabs(photons_out - probe.photons) > 1e-9 * std::max(1.0, probe.photons))
    throw std::logic_error("propagate_covariance: photon number not conserved");
  return CovarianceMatrix(g);
}

// (x_1, p_1) marginal of the output covariance.
inline Eigen::Matrix2d reduced_sigma(const CovarianceMatrix& g) {
  int m = g.modes();
  Eigen::Matrix2d s;
  s << g.mat()(0, 0), g.mat()(0, m), g.mat()(m, 0), g.mat()(m, m);
  return s;
}

// Same marginal straight from the top-left transition amplitude u11: only
// the squeezed input port deviates from vacuum, so the reduced state depends
// on the network through u11 alone.
inline Eigen::Matrix2d mode1_sigma(std::complex<double> u11, const SqueezedProbe& probe) {
  double a = u11.real(), b = u11.imag();
  double kp = 0.5 * (std::exp(2.0 * probe.r) - 1.0);
  double km = 0.5 * (std::exp(-2.0 * probe.r) - 1.0);
  Eigen::Matrix2d s;
  s(0, 0) = 0.5 + kp * a * a + km * b * b;
  s(1, 1) = 0.5 + kp * b * b + km * a * a;
  s(0, 1) = s(1, 0) = a * b * (kp - km);
  return s;
}

// Quadrature variance of <sigma> along angle theta: (O^T sigma O)_11 with O
// the rotation by theta.
inline double quadrature_variance(const Eigen::Matrix2d& sigma, double theta) {
  double c = std::cos(theta), s = std::sin(theta);
  return c * c * sigma(0, 0) + 2.0 * c * s * sigma(0, 1) + s * s * sigma(1, 1);
}

// Homodyne variance at angle theta for transition amplitude u11,
// Delta = (1 + |u11|^2 (cosh 2r - 1) + Re[e^{-2 i theta} u11^2] sinh 2r) / 2.
// Computed by two independent routes (closed form and rotated reduced
// covariance) that must agree; a mismatch means a broken pipeline.
inline double homodyne_variance(std::complex<double> u11, const SqueezedProbe& probe, double theta) {
  validate_probe(probe);
  if (std::abs(u11) > 1.0 + 1e-9)
    throw std::domain_error("homodyne_variance: |u11| > 1 signals a non-unitary pipeline");
  double p2 = std::norm(u11);
  // Evaluate through cosh 2r + cos(2d) sinh 2r = e^{-2r} + 2 cos^2(d) sinh 2r
  // (d = gamma - theta): every term is nonnegative, so the dark-port value
  // ~e^{-2r}/2 survives where the textbook grouping cancels to roundoff.
  double cd = std::cos(std::arg(u11) - theta);
  double closed =
      0.5 * ((1.0 - p2) +
             p2 * (std::exp(-2.0 * probe.r) + 2.0 * cd * cd * std::sinh(2.0 * probe.r)));
  double routed = quadrature_variance(mode1_sigma(u11, probe), theta);
  // both routes cancel terms of size cosh 2r near the squeezed axis, so the
  // agreement tolerance must scale with what is cancelled, not the result
  double scale = 1.0 + p2 * (std::cosh(2.0 * probe.r) + std::sinh(2.0 * probe.r));
  if (std::fabs(closed - routed) > 1e-12 * scale)
    throw std::logic_error("homodyne_variance: closed form and covariance route disagree");
  return closed;
}

// Homodyne detector at angle theta on output port 1. The variance of any
// single quadrature is bracketed by the principal squeezing values.
struct HomodyneModel {
  double theta = 0.0;
  double variance = 0.5;
};

inline HomodyneModel make_homodyne_model(std::complex<double> u11, const SqueezedProbe& probe,
                                         double theta) {
  double v = homodyne_variance(u11, probe, theta);
  double hi = 0.5 * std::exp(2.0 * probe.r);
  double lo = 0.5 * std::exp(-2.0 * probe.r);
  double tol = 1e-9 * std::max(1.0, hi);
  if (v < lo - tol || v > hi + tol)
    throw std::logic_error("make_homodyne_model: variance outside the physical squeezing window");
  return {theta, v};
}

// Zero-mean Gaussian outcome density with the given variance.
inline double outcome_density(double x, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("outcome_density: variance must be > 0");
  return std::exp(-0.5 * x * x / variance) / std::sqrt(2.0 * M_PI * variance);
}

inline std::vector<double> sample_outcomes(double variance, long long count, Rng& rng) {
  if (!(variance > 0.0)) throw std::invalid_argument("sample_outcomes: variance must be > 0");
  if (count < 0) throw std::invalid_argument("sample_outcomes: count must be >= 0");
  double s = std::sqrt(variance);
  std::vector<double> x(static_cast<std::size_t>(count));
  for (auto& v : x) v = s * standard_normal(rng);
  return x;
}

// Characteristic function of the homodyne outcome, exp(-xi^2 Delta / 2);
// its inverse Fourier transform is the outcome density.
inline double characteristic_function(double xi, double variance) {
  if (!(variance > 0.0)) throw std::invalid_argument("characteristic_function: variance must be > 0");
  return std::exp(-0.5 * xi * xi * variance);
}

}  // namespace netphase
