#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace netphase {

// Construction-time unitarity tolerance. Composition chains accumulate
// rounding, so products are admitted at the looser kComposeTol.
inline constexpr double kUnitarityTol = 1e-10;
inline constexpr double kComposeTol = 1e-9;
inline constexpr double kHermiticityTol = 1e-10;

inline double unitarity_error(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd r = m.adjoint() * m;
  r -= Eigen::MatrixXcd::Identity(m.rows(), m.cols());
  return r.cwiseAbs().maxCoeff();
}

struct UnitaryCheck {
  bool ok = false;
  double residual = std::numeric_limits<double>::infinity();
};

inline UnitaryCheck check_unitary(const Eigen::MatrixXcd& m, double tol = kUnitarityTol) {
  if (m.rows() < 1 || m.rows() != m.cols()) return {};
  double r = unitarity_error(m);
  return {r <= tol, r};
}

// Square matrix validated as unitary at construction. Invalid input is a
// hard error: every downstream quantity silently degrades otherwise.
class UnitaryMatrix {
 public:
  explicit UnitaryMatrix(Eigen::MatrixXcd m, double tol = kUnitarityTol) : m_(std::move(m)) {
    if (m_.rows() < 1 || m_.rows() != m_.cols())
      throw std::invalid_argument("UnitaryMatrix: square matrix of dimension >= 1 required");
    double r = unitarity_error(m_);
    if (!(r <= tol))
      throw std::invalid_argument("UnitaryMatrix: unitarity residual " + std::to_string(r) +
                                  " exceeds tolerance " + std::to_string(tol));
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXcd& mat() const { return m_; }
  std::complex<double> operator()(int i, int j) const { return m_(i, j); }

 private:
  Eigen::MatrixXcd m_;
};

inline UnitaryMatrix adjoint(const UnitaryMatrix& u) {
  return UnitaryMatrix(u.mat().adjoint(), kComposeTol);
}

inline UnitaryMatrix compose(const UnitaryMatrix& a, const UnitaryMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("compose: dimension mismatch");
  return UnitaryMatrix(a.mat() * b.mat(), kComposeTol);
}

// Hermitian matrix validated at construction, then symmetrized exactly so
// self-adjoint solvers see an exactly Hermitian operand.
class HermitianMatrix {
 public:
  explicit HermitianMatrix(const Eigen::MatrixXcd& m, double tol = kHermiticityTol) {
    if (m.rows() < 1 || m.rows() != m.cols())
      throw std::invalid_argument("HermitianMatrix: square matrix of dimension >= 1 required");
    double r = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (!(r <= tol))
      throw std::invalid_argument("HermitianMatrix: hermiticity residual " + std::to_string(r) +
                                  " exceeds tolerance " + std::to_string(tol));
    m_ = 0.5 * (m + m.adjoint());
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXcd& mat() const { return m_; }
  std::complex<double> operator()(int i, int j) const { return m_(i, j); }

  Eigen::VectorXd eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m_, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw std::runtime_error("HermitianMatrix: eigensolver failed");
    return es.eigenvalues();
  }
  double opnorm() const { return eigenvalues().cwiseAbs().maxCoeff(); }
  double trace() const { return m_.trace().real(); }
  double trace_sq() const { return (m_ * m_).trace().real(); }

 private:
  Eigen::MatrixXcd m_;
};

}  // namespace netphase
