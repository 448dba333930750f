#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

#include "linalg.hpp"
#include "network.hpp"
#include "random.hpp"

namespace netphase {

enum class AdaptedSide { Input, Output };

// Unitary whose first column is exactly the prescribed unit vector,
// completed by a Householder frame.
inline UnitaryMatrix complete_first_column(Eigen::VectorXcd v) {
  if (v.size() < 1) throw std::invalid_argument("complete_first_column: empty prescription");
  double n = v.norm();
  if (std::fabs(n - 1.0) > 1e-8)
    throw std::invalid_argument("complete_first_column: prescribed column must be a unit vector");
  v /= n;
  Eigen::MatrixXcd column = v;
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(column);
  Eigen::MatrixXcd q = qr.householderQ();
  // q e_1 = v / r with |r| = 1; absorb the phase and pin the column exactly.
  std::complex<double> r = (q.adjoint() * v)(0);
  q.col(0) *= r / std::abs(r);
  q.col(0) = v;
  return UnitaryMatrix(q, 1e-9);
}

// Output-side refocusing: first row of V_out set to (V_in^dag U_est^dag)_1.
// Then (V_out U_est V_in)_11 = 1 exactly, up to rounding.
inline UnitaryMatrix refocus_output(const UnitaryMatrix& u_est, const UnitaryMatrix& v_in) {
  if (u_est.dim() != v_in.dim()) throw std::invalid_argument("refocus_output: dimension mismatch");
  Eigen::RowVectorXcd w = (v_in.mat().adjoint() * u_est.mat().adjoint()).row(0);
  UnitaryMatrix c = complete_first_column(w.adjoint());
  return UnitaryMatrix(c.mat().adjoint(), 1e-9);
}

// Input-side refocusing: first column of V_in set to (U_est^dag V_out^dag)
// applied to e_1.
inline UnitaryMatrix refocus_input(const UnitaryMatrix& u_est, const UnitaryMatrix& v_out) {
  if (u_est.dim() != v_out.dim()) throw std::invalid_argument("refocus_input: dimension mismatch");
  Eigen::VectorXcd v = (u_est.mat().adjoint() * v_out.mat().adjoint()).col(0);
  return complete_first_column(v);
}

// Random direction for stage errors: Hermitian with standard complex normal
// off-diagonals and real normal diagonals, rescaled to unit operator norm.
inline HermitianMatrix random_hermitian_direction(int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("random_hermitian_direction: dimension must be >= 1");
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::MatrixXcd h(m, m);
    for (int i = 0; i < m; ++i) {
      h(i, i) = standard_normal(rng);
      for (int j = i + 1; j < m; ++j) {
        std::complex<double> z = complex_normal(rng) / std::sqrt(2.0);
        h(i, j) = z;
        h(j, i) = std::conj(z);
      }
    }
    HermitianMatrix hm(h);
    double nrm = hm.opnorm();
    if (nrm < 1e-12) continue;
    return HermitianMatrix(hm.mat() / nrm);
  }
  throw std::runtime_error("random_hermitian_direction: repeated degenerate draws");
}

// Applies a coherent error e^{i eps H} to a stage, H a random Hermitian
// direction of unit operator norm. The exponential is taken by
// eigendecomposition, so the result is unitary to rounding.
inline UnitaryMatrix perturb_stage(const UnitaryMatrix& v, double eps, Rng& rng) {
  if (!(eps >= 0.0)) throw std::invalid_argument("perturb_stage: eps must be >= 0");
  if (eps == 0.0) return v;
  HermitianMatrix h = random_hermitian_direction(v.dim(), rng);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.mat());
  if (es.info() != Eigen::Success) throw std::runtime_error("perturb_stage: eigensolver failed");
  Eigen::VectorXcd phases(v.dim());
  for (int j = 0; j < v.dim(); ++j)
    phases(j) = std::polar(1.0, eps * es.eigenvalues()(j));
  Eigen::MatrixXcd expm =
      es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return UnitaryMatrix(expm * v.mat(), kComposeTol);
}

// Leakage in photon units: l = N (1 - P), clamped at zero against rounding.
inline double ell_of(double p, double photons) {
  if (!(photons > 0.0)) throw std::invalid_argument("ell_of: photon number must be > 0");
  if (!(p >= 0.0 && p <= 1.0 + 1e-9)) throw std::invalid_argument("ell_of: P must lie in [0, 1]");
  return std::max(0.0, photons * (1.0 - p));
}

// An input/output stage pair around the network, with a record of which side
// was adapted and the size of the coherent error applied to it.
struct StagePair {
  UnitaryMatrix v_in;
  UnitaryMatrix v_out;
  AdaptedSide adapted_side = AdaptedSide::Output;
  double epsilon = 0.0;
};

// Builds the exactly refocused pair against the network estimate `u_est`,
// keeping the given stage on the non-adapted side.
inline StagePair make_refocused_pair(const UnitaryMatrix& u_est, const UnitaryMatrix& non_adapted,
                                     AdaptedSide side) {
  if (side == AdaptedSide::Output)
    return {non_adapted, refocus_output(u_est, non_adapted), side, 0.0};
  return {refocus_input(u_est, non_adapted), non_adapted, side, 0.0};
}

}  // namespace netphase
