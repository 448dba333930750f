#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "linalg.hpp"
#include "random.hpp"

namespace netphase {

// A one-parameter family of passive networks phi -> U(phi). The analytic
// generator hook is optional; when absent the finite-difference path is used.
struct NetworkFamily {
  int dim = 0;
  std::string label;
  std::function<UnitaryMatrix(double)> evaluate;
  std::function<HermitianMatrix(double)> analytic_generator;
};

// diag(e^{i w_j phi}): the phase is distributed over all M ports with
// per-port winding rates w_j. Generator is -diag(w), independent of phi.
inline NetworkFamily make_phase_distributed_family(int m, const Eigen::VectorXd& weights) {
  if (m < 1) throw std::invalid_argument("make_phase_distributed_family: dimension must be >= 1");
  if (weights.size() != m)
    throw std::invalid_argument("make_phase_distributed_family: weights length must equal the dimension");
  if (!weights.allFinite())
    throw std::invalid_argument("make_phase_distributed_family: weights must be finite");

  Eigen::VectorXd w = weights;
  NetworkFamily fam;
  fam.dim = m;
  fam.label = "phase-distributed";
  fam.evaluate = [w, m](double phi) {
    Eigen::VectorXcd d(m);
    for (int j = 0; j < m; ++j) d(j) = std::polar(1.0, w(j) * phi);
    return UnitaryMatrix(Eigen::MatrixXcd(d.asDiagonal()));
  };
  fam.analytic_generator = [w](double) {
    Eigen::VectorXcd d = (-w).cast<std::complex<double>>();
    return HermitianMatrix(Eigen::MatrixXcd(d.asDiagonal()));
  };
  return fam;
}

struct MeshElement {
  enum class Kind { Beamsplitter, PhaseShift };
  Kind kind = Kind::PhaseShift;
  int port_a = 0;
  int port_b = 0;          // beamsplitter only
  double transmissivity = 1.0;  // beamsplitter only, in [0, 1]
  double phase = 0.0;      // static offset chi
};

inline MeshElement beamsplitter(int a, int b, double transmissivity, double chi = 0.0) {
  if (a == b) throw std::invalid_argument("beamsplitter: ports must differ");
  if (!(transmissivity >= 0.0 && transmissivity <= 1.0))
    throw std::invalid_argument("beamsplitter: transmissivity must lie in [0, 1]");
  MeshElement e;
  e.kind = MeshElement::Kind::Beamsplitter;
  e.port_a = a;
  e.port_b = b;
  e.transmissivity = transmissivity;
  e.phase = chi;
  return e;
}

inline MeshElement phase_shift(int port, double chi) {
  MeshElement e;
  e.kind = MeshElement::Kind::PhaseShift;
  e.port_a = port;
  e.phase = chi;
  return e;
}

// Marks mesh element `element_index` (a phase shifter) as carrying the
// unknown phase, scaled by `weight`.
struct PhiSlot {
  std::size_t element_index = 0;
  double weight = 1.0;
};

// Ordered product of 2x2 beamsplitter blocks and single-port phase shifts;
// elements act in listed order, U(phi) = E_n ... E_2 E_1. The beamsplitter
// block is [[sqrt(T), sqrt(1-T) e^{i chi}], [sqrt(1-T) e^{-i chi}, -sqrt(T)]].
inline NetworkFamily make_beamsplitter_mesh_family(int m, std::vector<MeshElement> mesh,
                                                   const std::vector<PhiSlot>& phi_slots) {
  if (m < 1) throw std::invalid_argument("make_beamsplitter_mesh_family: dimension must be >= 1");
  for (const MeshElement& e : mesh) {
    if (e.port_a < 0 || e.port_a >= m ||
        (e.kind == MeshElement::Kind::Beamsplitter && (e.port_b < 0 || e.port_b >= m)))
      throw std::invalid_argument("make_beamsplitter_mesh_family: element port out of range");
    if (e.kind == MeshElement::Kind::Beamsplitter &&
        !(e.transmissivity >= 0.0 && e.transmissivity <= 1.0))
      throw std::invalid_argument("make_beamsplitter_mesh_family: transmissivity out of range");
  }
  std::vector<double> slot_weight(mesh.size(), 0.0);
  for (const PhiSlot& s : phi_slots) {
    if (s.element_index >= mesh.size())
      throw std::invalid_argument("make_beamsplitter_mesh_family: phi slot index out of range");
    if (mesh[s.element_index].kind != MeshElement::Kind::PhaseShift)
      throw std::invalid_argument("make_beamsplitter_mesh_family: phi slot must point at a phase shifter");
    slot_weight[s.element_index] += s.weight;
  }

  NetworkFamily fam;
  fam.dim = m;
  fam.label = "beamsplitter-mesh";
  fam.evaluate = [m, mesh = std::move(mesh), slot_weight](double phi) {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(m, m);
    for (std::size_t idx = 0; idx < mesh.size(); ++idx) {
      const MeshElement& e = mesh[idx];
      if (e.kind == MeshElement::Kind::PhaseShift) {
        u.row(e.port_a) *= std::polar(1.0, e.phase + slot_weight[idx] * phi);
      } else {
        double t = std::sqrt(e.transmissivity);
        double rr = std::sqrt(1.0 - e.transmissivity);
        std::complex<double> off = rr * std::polar(1.0, e.phase);
        Eigen::RowVectorXcd ra = u.row(e.port_a), rb = u.row(e.port_b);
        u.row(e.port_a) = t * ra + off * rb;
        u.row(e.port_b) = std::conj(off) * ra - t * rb;
      }
    }
    return UnitaryMatrix(u);
  };
  return fam;
}

// Brick-pattern random mesh: per layer, a phase on every port (the first one
// carrying the phi slot), then 2x2 splitters on alternating pairs. Built
// deterministically from the seed.
inline NetworkFamily make_random_mesh_family(int m, int layers, std::uint64_t seed) {
  if (m < 1 || layers < 1)
    throw std::invalid_argument("make_random_mesh_family: dimension and layer count must be >= 1");
  Rng rng = make_rng(seed);
  std::vector<MeshElement> mesh;
  std::vector<PhiSlot> slots;
  for (int layer = 0; layer < layers; ++layer) {
    std::size_t first_phase = mesh.size();
    for (int p = 0; p < m; ++p) mesh.push_back(phase_shift(p, 2.0 * M_PI * uniform01(rng)));
    slots.push_back({first_phase, 0.5 + uniform01(rng)});
    for (int a = layer % 2; a + 1 < m; a += 2)
      mesh.push_back(beamsplitter(a, a + 1, 0.15 + 0.7 * uniform01(rng), 2.0 * M_PI * uniform01(rng)));
  }
  NetworkFamily fam = make_beamsplitter_mesh_family(m, std::move(mesh), slots);
  fam.label = "random-mesh(seed=" + std::to_string(seed) + ")";
  return fam;
}

// Generator G = i U(phi)^dag dU/dphi via the symmetric difference
// (U(phi+h) - U(phi-h)) / 2h. Second-order accurate in h. A non-Hermitian
// result beyond 1e-6 signals a discontinuous family or an oversized step.
inline HermitianMatrix finite_difference_generator(const NetworkFamily& fam, double phi,
                                                   double step = 1e-5) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_generator: step must be > 0");
  if (!fam.evaluate) throw std::invalid_argument("finite_difference_generator: family has no evaluator");
  Eigen::MatrixXcd up = fam.evaluate(phi + step).mat();
  Eigen::MatrixXcd um = fam.evaluate(phi - step).mat();
  Eigen::MatrixXcd u0 = fam.evaluate(phi).mat();
  Eigen::MatrixXcd g = std::complex<double>(0.0, 1.0) * (u0.adjoint() * ((up - um) / (2.0 * step)));
  double res = (g - g.adjoint()).cwiseAbs().maxCoeff();
  if (res > 1e-6)
    throw std::runtime_error("finite_difference_generator: non-Hermitian residual " +
                             std::to_string(res) + "; reduce the step or fix the family");
  return HermitianMatrix(0.5 * (g + g.adjoint()));
}

inline HermitianMatrix generator(const NetworkFamily& fam, double phi, double step = 1e-5) {
  if (fam.analytic_generator) return fam.analytic_generator(phi);
  return finite_difference_generator(fam, phi, step);
}

// Haar-distributed unitary: QR of a Ginibre matrix with the diagonal phase
// correction Q -> Q diag(r_jj / |r_jj|). Degenerate draws (a vanishing R
// diagonal) are resampled.
inline UnitaryMatrix haar_unitary(int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("haar_unitary: dimension must be >= 1");
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::MatrixXcd z = ginibre(m, rng);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(z);
    Eigen::VectorXcd d = qr.matrixQR().diagonal();
    bool degenerate = false;
    for (int j = 0; j < m; ++j)
      if (std::abs(d(j)) < 1e-12) { degenerate = true; break; }
    if (degenerate) continue;
    Eigen::MatrixXcd q = qr.householderQ();
    for (int j = 0; j < m; ++j) q.col(j) *= d(j) / std::abs(d(j));
    return UnitaryMatrix(q);
  }
  throw std::runtime_error("haar_unitary: repeated degenerate draws");
}

}  // namespace netphase
