#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace netphase {

// SplitMix64 step: advances `state` by the golden-gamma increment and returns
// the scrambled output. Bijective, full 64-bit period.
inline std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for an independent sub-stream (master, index). Used to split Monte
// Carlo work into fixed blocks so results do not depend on the thread count.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) noexcept {
  std::uint64_t s = master ^ (index * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL);
  return splitmix64_next(s);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Uniform in [0,1) using the top 53 bits of one engine output.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller. Always consumes exactly two engine outputs,
// so the stream position is a pure function of the call count; together with
// the 64-bit seed this makes every sampler bit-reproducible.
inline double standard_normal(Rng& rng) {
  double u1 = 1.0 - uniform01(rng);  // in (0,1], keeps the log finite
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Standard complex normal: E z = 0, E|z|^2 = 2 (unit-variance real and
// imaginary parts). Consumes two engine outputs.
inline std::complex<double> complex_normal(Rng& rng) {
  double u1 = 1.0 - uniform01(rng);
  double u2 = uniform01(rng);
  double rad = std::sqrt(-2.0 * std::log(u1));
  return {rad * std::cos(2.0 * M_PI * u2), rad * std::sin(2.0 * M_PI * u2)};
}

// Ginibre matrix: i.i.d. standard complex Gaussian entries, row-major fill.
inline Eigen::MatrixXcd ginibre(int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("ginibre: dimension must be >= 1");
  Eigen::MatrixXcd z(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) z(i, j) = complex_normal(rng);
  return z;
}

// Uniform unit vector on the complex sphere in C^m. This is exactly the law
// of the first column of a Haar unitary.
inline Eigen::VectorXcd haar_unit_vector(int m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("haar_unit_vector: dimension must be >= 1");
  Eigen::VectorXcd v(m);
  double n2 = 0.0;
  do {
    for (int j = 0; j < m; ++j) v(j) = complex_normal(rng);
    n2 = v.squaredNorm();
  } while (!(n2 > 1e-280));
  return v / std::sqrt(n2);
}

}  // namespace netphase
