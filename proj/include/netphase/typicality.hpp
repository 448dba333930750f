#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linalg.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace netphase {

// Sensitivity prefactor f(U, G) = ((U^dag G U)_11)^2. The (1,1) entry of a
// conjugated Hermitian is real; a material imaginary residue means corrupted
// inputs.
inline double prefactor(const UnitaryMatrix& u, const HermitianMatrix& g) {
  if (u.dim() != g.dim()) throw std::invalid_argument("prefactor: dimension mismatch");
  std::complex<double> e = (u.mat().col(0).adjoint() * (g.mat() * u.mat().col(0)))(0);
  if (std::fabs(e.imag()) > 1e-10)
    throw std::logic_error("prefactor: imaginary residue " + std::to_string(e.imag()));
  return e.real() * e.real();
}

// Same statistic for a diagonal spectrum, fed only the first column of U:
// f = (sum_j g_j |u_j|^2)^2. The law of f under Haar U depends on U only
// through this column, so sampling the column is exact and O(M) per draw.
inline double prefactor_from_column(const Eigen::VectorXcd& u, const Eigen::VectorXd& g) {
  if (u.size() != g.size()) throw std::invalid_argument("prefactor_from_column: dimension mismatch");
  double a = 0.0;
  for (int j = 0; j < u.size(); ++j) a += g(j) * std::norm(u(j));
  return a * a;
}

// Haar average E f = (Tr G^2 + (Tr G)^2) / (M (M + 1)).
inline double mean_prefactor(const HermitianMatrix& g, int m) {
  if (g.dim() != m) throw std::invalid_argument("mean_prefactor: dimension mismatch");
  double tr = g.trace();
  return (g.trace_sq() + tr * tr) / (static_cast<double>(m) * (m + 1));
}

inline double mean_prefactor_from_spectrum(const Eigen::VectorXd& spectrum) {
  int m = static_cast<int>(spectrum.size());
  if (m < 1) throw std::invalid_argument("mean_prefactor_from_spectrum: empty spectrum");
  double tr = spectrum.sum();
  double tr2 = spectrum.squaredNorm();
  return (tr2 + tr * tr) / (static_cast<double>(m) * (m + 1));
}

// Jensen lower bound (Tr G / M)^2 <= E f; zero for traceless generators.
inline double jensen_bound(const Eigen::VectorXd& spectrum) {
  int m = static_cast<int>(spectrum.size());
  if (m < 1) throw std::invalid_argument("jensen_bound: empty spectrum");
  double t = spectrum.sum() / m;
  return t * t;
}

// Euclidean gradient norm of f on the sphere point u (for the Lipschitz
// check): |grad f| = 4 |a| sqrt(sum_j g_j^2 |u_j|^2) <= 4 |G|^2.
inline double gradient_norm_f(const Eigen::VectorXcd& u, const Eigen::VectorXd& g) {
  if (u.size() != g.size()) throw std::invalid_argument("gradient_norm_f: dimension mismatch");
  double a = 0.0, b = 0.0;
  for (int j = 0; j < u.size(); ++j) {
    double w = std::norm(u(j));
    a += g(j) * w;
    b += g(j) * g(j) * w;
  }
  return 4.0 * std::fabs(a) * std::sqrt(b);
}

// Two-point spectrum (k copies of g1 >= g2, M - k copies of g2) for which
// the prefactor density is available in closed form.
struct TwoEigSpec {
  double g1 = 0.0;
  double g2 = 0.0;
  int k = 0;
  int m = 0;
  double dg = 0.0;
  double log_c = 0.0;  // log of the density normalization constant
};

inline TwoEigSpec make_two_eig_spec(double g1, double g2, int k, int m) {
  if (m < 2 || k < 1 || k > m - 1)
    throw std::invalid_argument("make_two_eig_spec: need M >= 2 and 1 <= k <= M - 1");
  if (!(g2 >= 0.0) || !(g1 >= g2))
    throw std::invalid_argument("make_two_eig_spec: need g1 >= g2 >= 0");
  if (g1 == g2)
    throw std::invalid_argument(
        "make_two_eig_spec: degenerate spectrum; the prefactor is a point mass at g1^2 with no density");
  TwoEigSpec s;
  s.g1 = g1;
  s.g2 = g2;
  s.k = k;
  s.m = m;
  s.dg = g1 - g2;
  s.log_c = std::lgamma(static_cast<double>(m)) - std::log(2.0) -
            (m - 1) * std::log(s.dg) - std::lgamma(static_cast<double>(k)) -
            std::lgamma(static_cast<double>(m - k));
  return s;
}

inline TwoEigSpec two_eig_spec_from_spectrum(const Eigen::VectorXd& spectrum) {
  int m = static_cast<int>(spectrum.size());
  if (m < 2) throw std::invalid_argument("two_eig_spec_from_spectrum: need M >= 2");
  double g1 = spectrum.maxCoeff(), g2 = spectrum.minCoeff();
  int k = 0;
  for (int j = 0; j < m; ++j) {
    double v = spectrum(j);
    if (std::fabs(v - g1) <= 1e-12 * std::max(1.0, std::fabs(g1))) ++k;
    else if (std::fabs(v - g2) > 1e-12 * std::max(1.0, std::fabs(g2)))
      throw std::invalid_argument("two_eig_spec_from_spectrum: spectrum has more than two distinct values");
  }
  return make_two_eig_spec(g1, g2, k, m);
}

// Closed-form density of f on [g2^2, g1^2]:
// p(x) = C (g1 - sqrt(x))^(M-k-1) (sqrt(x) - g2)^(k-1) / sqrt(x).
// Evaluated in log space; zero outside the support.
inline double two_eig_pdf(double x, const TwoEigSpec& s) {
  if (!(x > 0.0)) return 0.0;
  double sq = std::sqrt(x);
  double t1 = s.g1 - sq;
  double t2 = sq - s.g2;
  if (t1 < 0.0 || t2 < 0.0) return 0.0;
  int e1 = s.m - s.k - 1, e2 = s.k - 1;
  if (e1 > 0 && t1 == 0.0) return 0.0;
  if (e2 > 0 && t2 == 0.0) return 0.0;
  double lp = s.log_c - std::log(sq);
  if (e1 > 0) lp += e1 * std::log(t1);
  if (e2 > 0) lp += e2 * std::log(t2);
  return std::exp(lp);
}

// Exact CDF through the weight variable t = (sqrt(x) - g2) / (g1 - g2),
// which is Beta(k, M - k) distributed.
inline double two_eig_cdf(double x, const TwoEigSpec& s) {
  if (!(x >= 0.0)) return 0.0;
  double t = (std::sqrt(x) - s.g2) / s.dg;
  t = std::min(1.0, std::max(0.0, t));
  return betai(static_cast<double>(s.k), static_cast<double>(s.m - s.k), t);
}

// Density of the squeezed-cap weight t = sum_{j<=k} |u_j|^2 under Haar:
// Beta(k, M - k) on [0, 1].
inline double cap_weight_pdf(double t, int k, int m) {
  if (m < 2 || k < 1 || k > m - 1)
    throw std::invalid_argument("cap_weight_pdf: need M >= 2 and 1 <= k <= M - 1");
  if (t < 0.0 || t > 1.0) return 0.0;
  int e1 = k - 1, e2 = m - k - 1;
  if (e1 > 0 && t == 0.0) return 0.0;
  if (e2 > 0 && t == 1.0) return 0.0;
  double lp = std::lgamma(static_cast<double>(m)) - std::lgamma(static_cast<double>(k)) -
              std::lgamma(static_cast<double>(m - k));
  if (e1 > 0) lp += e1 * std::log(t);
  if (e2 > 0) lp += e2 * std::log1p(-t);
  return std::exp(lp);
}

inline double cap_weight_cdf(double t, int k, int m) {
  if (m < 2 || k < 1 || k > m - 1)
    throw std::invalid_argument("cap_weight_cdf: need M >= 2 and 1 <= k <= M - 1");
  return betai(static_cast<double>(k), static_cast<double>(m - k), std::min(1.0, std::max(0.0, t)));
}

// Concentration tail bound Pr[|f - E f| > eps] <= 2 exp(-A M eps^2 / |G|^4)
// with A = 1 / (72 pi^3). The bound may exceed 1 (vacuous) at small M.
inline double concentration_bound(double eps, int m, double opnorm) {
  if (!(eps > 0.0) || m < 1 || !(opnorm > 0.0))
    throw std::invalid_argument("concentration_bound: need eps > 0, M >= 1, |G| > 0");
  const double a = 1.0 / (72.0 * M_PI * M_PI * M_PI);
  double g2 = opnorm * opnorm;
  return 2.0 * std::exp(-a * m * eps * eps / (g2 * g2));
}

struct PrefactorStats {
  int m = 0;
  Eigen::VectorXd spectrum;
  std::vector<double> samples;
  double mean_mc = 0.0;
  double stderr_mc = 0.0;
  double mean_analytic = 0.0;
  double jensen = 0.0;
  double opnorm = 0.0;
};

// Monte Carlo over Haar networks for a diagonal generator spectrum. Each
// fixed-size block runs on its own seeded sub-stream; outputs land in
// block-indexed slots, so the sample set is identical for any thread count.
inline PrefactorStats sample_prefactor(const Eigen::VectorXd& spectrum, long long n,
                                       std::uint64_t seed, int threads = 1) {
  int m = static_cast<int>(spectrum.size());
  if (m < 1) throw std::invalid_argument("sample_prefactor: empty spectrum");
  if (n < 1) throw std::invalid_argument("sample_prefactor: need at least one sample");

  PrefactorStats ps;
  ps.m = m;
  ps.spectrum = spectrum;
  ps.samples.resize(static_cast<std::size_t>(n));
  ps.mean_analytic = mean_prefactor_from_spectrum(spectrum);
  ps.jensen = jensen_bound(spectrum);
  ps.opnorm = spectrum.cwiseAbs().maxCoeff();

  const long long block = 8192;
  long long blocks = (n + block - 1) / block;
  parallel_blocks(blocks, threads, [&](long long b) {
    Rng rng = make_rng(substream_seed(seed, static_cast<std::uint64_t>(b)));
    long long lo = b * block, hi = std::min(n, lo + block);
    for (long long i = lo; i < hi; ++i)
      ps.samples[static_cast<std::size_t>(i)] =
          prefactor_from_column(haar_unit_vector(m, rng), spectrum);
  });

  RunningStats rs;
  for (double v : ps.samples) rs.add(v);
  ps.mean_mc = rs.mean();
  ps.stderr_mc = rs.stderr_mean();
  return ps;
}

struct MomentRow {
  std::string name;
  double sample = 0.0;
  double analytic = 0.0;
  double se = 0.0;
  double z = 0.0;
};

namespace detail {
inline MomentRow moment_row(const std::string& name, const RunningStats& rs, double analytic) {
  MomentRow r;
  r.name = name;
  r.sample = rs.mean();
  r.analytic = analytic;
  r.se = rs.stderr_mean();
  double diff = r.sample - r.analytic;
  r.z = (r.se > 0.0) ? diff / r.se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return r;
}
}  // namespace detail

// Monte Carlo check of the low-order Haar moments and the matrix identities
// E (U^dag A U)_ij = Tr A delta_ij / M and
// E ((U^dag A U)_ij)^2 = (Tr A^2 + (Tr A)^2) delta_ij / (M (M + 1)),
// with A a random complex test matrix drawn once from the stream.
inline std::vector<MomentRow> haar_moment_suite(int m, long long n, Rng& rng) {
  if (m < 1) throw std::invalid_argument("haar_moment_suite: dimension must be >= 1");
  if (n < 10000) throw std::invalid_argument("haar_moment_suite: need at least 1e4 samples");
  double md = static_cast<double>(m);

  Eigen::MatrixXcd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = complex_normal(rng);
  std::complex<double> tr_a = a.trace();
  std::complex<double> tr_a2 = (a * a).trace();
  std::complex<double> w2_mean = (tr_a2 + tr_a * tr_a) / (md * (md + 1.0));

  RunningStats m1, m2, samecol, samerow, distinct, cyc_re, cyc_im;
  RunningStats w1_re, w1_im, w2_re, w2_im, off_re, off_im;
  for (long long i = 0; i < n; ++i) {
    UnitaryMatrix u = haar_unitary(m, rng);
    const Eigen::MatrixXcd& um = u.mat();
    double p00 = std::norm(um(0, 0));
    m1.add(p00);
    m2.add(p00 * p00);
    std::complex<double> w1 = (um.col(0).adjoint() * (a * um.col(0)))(0);
    std::complex<double> w1sq = w1 * w1;
    w1_re.add(w1.real());
    w1_im.add(w1.imag());
    w2_re.add(w1sq.real());
    w2_im.add(w1sq.imag());
    if (m >= 2) {
      samecol.add(p00 * std::norm(um(1, 0)));
      samerow.add(p00 * std::norm(um(0, 1)));
      distinct.add(p00 * std::norm(um(1, 1)));
      std::complex<double> c = um(0, 0) * um(1, 1) * std::conj(um(0, 1)) * std::conj(um(1, 0));
      cyc_re.add(c.real());
      cyc_im.add(c.imag());
      std::complex<double> off = (um.col(0).adjoint() * (a * um.col(1)))(0);
      off_re.add(off.real());
      off_im.add(off.imag());
    }
  }

  std::vector<MomentRow> rows;
  rows.push_back(detail::moment_row("E|U11|^2", m1, 1.0 / md));
  rows.push_back(detail::moment_row("E|U11|^4", m2, 2.0 / (md * (md + 1.0))));
  if (m >= 2) {
    rows.push_back(detail::moment_row("E|U11|^2|U21|^2 (same column)", samecol, 1.0 / (md * (md + 1.0))));
    rows.push_back(detail::moment_row("E|U11|^2|U12|^2 (same row)", samerow, 1.0 / (md * (md + 1.0))));
    rows.push_back(detail::moment_row("E|U11|^2|U22|^2 (distinct)", distinct, 1.0 / (md * md - 1.0)));
    rows.push_back(detail::moment_row("Re E[U11 U22 conj(U12) conj(U21)]", cyc_re, -1.0 / (md * (md * md - 1.0))));
    rows.push_back(detail::moment_row("Im E[U11 U22 conj(U12) conj(U21)]", cyc_im, 0.0));
  }
  rows.push_back(detail::moment_row("Re E[(UdagAU)_11]", w1_re, tr_a.real() / md));
  rows.push_back(detail::moment_row("Im E[(UdagAU)_11]", w1_im, tr_a.imag() / md));
  rows.push_back(detail::moment_row("Re E[(UdagAU)_11^2]", w2_re, w2_mean.real()));
  rows.push_back(detail::moment_row("Im E[(UdagAU)_11^2]", w2_im, w2_mean.imag()));
  if (m >= 2) {
    rows.push_back(detail::moment_row("Re E[(UdagAU)_12]", off_re, 0.0));
    rows.push_back(detail::moment_row("Im E[(UdagAU)_12]", off_im, 0.0));
  }
  return rows;
}

inline bool suite_passes(const std::vector<MomentRow>& rows, double z_max = 5.0) {
  for (const MomentRow& r : rows)
    if (!(std::fabs(r.z) <= z_max)) return false;
  return true;
}

}  // namespace netphase
