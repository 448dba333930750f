#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "gaussian.hpp"
#include "linalg.hpp"
#include "network.hpp"
#include "stats.hpp"

namespace netphase {

// First-port transition amplitude of the sandwiched network V_out U(phi) V_in:
// u11 = (V_out U V_in)_11, P = |u11|^2, gamma = arg u11 in (-pi, pi].
struct Transition {
  std::complex<double> u11;
  double P = 0.0;
  double gamma = 0.0;
};

inline Transition transition(const UnitaryMatrix& v_out, const UnitaryMatrix& u_phi,
                             const UnitaryMatrix& v_in) {
  if (v_out.dim() != u_phi.dim() || u_phi.dim() != v_in.dim())
    throw std::invalid_argument("transition: stage dimensions disagree");
  std::complex<double> u11 =
      (v_out.mat().row(0) * (u_phi.mat() * v_in.mat().col(0)))(0);
  return {u11, std::norm(u11), std::arg(u11)};
}

struct PhaseDerivatives {
  double dP = 0.0;
  double dgamma = 0.0;
};

namespace detail {

struct TransitionStencil {
  Transition t0, tp, tm;
};

inline TransitionStencil transition_stencil(const NetworkFamily& fam, const UnitaryMatrix& v_in,
                                            const UnitaryMatrix& v_out, double phi, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("transition stencil: step must be > 0");
  if (!fam.evaluate) throw std::invalid_argument("transition stencil: family has no evaluator");
  return {transition(v_out, fam.evaluate(phi), v_in),
          transition(v_out, fam.evaluate(phi + step), v_in),
          transition(v_out, fam.evaluate(phi - step), v_in)};
}

inline PhaseDerivatives derivatives_from_stencil(const TransitionStencil& st, double step) {
  double dp = (st.tp.P - st.tm.P) / (2.0 * step);
  // The phase difference is unwrapped onto (-pi, pi]; a jump beyond pi/2
  // across the stencil cannot be unwrapped reliably and is a hard error.
  double dg = wrap_to_pi(st.tp.gamma - st.tm.gamma);
  if (std::fabs(dg) > 0.5 * M_PI)
    throw std::runtime_error("phase_derivatives: phase jump " + std::to_string(dg) +
                             " across the stencil exceeds pi/2; reduce the step");
  return {dp, dg / (2.0 * step)};
}

}  // namespace detail

// Symmetric-difference derivatives of P and gamma in the unknown phase.
inline PhaseDerivatives phase_derivatives(const NetworkFamily& fam, const UnitaryMatrix& v_in,
                                          const UnitaryMatrix& v_out, double phi,
                                          double step = 1e-5) {
  return detail::derivatives_from_stencil(
      detail::transition_stencil(fam, v_in, v_out, phi, step), step);
}

// Zero-mean Gaussian model: F = (dDelta / Delta)^2 / 2.
inline double fisher_gaussian(double delta, double d_delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("fisher_gaussian: variance must be > 0");
  double r = d_delta / delta;
  return 0.5 * r * r;
}

struct QuadratureSpec {
  double step = 1e-5;          // phase step for the score stencil
  double halfwidth_sigmas = 8.0;
  int nodes = 2049;            // Simpson nodes; forced odd, minimum 2001
};

// Direct definition F = integral p (d log p / d phi)^2 dx on a Simpson grid
// spanning +-halfwidth_sigmas standard deviations.
inline double fisher_numeric(const NetworkFamily& fam, const UnitaryMatrix& v_in,
                             const UnitaryMatrix& v_out, const SqueezedProbe& probe, double theta,
                             double phi, const QuadratureSpec& q = {}) {
  int nodes = std::max(q.nodes, 2001);
  if (nodes % 2 == 0) ++nodes;
  auto st = detail::transition_stencil(fam, v_in, v_out, phi, q.step);
  double d0 = homodyne_variance(st.t0.u11, probe, theta);
  double dp = homodyne_variance(st.tp.u11, probe, theta);
  double dm = homodyne_variance(st.tm.u11, probe, theta);

  double half = q.halfwidth_sigmas * std::sqrt(d0);
  double h = 2.0 * half / (nodes - 1);
  auto integrand = [&](double x) {
    // d log p = -x^2/2 d(1/Delta) - d(log Delta)/2, evaluated symmetrically
    double diff = -0.5 * x * x * (1.0 / dp - 1.0 / dm) - 0.5 * std::log(dp / dm);
    double score = diff / (2.0 * q.step);
    return outcome_density(x, d0) * score * score;
  };
  double sum = integrand(-half) + integrand(half);
  for (int i = 1; i < nodes - 1; ++i) {
    double x = -half + h * i;
    sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(x);
  }
  return sum * h / 3.0;
}

struct ExplicitFisher {
  double F = 0.0;
  double fN = 0.0;
  double hN = 0.0;
};

// Closed form in the transition amplitude and its derivatives:
//   f(N) = N (1 + cos[2(gamma - theta)] sqrt(1 + 1/N))
//   h(N) = N sin[2(gamma - theta)] sqrt(1 + 1/N)
//   F = 2 [ (dP f - 2 P dgamma h) / (1 + 2 P f) ]^2
// where N is the probe photon number. 1 + 2 P f equals 2 Delta, so a
// vanishing denominator would mean zero outcome variance.
inline ExplicitFisher fisher_explicit(double p, double dp, double gamma, double dgamma,
                                      double photons, double theta) {
  if (!(photons > 0.0)) throw std::invalid_argument("fisher_explicit: photon number must be > 0");
  double root = std::sqrt(1.0 + 1.0 / photons);
  double half = gamma - theta;
  // f = N (1 + cos(2 half) root) rewritten as 2 N root cos^2(half) - 1/(root+1):
  // near the squeezed axis cos(2 half) sits within eps of -1 and the direct
  // form loses the O(1/N^2) angular offset that carries all the information
  double c = std::cos(half);
  double fn = 2.0 * photons * root * c * c - 1.0 / (root + 1.0);
  double hn = photons * std::sin(2.0 * half) * root;
  double denom = 1.0 + 2.0 * p * fn;
  if (std::fabs(denom) < 1e-12)
    throw std::logic_error("fisher_explicit: degenerate outcome variance (1 + 2 P f = 0)");
  double num = dp * fn - 2.0 * p * dgamma * hn;
  double ratio = num / denom;
  return {2.0 * ratio * ratio, fn, hn};
}

// Peak-efficiency factor of the N^2 law: varrho = (8k / (1 + 16 k^2 + 4 l))^2.
// Equals 1 at k = +-1/4, l = 0 and decreases monotonically in the leakage l.
inline double varrho(double k, double ell) {
  if (!(ell >= 0.0)) throw std::invalid_argument("varrho: leakage must be >= 0");
  double denom = 1.0 + 16.0 * k * k + 4.0 * ell;
  double r = 8.0 * k / denom;
  return r * r;
}

// Measured quadrature angle theta = gamma + branch * pi/2 + k / N, wrapped to
// (-pi, pi]. k = 0 puts the measurement exactly on the squeezed axis, where
// the leading information channel closes; it is rejected.
inline double optimal_theta(double gamma, double k, double photons, int branch = +1) {
  if (!(photons > 0.0)) throw std::invalid_argument("optimal_theta: photon number must be > 0");
  if (branch != 1 && branch != -1) throw std::invalid_argument("optimal_theta: branch must be +-1");
  if (k == 0.0)
    throw std::invalid_argument(
        "optimal_theta: k must be non-zero; the 1/N offset from the squeezed axis carries the signal");
  return wrap_to_pi(gamma + branch * 0.5 * M_PI + k / photons);
}

// Large-N law F = 8 varrho(k, l) (dgamma)^2 N^2.
inline double fisher_asymptotic(double k, double ell, double dgamma, double photons) {
  if (!(photons > 0.0)) throw std::invalid_argument("fisher_asymptotic: photon number must be > 0");
  return 8.0 * varrho(k, ell) * dgamma * dgamma * photons * photons;
}

// One-stop evaluation at a working point: operating quantities, their phase
// derivatives, and the information by all routes.
struct FisherReport {
  double P = 0.0;
  double gamma = 0.0;
  double dP = 0.0;
  double dgamma = 0.0;
  double Delta = 0.0;
  double dDelta = 0.0;
  double fN = 0.0;
  double hN = 0.0;
  double ell = 0.0;      // leakage N (1 - P)
  double k = 0.0;        // offset of theta from the nearer squeezed axis, in 1/N units
  double F_numeric = 0.0;
  double F_gaussian = 0.0;
  double F_explicit = 0.0;
  double F_asymptotic = 0.0;
};

inline FisherReport fisher_report(const NetworkFamily& fam, const UnitaryMatrix& v_in,
                                  const UnitaryMatrix& v_out, const SqueezedProbe& probe,
                                  double theta, double phi, double step = 1e-5,
                                  bool with_numeric = true, const QuadratureSpec& quad = {}) {
  validate_probe(probe);
  if (!(probe.photons > 0.0)) throw std::invalid_argument("fisher_report: photon number must be > 0");
  auto st = detail::transition_stencil(fam, v_in, v_out, phi, step);
  PhaseDerivatives pd = detail::derivatives_from_stencil(st, step);

  FisherReport r;
  r.P = st.t0.P;
  r.gamma = st.t0.gamma;
  r.dP = pd.dP;
  r.dgamma = pd.dgamma;
  r.Delta = homodyne_variance(st.t0.u11, probe, theta);
  double delta_p = homodyne_variance(st.tp.u11, probe, theta);
  double delta_m = homodyne_variance(st.tm.u11, probe, theta);
  r.dDelta = (delta_p - delta_m) / (2.0 * step);
  r.F_gaussian = fisher_gaussian(r.Delta, r.dDelta);

  ExplicitFisher ef = fisher_explicit(r.P, r.dP, r.gamma, r.dgamma, probe.photons, theta);
  r.F_explicit = ef.F;
  r.fN = ef.fN;
  r.hN = ef.hN;

  r.ell = std::max(0.0, probe.photons * (1.0 - r.P));
  double d_plus = wrap_to_pi(theta - r.gamma - 0.5 * M_PI);
  double d_minus = wrap_to_pi(theta - r.gamma + 0.5 * M_PI);
  r.k = probe.photons * (std::fabs(d_plus) <= std::fabs(d_minus) ? d_plus : d_minus);
  r.F_asymptotic = fisher_asymptotic(r.k, r.ell, r.dgamma, probe.photons);

  if (with_numeric) {
    QuadratureSpec q = quad;
    q.step = step;
    r.F_numeric = fisher_numeric(fam, v_in, v_out, probe, theta, phi, q);
  }
  return r;
}

}  // namespace netphase
