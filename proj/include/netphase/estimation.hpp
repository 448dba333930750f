#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adaptive.hpp"
#include "fisher.hpp"
#include "gaussian.hpp"
#include "network.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "stats.hpp"

namespace netphase {

// Cramer-Rao bound for nu independent outcomes: delta_phi >= 1 / sqrt(nu F).
inline double crb(double fisher, long long nu) {
  if (nu < 1) throw std::invalid_argument("crb: need nu >= 1");
  if (!(fisher > 0.0))
    throw std::invalid_argument("crb: zero information; the bound is undefined");
  return 1.0 / std::sqrt(static_cast<double>(nu) * fisher);
}

struct ExperimentConfig {
  double phi_true = 0.3;
  SqueezedProbe probe;             // photons > 0 required
  long long nu = 10000;            // homodyne outcomes per trial, >= 2
  int trials = 200;
  AdaptedSide adapted_side = AdaptedSide::Output;
  double pre_estimate_noise_c = 1.0;  // phi0 = phi_true + Normal(0, c^2 / N)
  double k = 0.25;                 // quadrature offset constant, in 1/N units
  int branch = +1;
  std::uint64_t seed = 0;
  double fd_step = 1e-5;
  int threads = 1;
  // Negative controls: measure exactly on the squeezed axis (k = 0), or
  // replace the adapted stage by a fresh random one each trial.
  bool control_k_zero = false;
  bool control_no_refocus = false;
  // When set, use this non-adapted stage instead of drawing one from the
  // seed; scaling_sweep pins it so every photon level shares one geometry.
  std::optional<UnitaryMatrix> fixed_stage;
};

struct EstimationReport {
  double photons = 0.0;
  std::vector<double> estimates;   // per-trial estimates, inversion failures excluded
  double rmse = 0.0;
  double crb = 0.0;                // at the ideal refocused design point
  double fisher_used = 0.0;
  double mean_estimate = 0.0;
  int out_of_window = 0;           // trials whose likelihood peak left the search window
  std::string coverage_note;
};

namespace detail {

// Fast first-port amplitude along the family, with the stage row and column
// cached.
class TransitionPath {
 public:
  TransitionPath(const NetworkFamily& fam, const UnitaryMatrix& v_in, const UnitaryMatrix& v_out)
      : fam_(&fam), row_(v_out.mat().row(0)), col_(v_in.mat().col(0)) {}
  std::complex<double> u11(double phi) const {
    return (row_ * (fam_->evaluate(phi).mat() * col_))(0);
  }

 private:
  const NetworkFamily* fam_;
  Eigen::RowVectorXcd row_;
  Eigen::VectorXcd col_;
};

struct TrialOutcome {
  double phi_hat = 0.0;
  bool ok = false;
};

// One trial, per the measurement pipeline:
//   1. noisy pre-estimate phi0 = phi_true + Normal(0, c^2/N)
//   2. adapt one stage exactly against U(phi0); the other stage is the
//      experiment-wide random unitary
//   3. set theta from gamma at phi0
//   4. draw nu outcomes from the true-variance Gaussian
//   5. invert the variance MLE on the monotone branch around phi0
inline TrialOutcome run_trial(const NetworkFamily& fam, const ExperimentConfig& cfg,
                              const UnitaryMatrix& non_adapted, std::uint64_t trial_seed) {
  Rng rng = make_rng(trial_seed);
  double n = cfg.probe.photons;

  double phi0 = cfg.phi_true;
  if (cfg.pre_estimate_noise_c > 0.0)
    phi0 += standard_normal(rng) * cfg.pre_estimate_noise_c / std::sqrt(n);

  StagePair stages = [&] {
    if (cfg.control_no_refocus) {
      UnitaryMatrix random_stage = haar_unitary(fam.dim, rng);
      if (cfg.adapted_side == AdaptedSide::Output)
        return StagePair{non_adapted, random_stage, cfg.adapted_side, 0.0};
      return StagePair{random_stage, non_adapted, cfg.adapted_side, 0.0};
    }
    return make_refocused_pair(fam.evaluate(phi0), non_adapted, cfg.adapted_side);
  }();

  Transition t0 = transition(stages.v_out, fam.evaluate(phi0), stages.v_in);
  double theta = cfg.control_k_zero
                     ? wrap_to_pi(t0.gamma + cfg.branch * 0.5 * M_PI)
                     : optimal_theta(t0.gamma, cfg.k, n, cfg.branch);

  // Search window sized from the operating information, floored by the
  // pre-estimate spread and capped to one monotone branch.
  PhaseDerivatives pd0 = phase_derivatives(fam, stages.v_in, stages.v_out, phi0, cfg.fd_step);
  double f_op = 1e-12;
  try {
    f_op = std::max(f_op, fisher_explicit(t0.P, pd0.dP, t0.gamma, pd0.dgamma, n, theta).F);
  } catch (const std::exception&) {
  }
  double w = std::max(10.0 * crb(f_op, cfg.nu),
                      5.0 * cfg.pre_estimate_noise_c / std::sqrt(n));
  w = std::min(w, 0.25 * M_PI);

  TransitionPath path(fam, stages.v_in, stages.v_out);
  auto delta_at = [&](double ph) { return homodyne_variance(path.u11(ph), cfg.probe, theta); };

  double delta_true = delta_at(cfg.phi_true);
  double s = std::sqrt(delta_true);
  double acc = 0.0;
  for (long long i = 0; i < cfg.nu; ++i) {
    double x = s * standard_normal(rng);
    acc += x * x;
  }
  double dhat = acc / static_cast<double>(cfg.nu);  // variance MLE

  // Locate the variance minimum in the window (golden section), then invert
  // on the branch that contains phi0.
  double lo = phi0 - w, hi = phi0 + w;
  const double inv_gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c1 = b - inv_gr * (b - a), c2 = a + inv_gr * (b - a);
  double f1 = delta_at(c1), f2 = delta_at(c2);
  for (int it = 0; it < 200 && (b - a) > 1e-15; ++it) {
    if (f1 < f2) {
      b = c2; c2 = c1; f2 = f1;
      c1 = b - inv_gr * (b - a);
      f1 = delta_at(c1);
    } else {
      a = c1; c1 = c2; f1 = f2;
      c2 = a + inv_gr * (b - a);
      f2 = delta_at(c2);
    }
  }
  double phi_min = 0.5 * (a + b);
  double d_min = delta_at(phi_min);

  double edge = (phi0 <= phi_min) ? lo : hi;
  double d_edge = delta_at(edge);
  if (dhat < d_min || dhat > d_edge) return {phi0, false};  // not invertible in-window

  double x_in = phi_min, x_out = edge;  // delta - dhat <= 0 at x_in, >= 0 at x_out
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (x_in + x_out);
    if (mid == x_in || mid == x_out) break;
    if (delta_at(mid) - dhat <= 0.0) x_in = mid; else x_out = mid;
  }
  return {0.5 * (x_in + x_out), true};
}

}  // namespace detail

inline void validate_config(const NetworkFamily& fam, const ExperimentConfig& cfg) {
  if (!fam.evaluate || fam.dim < 1)
    throw std::invalid_argument("run_experiment: family has no evaluator");
  validate_probe(cfg.probe);
  if (!(cfg.probe.photons > 0.0))
    throw std::invalid_argument("run_experiment: probe photon number must be > 0");
  if (cfg.nu < 2) throw std::invalid_argument("run_experiment: need nu >= 2");
  if (cfg.trials < 1) throw std::invalid_argument("run_experiment: need trials >= 1");
  if (!(cfg.pre_estimate_noise_c >= 0.0))
    throw std::invalid_argument("run_experiment: pre-estimate noise scale must be >= 0");
  if (cfg.branch != 1 && cfg.branch != -1)
    throw std::invalid_argument("run_experiment: branch must be +-1");
  if (cfg.k == 0.0 && !cfg.control_k_zero)
    throw std::invalid_argument(
        "run_experiment: k must be non-zero; use the k-zero control to probe the squeezed axis");
  if (cfg.fixed_stage && cfg.fixed_stage->mat().rows() != fam.dim)
    throw std::invalid_argument("run_experiment: fixed stage dimension must match the family");
}

// Runs the full experiment: one random non-adapted stage per experiment,
// `trials` independent trials on seeded sub-streams, reference bound at the
// exactly refocused design point.
inline EstimationReport run_experiment(const NetworkFamily& fam, const ExperimentConfig& cfg) {
  validate_config(fam, cfg);
  double n = cfg.probe.photons;

  Rng setup_rng = make_rng(substream_seed(cfg.seed, 0));
  UnitaryMatrix non_adapted =
      cfg.fixed_stage ? *cfg.fixed_stage : haar_unitary(fam.dim, setup_rng);

  // Reference design point: exact refocus at the true phase. For the k-zero
  // control the reference keeps k = 1/4 so the bound stays finite.
  double k_ref = cfg.control_k_zero ? 0.25 : cfg.k;
  StagePair ideal = make_refocused_pair(fam.evaluate(cfg.phi_true), non_adapted, cfg.adapted_side);
  Transition t_star = transition(ideal.v_out, fam.evaluate(cfg.phi_true), ideal.v_in);
  PhaseDerivatives pd_star =
      phase_derivatives(fam, ideal.v_in, ideal.v_out, cfg.phi_true, cfg.fd_step);
  double theta_star = optimal_theta(t_star.gamma, k_ref, n, cfg.branch);
  double f_used =
      fisher_explicit(t_star.P, pd_star.dP, t_star.gamma, pd_star.dgamma, n, theta_star).F;
  if (!(f_used > 0.0))
    throw std::runtime_error(
        "run_experiment: the network carries no phase information at the operating point");

  EstimationReport rep;
  rep.photons = n;
  rep.fisher_used = f_used;
  rep.crb = crb(f_used, cfg.nu);

  std::vector<detail::TrialOutcome> outcomes(static_cast<std::size_t>(cfg.trials));
  parallel_blocks(cfg.trials, cfg.threads, [&](long long t) {
    // A trial that cannot even be set up counts as failed; throwing across
    // the worker threads would abort the process.
    try {
      outcomes[static_cast<std::size_t>(t)] = detail::run_trial(
          fam, cfg, non_adapted, substream_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(t)));
    } catch (const std::exception&) {
      outcomes[static_cast<std::size_t>(t)] = {cfg.phi_true, false};
    }
  });

  double se = 0.0, mean = 0.0;
  for (const auto& o : outcomes) {
    if (!o.ok) { ++rep.out_of_window; continue; }
    rep.estimates.push_back(o.phi_hat);
    double e = o.phi_hat - cfg.phi_true;
    se += e * e;
    mean += o.phi_hat;
  }
  if (rep.estimates.empty())
    throw std::runtime_error(
        "run_experiment: every trial failed to invert; the configuration carries no usable "
        "phase information");
  rep.rmse = std::sqrt(se / static_cast<double>(rep.estimates.size()));
  rep.mean_estimate = mean / static_cast<double>(rep.estimates.size());

  char note[256];
  std::snprintf(note, sizeof note,
                "out_of_window=%d/%d excluded; reference bound at exact refocus (k=%g, branch=%+d)%s",
                rep.out_of_window, cfg.trials, k_ref, cfg.branch,
                cfg.control_k_zero ? "; k-zero control"
                                   : (cfg.control_no_refocus ? "; no-refocus control" : ""));
  rep.coverage_note = note;
  return rep;
}

struct SweepPoint {
  double photons = 0.0;
  EstimationReport report;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  double slope = 0.0;      // d log10(rmse) / d log10(N)
  double intercept = 0.0;
};

// RMSE-versus-photon-number sweep; each level gets its own sub-stream seed
// for trial noise, but all levels share one non-adapted stage (drawn from the
// base seed) so the fitted slope measures only the photon-number dependence.
inline SweepResult scaling_sweep(const NetworkFamily& fam, const ExperimentConfig& base,
                                 const std::vector<double>& photon_grid) {
  if (photon_grid.size() < 3)
    throw std::invalid_argument("scaling_sweep: need at least 3 photon levels");
  if (base.trials < 200)
    throw std::invalid_argument("scaling_sweep: need at least 200 trials per level");
  std::optional<UnitaryMatrix> stage = base.fixed_stage;
  if (!stage) {
    Rng geom_rng = make_rng(substream_seed(base.seed, 0));
    stage = haar_unitary(fam.dim, geom_rng);
  }
  SweepResult res;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < photon_grid.size(); ++i) {
    ExperimentConfig cfg = base;
    cfg.probe = make_probe_from_photons(photon_grid[i]);
    cfg.seed = substream_seed(base.seed, 500 + i);
    cfg.fixed_stage = stage;
    SweepPoint pt;
    pt.photons = photon_grid[i];
    pt.report = run_experiment(fam, cfg);
    lx.push_back(std::log10(photon_grid[i]));
    ly.push_back(std::log10(pt.report.rmse));
    res.points.push_back(std::move(pt));
  }
  LineFit fit = fit_line(lx, ly);
  res.slope = fit.slope;
  res.intercept = fit.intercept;
  return res;
}

}  // namespace netphase
