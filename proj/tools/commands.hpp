#pragma once

// Command drivers behind the netphase CLI. Kept header-only and separate
// from main() so the test suite can invoke commands in-process.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include <netphase/netphase.hpp>

namespace netphase::cli {

using nlohmann::json;

inline constexpr const char* kToolName = "netphase";
#ifdef NETPHASE_VERSION
inline constexpr const char* kToolVersion = NETPHASE_VERSION;
#else
inline constexpr const char* kToolVersion = "0.1.0";
#endif

// Exit codes: 0 success, 1 runtime failure, 2 config validation error,
// 3 acceptance/suite failure.
struct CommandError : std::runtime_error {
  int exit_code;
  CommandError(int code, const std::string& msg) : std::runtime_error(msg), exit_code(code) {}
};

inline std::string fmt(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct CommonOpts {
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out_dir = ".";
  int threads = 0;     // 0 = unset; fall back to config, then hardware
  bool control = false;
};

inline void reject_unknown_keys(const json& params, const std::set<std::string>& allowed,
                                const std::string& command) {
  if (!params.is_object()) throw CommandError(2, command + ": config must be a JSON object");
  for (const auto& item : params.items())
    if (allowed.find(item.key()) == allowed.end())
      throw CommandError(2, command + ": unknown config key '" + item.key() + "'");
}

inline double jget_num(const json& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) throw CommandError(2, std::string("config key '") + key + "' must be a number");
  return j[key].get<double>();
}

inline long long jget_int(const json& j, const char* key, long long def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number_integer() && !j[key].is_number_unsigned())
    throw CommandError(2, std::string("config key '") + key + "' must be an integer");
  return j[key].get<long long>();
}

inline bool jget_bool(const json& j, const char* key, bool def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_boolean()) throw CommandError(2, std::string("config key '") + key + "' must be a boolean");
  return j[key].get<bool>();
}

inline std::string jget_str(const json& j, const char* key, const std::string& def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_string()) throw CommandError(2, std::string("config key '") + key + "' must be a string");
  return j[key].get<std::string>();
}

inline std::vector<double> jget_vec(const json& j, const char* key, std::vector<double> def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_array()) throw CommandError(2, std::string("config key '") + key + "' must be an array");
  std::vector<double> v;
  for (const auto& e : j[key]) {
    if (!e.is_number()) throw CommandError(2, std::string("config key '") + key + "' must hold numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

inline std::vector<int> jget_ivec(const json& j, const char* key, std::vector<int> def) {
  if (!j.contains(key)) return def;
  if (!j[key].is_array()) throw CommandError(2, std::string("config key '") + key + "' must be an array");
  std::vector<int> v;
  for (const auto& e : j[key]) {
    if (!e.is_number_integer() && !e.is_number_unsigned())
      throw CommandError(2, std::string("config key '") + key + "' must hold integers");
    v.push_back(e.get<int>());
  }
  return v;
}

// The config hash covers the fully resolved params plus command and seed;
// thread count and output location are excluded so they cannot change bytes.
inline std::string config_hash(const std::string& command, const json& resolved,
                               std::uint64_t seed) {
  json h;
  h["command"] = command;
  h["params"] = resolved;
  h["seed"] = seed;
  char b[32];
  std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(fnv1a64(h.dump())));
  return b;
}

inline std::string header_block(const std::string& command, const std::string& hash,
                                std::uint64_t seed) {
  std::string s;
  s += std::string("# tool: ") + kToolName + " " + kToolVersion + "\n";
  s += "# command: " + command + "\n";
  s += "# config_hash: " + hash + "\n";
  s += "# seed: " + std::to_string(seed) + "\n";
  return s;
}

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw CommandError(1, "cannot open output file " + p.string());
  f << content;
  if (!f) throw CommandError(1, "failed writing " + p.string());
}

inline json result_envelope(const std::string& command, const std::string& hash,
                            std::uint64_t seed, const json& params) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["command"] = command;
  j["config_hash"] = hash;
  j["seed"] = seed;
  j["params"] = params;
  return j;
}

inline std::vector<double> default_photon_decades(double lo_exp, double hi_exp, double step_exp) {
  std::vector<double> v;
  for (double e = lo_exp; e <= hi_exp + 1e-9; e += step_exp) v.push_back(std::pow(10.0, e));
  return v;
}

// ---------------------------------------------------------------------------
// fisher-scaling: information versus photon number for the default
// phase-distributed family with exact refocusing and the condition angle.
// ---------------------------------------------------------------------------
inline int cmd_fisher_scaling(const json& params_in, const CommonOpts& opts) {
  const std::string cmd = "fisher-scaling";
  reject_unknown_keys(params_in,
                      {"m", "weights", "phi", "k", "branch", "photons", "fd_step", "quad_nodes",
                       "seed", "threads"},
                      cmd);
  int m = static_cast<int>(jget_int(params_in, "m", 8));
  std::vector<double> wdef = {3, 3, 3, 3, 1, 1, 1, 1};
  if (m != 8) wdef.assign(static_cast<std::size_t>(std::max(m, 1)), 1.0);
  std::vector<double> weights = jget_vec(params_in, "weights", wdef);
  double phi = jget_num(params_in, "phi", 0.3);
  double k = jget_num(params_in, "k", 0.25);
  int branch = static_cast<int>(jget_int(params_in, "branch", 1));
  std::vector<double> photons = jget_vec(params_in, "photons", default_photon_decades(2, 6, 0.5));
  double fd_step = jget_num(params_in, "fd_step", 1e-5);
  long long quad_nodes = jget_int(params_in, "quad_nodes", 2049);

  if (k == 0.0)
    throw CommandError(2, cmd + ": k must be non-zero; measuring exactly on the squeezed axis "
                          "destroys the leading information channel");
  if (static_cast<int>(weights.size()) != m)
    throw CommandError(2, cmd + ": weights length must equal m");
  if (photons.size() < 2) throw CommandError(2, cmd + ": need at least two photon levels");

  json resolved;
  resolved["m"] = m;
  resolved["weights"] = weights;
  resolved["phi"] = phi;
  resolved["k"] = k;
  resolved["branch"] = branch;
  resolved["photons"] = photons;
  resolved["fd_step"] = fd_step;
  resolved["quad_nodes"] = quad_nodes;
  std::string hash = config_hash(cmd, resolved, opts.seed);

  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), m);
  NetworkFamily fam = make_phase_distributed_family(m, w);
  Rng rng = make_rng(substream_seed(opts.seed, 1));
  UnitaryMatrix v_in = haar_unitary(m, rng);
  UnitaryMatrix v_out = refocus_output(fam.evaluate(phi), v_in);

  std::string csv = header_block(cmd, hash, opts.seed);
  csv += "N,F_explicit,F_numeric,F_asymptotic,ratio\n";
  std::vector<double> lx, ly;
  json rows = json::array();
  for (double n : photons) {
    SqueezedProbe probe = make_probe_from_photons(n);
    Transition t = transition(v_out, fam.evaluate(phi), v_in);
    double theta = optimal_theta(t.gamma, k, n, branch);
    // Coarse pass fixes the information scale; the stencil step is then
    // shrunk so the score difference stays well inside one sigma.
    FisherReport coarse = fisher_report(fam, v_in, v_out, probe, theta, phi, fd_step, false);
    double step = std::min(fd_step, 0.05 / std::sqrt(std::max(1.0, coarse.F_explicit)));
    QuadratureSpec q;
    q.nodes = static_cast<int>(quad_nodes);
    FisherReport rep = fisher_report(fam, v_in, v_out, probe, theta, phi, step, true, q);
    double ratio = rep.F_explicit / rep.F_asymptotic;
    csv += fmt(n) + "," + fmt(rep.F_explicit) + "," + fmt(rep.F_numeric) + "," +
           fmt(rep.F_asymptotic) + "," + fmt(ratio) + "\n";
    lx.push_back(std::log10(n));
    ly.push_back(std::log10(rep.F_explicit));
    json row;
    row["photons"] = n;
    row["F_explicit"] = rep.F_explicit;
    row["F_numeric"] = rep.F_numeric;
    row["F_asymptotic"] = rep.F_asymptotic;
    row["ratio"] = ratio;
    row["ell"] = rep.ell;
    rows.push_back(row);
  }
  LineFit fit = fit_line(lx, ly);

  json out = result_envelope(cmd, hash, opts.seed, resolved);
  out["results"]["rows"] = rows;
  out["results"]["slope"] = fit.slope;
  out["results"]["slope_within_band"] = std::fabs(fit.slope - 2.0) <= 0.02;
  out["results"]["ratio_at_largest"] = rows.back()["ratio"];

  std::filesystem::path dir(opts.out_dir);
  write_text_file(dir / "fisher_scaling.csv", csv);
  write_text_file(dir / "fisher_scaling.json", out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// typicality-hist: Monte Carlo prefactor distribution over Haar networks for
// a two-point generator spectrum, with the closed-form density overlay.
// ---------------------------------------------------------------------------
inline int cmd_typicality_hist(const json& params_in, const CommonOpts& opts) {
  const std::string cmd = "typicality-hist";
  reject_unknown_keys(params_in,
                      {"m_list", "g_high", "g_low", "samples", "bins", "seed", "threads"}, cmd);
  std::vector<int> m_list = jget_ivec(params_in, "m_list", {2, 20, 200});
  double g_high = jget_num(params_in, "g_high", 3.0);
  double g_low = jget_num(params_in, "g_low", 1.0);
  long long samples = jget_int(params_in, "samples", 100000);
  int bins = static_cast<int>(jget_int(params_in, "bins", 50));
  int threads = opts.threads > 0 ? opts.threads
                                 : static_cast<int>(jget_int(params_in, "threads", 0));
  if (samples < 100) throw CommandError(2, cmd + ": need at least 100 samples");
  if (bins < 2) throw CommandError(2, cmd + ": need at least 2 bins");
  if (!(g_high > g_low) || !(g_low >= 0))
    throw CommandError(2, cmd + ": need g_high > g_low >= 0");

  json resolved;
  resolved["m_list"] = m_list;
  resolved["g_high"] = g_high;
  resolved["g_low"] = g_low;
  resolved["samples"] = samples;
  resolved["bins"] = bins;
  std::string hash = config_hash(cmd, resolved, opts.seed);
  std::filesystem::path dir(opts.out_dir);

  json out = result_envelope(cmd, hash, opts.seed, resolved);
  json per_m = json::array();
  for (std::size_t mi = 0; mi < m_list.size(); ++mi) {
    int m = m_list[mi];
    if (m < 2 || m % 2 != 0)
      throw CommandError(2, cmd + ": every m must be even and >= 2 for the half/half spectrum");
    int kk = m / 2;
    Eigen::VectorXd spectrum(m);
    for (int j = 0; j < m; ++j) spectrum(j) = j < kk ? g_high : g_low;
    TwoEigSpec spec = make_two_eig_spec(g_high, g_low, kk, m);

    PrefactorStats ps =
        sample_prefactor(spectrum, samples, substream_seed(opts.seed, 10 + mi), threads);

    double lo = g_low * g_low, hi = g_high * g_high;
    Histogram h(lo, hi, bins);
    RunningStats rs;
    for (double v : ps.samples) {
      h.add(v);
      rs.add(v);
    }

    std::string csv = header_block(cmd, hash, opts.seed);
    csv += "bin_left,bin_right,density\n";
    std::vector<double> counts(static_cast<std::size_t>(bins)), probs(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
      csv += fmt(h.bin_left(b)) + "," + fmt(h.bin_right(b)) + "," + fmt(h.density(b)) + "\n";
      counts[static_cast<std::size_t>(b)] = h.count(b);
      probs[static_cast<std::size_t>(b)] =
          two_eig_cdf(h.bin_right(b), spec) - two_eig_cdf(h.bin_left(b), spec);
    }
    write_text_file(dir / ("typicality_hist_m" + std::to_string(m) + ".csv"), csv);

    std::string overlay = header_block(cmd, hash, opts.seed);
    overlay += "x,density\n";
    int npts = 4 * bins + 1;
    for (int i = 0; i < npts; ++i) {
      double x = lo + (hi - lo) * i / (npts - 1);
      overlay += fmt(x) + "," + fmt(two_eig_pdf(x, spec)) + "\n";
    }
    write_text_file(dir / ("typicality_pdf_m" + std::to_string(m) + ".csv"), overlay);

    GofResult gof = chi_square_gof(counts, probs);

    json tails = json::array();
    for (double eps : {0.5, 1.0, 2.0}) {
      long long exceed = 0;
      for (double v : ps.samples)
        if (std::fabs(v - ps.mean_analytic) > eps) ++exceed;
      json t;
      t["eps"] = eps;
      t["empirical"] = static_cast<double>(exceed) / static_cast<double>(samples);
      t["bound"] = concentration_bound(eps, m, ps.opnorm);
      tails.push_back(t);
    }

    json e;
    e["m"] = m;
    e["k"] = kk;
    e["mean_mc"] = ps.mean_mc;
    e["stderr_mc"] = ps.stderr_mc;
    e["mean_analytic"] = ps.mean_analytic;
    e["jensen_bound"] = ps.jensen;
    e["opnorm"] = ps.opnorm;
    e["sample_sd"] = rs.stddev();
    e["chi2"] = {{"stat", gof.stat}, {"dof", gof.dof}, {"p_value", gof.p_value},
                 {"pooled_bins", gof.pooled_bins}};
    e["tails"] = tails;
    per_m.push_back(e);
  }
  out["results"]["per_m"] = per_m;
  write_text_file(dir / "typicality_hist.json", out.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// haar-moments: Monte Carlo test of the low-order Haar moment table and the
// conjugation identities. Nonzero exit when any z-score leaves the band.
// ---------------------------------------------------------------------------
inline int cmd_haar_moments(const json& params_in, const CommonOpts& opts) {
  const std::string cmd = "haar-moments";
  reject_unknown_keys(params_in, {"m", "samples", "z_max", "seed", "threads"}, cmd);
  int m = static_cast<int>(jget_int(params_in, "m", 4));
  long long samples = jget_int(params_in, "samples", 1000000);
  double z_max = jget_num(params_in, "z_max", 4.0);
  if (m < 1) throw CommandError(2, cmd + ": m must be >= 1");
  if (samples < 10000) throw CommandError(2, cmd + ": need at least 1e4 samples");

  json resolved;
  resolved["m"] = m;
  resolved["samples"] = samples;
  resolved["z_max"] = z_max;
  std::string hash = config_hash(cmd, resolved, opts.seed);

  Rng rng = make_rng(substream_seed(opts.seed, 2));
  std::vector<MomentRow> rows = haar_moment_suite(m, samples, rng);
  bool all_pass = suite_passes(rows, z_max);

  json out = result_envelope(cmd, hash, opts.seed, resolved);
  json table = json::array();
  for (const MomentRow& r : rows) {
    json e;
    e["name"] = r.name;
    e["sample"] = r.sample;
    e["analytic"] = r.analytic;
    e["se"] = r.se;
    e["z"] = r.z;
    e["pass"] = std::fabs(r.z) <= z_max;
    table.push_back(e);
  }
  out["results"]["rows"] = table;
  out["results"]["all_pass"] = all_pass;

  write_text_file(std::filesystem::path(opts.out_dir) / "haar_moments.json", out.dump(2) + "\n");
  return all_pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// adaptive-check: exact refocusing residuals and the ell = N(1-P) scaling of
// coherent stage errors of size 1/sqrt(N).
// ---------------------------------------------------------------------------
inline int cmd_adaptive_check(const json& params_in, const CommonOpts& opts) {
  const std::string cmd = "adaptive-check";
  reject_unknown_keys(params_in,
                      {"m", "pairs", "photons", "draws", "eps_coeff", "refocus_tol", "slope_tol",
                       "seed", "threads"},
                      cmd);
  int m = static_cast<int>(jget_int(params_in, "m", 8));
  int pairs = static_cast<int>(jget_int(params_in, "pairs", 100));
  std::vector<double> photons = jget_vec(params_in, "photons", default_photon_decades(2, 6, 1.0));
  int draws = static_cast<int>(jget_int(params_in, "draws", 200));
  double eps_coeff = jget_num(params_in, "eps_coeff", 1.0);
  double refocus_tol = jget_num(params_in, "refocus_tol", 1e-12);
  double slope_tol = jget_num(params_in, "slope_tol", 0.1);
  if (m < 2) throw CommandError(2, cmd + ": m must be >= 2");
  if (pairs < 1 || draws < 1) throw CommandError(2, cmd + ": pairs and draws must be >= 1");
  if (photons.size() < 3) throw CommandError(2, cmd + ": need at least 3 photon levels");

  json resolved;
  resolved["m"] = m;
  resolved["pairs"] = pairs;
  resolved["photons"] = photons;
  resolved["draws"] = draws;
  resolved["eps_coeff"] = eps_coeff;
  resolved["refocus_tol"] = refocus_tol;
  resolved["slope_tol"] = slope_tol;
  std::string hash = config_hash(cmd, resolved, opts.seed);

  // Part A: exact refocusing on random pairs, alternating adapted side.
  Rng rng = make_rng(substream_seed(opts.seed, 3));
  double max_res = 0.0;
  for (int i = 0; i < pairs; ++i) {
    UnitaryMatrix u = haar_unitary(m, rng);
    UnitaryMatrix other = haar_unitary(m, rng);
    AdaptedSide side = (i % 2 == 0) ? AdaptedSide::Output : AdaptedSide::Input;
    StagePair sp = make_refocused_pair(u, other, side);
    Transition t = transition(sp.v_out, u, sp.v_in);
    max_res = std::max(max_res, std::fabs(1.0 - t.P));
  }
  bool refocus_ok = max_res <= refocus_tol;

  // Part B: perturb the adapted stage by e^{i eps H}, eps = coeff / sqrt(N).
  std::vector<double> lx, ly;
  json levels = json::array();
  bool quad_bound_ok = true;
  double max_ell = 0.0;
  for (std::size_t i = 0; i < photons.size(); ++i) {
    double n = photons[i];
    double eps = eps_coeff / std::sqrt(n);
    Rng lr = make_rng(substream_seed(opts.seed, 100 + i));
    RunningStats leak;
    for (int d = 0; d < draws; ++d) {
      UnitaryMatrix u = haar_unitary(m, lr);
      UnitaryMatrix v_in = haar_unitary(m, lr);
      UnitaryMatrix v_out = refocus_output(u, v_in);
      UnitaryMatrix v_out_err = perturb_stage(v_out, eps, lr);
      Transition t = transition(v_out_err, u, v_in);
      double one_minus_p = std::max(0.0, 1.0 - t.P);
      leak.add(one_minus_p);
      if (eps <= 0.1 && one_minus_p > eps * eps * (1.0 + 1e-9)) quad_bound_ok = false;
      max_ell = std::max(max_ell, ell_of(std::min(1.0, t.P), n));
    }
    lx.push_back(std::log10(n));
    ly.push_back(std::log10(std::max(leak.mean(), 1e-300)));
    json e;
    e["photons"] = n;
    e["eps"] = eps;
    e["mean_leakage"] = leak.mean();
    e["stderr"] = leak.stderr_mean();
    levels.push_back(e);
  }
  LineFit fit = fit_line(lx, ly);
  bool slope_ok = std::fabs(fit.slope + 1.0) <= slope_tol;
  bool ell_ok = max_ell <= 2.0 * eps_coeff * eps_coeff + 1e-9;  // ell <= 2 |H|^2 eps^2 N = 2 coeff^2

  json out = result_envelope(cmd, hash, opts.seed, resolved);
  out["results"]["max_refocus_residual"] = max_res;
  out["results"]["refocus_ok"] = refocus_ok;
  out["results"]["levels"] = levels;
  out["results"]["slope"] = fit.slope;
  out["results"]["slope_ok"] = slope_ok;
  out["results"]["quadratic_bound_ok"] = quad_bound_ok;
  out["results"]["max_ell"] = max_ell;
  out["results"]["ell_bound_ok"] = ell_ok;
  bool all_pass = refocus_ok && slope_ok && quad_bound_ok && ell_ok;
  out["results"]["all_pass"] = all_pass;

  write_text_file(std::filesystem::path(opts.out_dir) / "adaptive_check.json", out.dump(2) + "\n");
  return all_pass ? 0 : 3;
}

// ---------------------------------------------------------------------------
// estimate: end-to-end estimation sweep. Main run must track the 1/N law and
// sit within a factor two of the bound at the top; controls record verdicts.
// ---------------------------------------------------------------------------
inline int cmd_estimate(const json& params_in, const CommonOpts& opts) {
  const std::string cmd = "estimate";
  reject_unknown_keys(params_in,
                      {"m", "weights", "phi_true", "photons", "nu", "trials", "k", "branch",
                       "pre_c", "side", "control", "slope_tol", "shallow_threshold",
                       "write_trials", "seed", "threads"},
                      cmd);
  int m = static_cast<int>(jget_int(params_in, "m", 8));
  std::vector<double> wdef = {3, 3, 3, 3, 1, 1, 1, 1};
  if (m != 8) wdef.assign(static_cast<std::size_t>(std::max(m, 1)), 1.0);
  std::vector<double> weights = jget_vec(params_in, "weights", wdef);
  double phi_true = jget_num(params_in, "phi_true", 0.3);
  std::vector<double> photons = jget_vec(params_in, "photons", {1e2, 1e3, 1e4});
  long long nu = jget_int(params_in, "nu", 10000);
  int trials = static_cast<int>(jget_int(params_in, "trials", 200));
  double k = jget_num(params_in, "k", 0.25);
  int branch = static_cast<int>(jget_int(params_in, "branch", 1));
  // Default pre-estimate noise keeps the k-offset spread dgamma*pre_c*sqrt(N)
  // well below k = 1/4 through N = 1e4; larger values push a tail of trials
  // onto the blind squeezed axis and the top-level rmse past the bound.
  double pre_c = jget_num(params_in, "pre_c", 1e-4);
  std::string side = jget_str(params_in, "side", "output");
  std::string control = jget_str(params_in, "control", "none");
  double slope_tol = jget_num(params_in, "slope_tol", 0.1);
  double shallow_threshold = jget_num(params_in, "shallow_threshold", -0.7);
  bool write_trials = jget_bool(params_in, "write_trials", false);
  int threads = opts.threads > 0 ? opts.threads
                                 : static_cast<int>(jget_int(params_in, "threads", 0));

  if (opts.control) control = "k-zero";
  if (control != "none" && control != "k-zero" && control != "no-refocus")
    throw CommandError(2, cmd + ": control must be one of none, k-zero, no-refocus");
  if (side != "output" && side != "input")
    throw CommandError(2, cmd + ": side must be output or input");
  if (static_cast<int>(weights.size()) != m)
    throw CommandError(2, cmd + ": weights length must equal m");
  if (control != "k-zero" && k == 0.0)
    throw CommandError(2, cmd + ": k must be non-zero outside the k-zero control");
  // The k-zero control keeps the module-default pre-estimate noise c = 1:
  // with a small c it would sit at the exact variance minimum, whose
  // inversion error also falls like 1/N instead of being shallower.
  double effective_c = (control == "k-zero" && !params_in.contains("pre_c")) ? 1.0 : pre_c;

  json resolved;
  resolved["m"] = m;
  resolved["weights"] = weights;
  resolved["phi_true"] = phi_true;
  resolved["photons"] = photons;
  resolved["nu"] = nu;
  resolved["trials"] = trials;
  resolved["k"] = k;
  resolved["branch"] = branch;
  resolved["pre_c"] = effective_c;
  resolved["side"] = side;
  resolved["control"] = control;
  resolved["slope_tol"] = slope_tol;
  resolved["shallow_threshold"] = shallow_threshold;
  resolved["write_trials"] = write_trials;
  std::string hash = config_hash(cmd, resolved, opts.seed);

  Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), m);
  NetworkFamily fam = make_phase_distributed_family(m, w);

  ExperimentConfig base;
  base.phi_true = phi_true;
  base.nu = nu;
  base.trials = trials;
  base.adapted_side = side == "output" ? AdaptedSide::Output : AdaptedSide::Input;
  base.pre_estimate_noise_c = effective_c;
  base.k = k;
  base.branch = branch;
  base.seed = opts.seed;
  base.threads = threads;
  base.control_k_zero = control == "k-zero";
  base.control_no_refocus = control == "no-refocus";
  base.probe = make_probe_from_photons(photons.front());

  SweepResult sweep = scaling_sweep(fam, base, photons);

  json rows = json::array();
  std::string trials_csv = header_block(cmd, hash, opts.seed) + "photons,trial,estimate\n";
  bool crb_ok = true;
  for (const SweepPoint& pt : sweep.points) {
    const EstimationReport& r = pt.report;
    json e;
    e["photons"] = pt.photons;
    e["rmse"] = r.rmse;
    e["crb"] = r.crb;
    e["ratio"] = r.rmse / r.crb;
    e["fisher_used"] = r.fisher_used;
    e["mean_estimate"] = r.mean_estimate;
    e["out_of_window"] = r.out_of_window;
    e["trials_used"] = static_cast<long long>(r.estimates.size());
    e["coverage_note"] = r.coverage_note;
    rows.push_back(e);
    double slack = 1.0 - 3.0 / std::sqrt(static_cast<double>(r.estimates.size()));
    if (r.rmse < r.crb * slack) crb_ok = false;
    for (std::size_t t = 0; t < r.estimates.size(); ++t)
      trials_csv += fmt(pt.photons) + "," + std::to_string(t) + "," + fmt(r.estimates[t]) + "\n";
  }

  const EstimationReport& top = sweep.points.back().report;
  bool efficiency_ok = top.rmse <= 2.0 * top.crb;
  bool slope_ok = std::fabs(sweep.slope + 1.0) <= slope_tol;
  bool shallower = sweep.slope > shallow_threshold;

  json out = result_envelope(cmd, hash, opts.seed, resolved);
  out["results"]["rows"] = rows;
  out["results"]["slope"] = sweep.slope;
  int code = 0;
  if (control == "none") {
    out["results"]["slope_ok"] = slope_ok;
    out["results"]["crb_respected"] = crb_ok;
    out["results"]["efficiency_at_top_ok"] = efficiency_ok;
    bool all_pass = slope_ok && crb_ok && efficiency_ok;
    out["results"]["all_pass"] = all_pass;
    code = all_pass ? 0 : 3;
  } else {
    // Controls always exit 0; the verdict is recorded, not enforced.
    out["results"]["control_verdict"] =
        std::string(shallower ? "PASS" : "FAIL") + ": slope " + fmt(sweep.slope) +
        (shallower ? " is shallower than " : " is NOT shallower than ") + fmt(shallow_threshold);
    out["results"]["slope_shallower"] = shallower;
  }

  std::filesystem::path dir(opts.out_dir);
  write_text_file(dir / "estimate.json", out.dump(2) + "\n");
  if (write_trials) write_text_file(dir / "estimate_trials.csv", trials_csv);
  return code;
}

// Dispatch plus uniform error-to-exit-code mapping.
inline int run_command(const std::string& name, const json& params, const CommonOpts& opts) {
  try {
    if (!opts.has_seed)
      throw CommandError(2, name + ": a seed is required for stochastic commands");
    std::filesystem::create_directories(opts.out_dir);
    if (name == "fisher-scaling") return cmd_fisher_scaling(params, opts);
    if (name == "typicality-hist") return cmd_typicality_hist(params, opts);
    if (name == "haar-moments") return cmd_haar_moments(params, opts);
    if (name == "adaptive-check") return cmd_adaptive_check(params, opts);
    if (name == "estimate") return cmd_estimate(params, opts);
    throw CommandError(2, "unknown command " + name);
  } catch (const CommandError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 1;
  }
}

}  // namespace netphase::cli
