#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <netphase/typicality.hpp>

using namespace netphase;

namespace {
HermitianMatrix diag_h(std::initializer_list<double> v) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<int>(v.size()),
                                              static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) m(i, i) = x, ++i;
  return HermitianMatrix(m);
}
Eigen::VectorXd half_spectrum(int m, double hi, double lo) {
  Eigen::VectorXd g(m);
  for (int i = 0; i < m; ++i) g(i) = (i < m / 2) ? hi : lo;
  return g;
}
}  // namespace

TEST_CASE("prefactor on elementary cases") {
  Rng rng = make_rng(21);
  HermitianMatrix scaled(Eigen::MatrixXcd::Identity(4, 4) * 2.5);
  for (int i = 0; i < 5; ++i) {
    UnitaryMatrix u = haar_unitary(4, rng);
    REQUIRE(std::fabs(prefactor(u, scaled) - 6.25) < 1e-12);
  }
  UnitaryMatrix id(Eigen::MatrixXcd::Identity(2, 2));
  REQUIRE(std::fabs(prefactor(id, diag_h({3.0, 1.0})) - 9.0) < 1e-14);
}

TEST_CASE("prefactor from the first column matches the full-matrix form") {
  Rng rng = make_rng(22);
  Eigen::VectorXd g = half_spectrum(6, 3.0, 1.0);
  HermitianMatrix gh = diag_h({3, 3, 3, 1, 1, 1});
  for (int i = 0; i < 50; ++i) {
    UnitaryMatrix u = haar_unitary(6, rng);
    double full = prefactor(u, gh);
    double col = prefactor_from_column(u.mat().col(0), g);
    REQUIRE(std::fabs(full - col) < 1e-12 * std::max(1.0, full));
  }
}

TEST_CASE("mean prefactor: frozen values and the Jensen floor") {
  REQUIRE(std::fabs(mean_prefactor_from_spectrum(half_spectrum(2, 3, 1)) - 13.0 / 3.0) < 1e-12);
  REQUIRE(std::fabs(mean_prefactor_from_spectrum(half_spectrum(20, 3, 1)) -
                    4.047619047619048) < 1e-12);
  REQUIRE(std::fabs(mean_prefactor_from_spectrum(half_spectrum(200, 3, 1)) -
                    4.004975124378109) < 1e-12);
  REQUIRE(std::fabs(mean_prefactor(diag_h({3, 1}), 2) - 13.0 / 3.0) < 1e-12);

  REQUIRE(jensen_bound(half_spectrum(2, 1, -1)) == 0.0);
  REQUIRE(std::fabs(jensen_bound(half_spectrum(2, 3, 1)) - 4.0) < 1e-14);

  Rng rng = make_rng(23);
  for (int i = 0; i < 20; ++i) {
    int m = 2 + static_cast<int>(rng() % 9);
    Eigen::VectorXd g(m);
    for (int j = 0; j < m; ++j) g(j) = 4.0 * uniform01(rng) - 2.0;
    REQUIRE(mean_prefactor_from_spectrum(g) >= jensen_bound(g) - 1e-12);
  }
}

TEST_CASE("two-eigenvalue density: frozen points, support, normalization, CDF") {
  TwoEigSpec m2 = make_two_eig_spec(3.0, 1.0, 1, 2);
  REQUIRE(std::fabs(two_eig_pdf(4.0, m2) - 0.125) < 1e-12);

  TwoEigSpec m20 = make_two_eig_spec(3.0, 1.0, 10, 20);
  REQUIRE(std::fabs(two_eig_pdf(4.0, m20) - 0.44049263000488281) < 1e-12);
  REQUIRE(std::fabs(two_eig_pdf(2.25, m20) - 0.044099001243012026) < 1e-12);

  TwoEigSpec m200 = make_two_eig_spec(3.0, 1.0, 100, 200);
  REQUIRE(std::fabs(two_eig_pdf(4.0, m200) - 1.40871197523141056) < 2e-12);
  REQUIRE(std::fabs(two_eig_pdf(4.2, m200) - 1.07948744548914693) < 2e-12);

  for (const TwoEigSpec& s : {m2, m20, m200}) {
    REQUIRE(two_eig_pdf(0.5, s) == 0.0);
    REQUIRE(two_eig_pdf(9.5, s) == 0.0);
    // Simpson over the support
    int nodes = 200001;
    double lo = s.g2 * s.g2, hi = s.g1 * s.g1, h = (hi - lo) / (nodes - 1);
    double acc = two_eig_pdf(lo, s) + two_eig_pdf(hi, s);
    for (int i = 1; i < nodes - 1; ++i)
      acc += two_eig_pdf(lo + i * h, s) * ((i % 2) ? 4.0 : 2.0);
    REQUIRE(std::fabs(acc * h / 3.0 - 1.0) < 1e-6);
    REQUIRE(two_eig_cdf(lo - 1.0, s) == 0.0);
    REQUIRE(two_eig_cdf(hi + 1.0, s) == 1.0);
    // CDF at midpoint vs quadrature of the density
    double mid = 0.5 * (lo + hi);
    int half_nodes = 100001;
    double hh = (mid - lo) / (half_nodes - 1);
    double acc2 = two_eig_pdf(lo, s) + two_eig_pdf(mid, s);
    for (int i = 1; i < half_nodes - 1; ++i)
      acc2 += two_eig_pdf(lo + i * hh, s) * ((i % 2) ? 4.0 : 2.0);
    REQUIRE(std::fabs(two_eig_cdf(mid, s) - acc2 * hh / 3.0) < 1e-6);
  }

  REQUIRE_THROWS_AS(make_two_eig_spec(3.0, 3.0, 1, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(make_two_eig_spec(1.0, 3.0, 1, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(make_two_eig_spec(3.0, 1.0, 0, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(two_eig_spec_from_spectrum(Eigen::Vector3d(3.0, 2.0, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("cap weight distribution") {
  REQUIRE(std::fabs(cap_weight_pdf(0.3, 1, 2) - 1.0) < 1e-14);
  REQUIRE(std::fabs(cap_weight_pdf(0.5, 10, 20) - 3.5239410400390625) < 1e-12);
  REQUIRE(cap_weight_pdf(-0.1, 2, 5) == 0.0);
  REQUIRE(cap_weight_pdf(1.1, 2, 5) == 0.0);
  REQUIRE(std::fabs(cap_weight_cdf(1.0, 3, 7) - 1.0) < 1e-14);

  // the squared overlap with the top-k cap has mean k/M under the Haar measure
  Rng rng = make_rng(24);
  int m = 20, k = 10;
  RunningStats ws;
  std::vector<double> sample;
  for (int i = 0; i < 100000; ++i) {
    Eigen::VectorXcd v = haar_unit_vector(m, rng);
    double t = v.head(k).squaredNorm();
    ws.add(t);
    sample.push_back(t);
  }
  REQUIRE(std::fabs(ws.mean() - 0.5) < 4.0 * ws.stderr_mean());
  double d = ks_statistic(sample, [&](double t) { return cap_weight_cdf(t, k, m); });
  REQUIRE(d < ks_critical(0.01, sample.size()));
}

TEST_CASE("sampled prefactor matches the exact mean and respects the support") {
  for (int m : {2, 20}) {
    Eigen::VectorXd g = half_spectrum(m, 3.0, 1.0);
    PrefactorStats st = sample_prefactor(g, 40000, 777, 1);
    REQUIRE(std::fabs(st.mean_mc - st.mean_analytic) < 4.0 * st.stderr_mc);
    REQUIRE(st.mean_analytic >= st.jensen - 1e-12);
  }
}

TEST_CASE("prefactor sampling is invariant to the thread count") {
  Eigen::VectorXd g = half_spectrum(6, 3.0, 1.0);
  PrefactorStats a = sample_prefactor(g, 20000, 99, 1);
  PrefactorStats b = sample_prefactor(g, 20000, 99, 3);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) REQUIRE(a.samples[i] == b.samples[i]);
}

TEST_CASE("sampled prefactor follows the two-eigenvalue law (chi-square)") {
  Eigen::VectorXd g = half_spectrum(2, 3.0, 1.0);
  TwoEigSpec spec = two_eig_spec_from_spectrum(g);
  PrefactorStats st = sample_prefactor(g, 100000, 4242, 1);
  double lo = spec.g2 * spec.g2, hi = spec.g1 * spec.g1;
  int bins = 50;
  Histogram hist(lo, hi, bins);
  for (double x : st.samples) {
    REQUIRE(x >= lo - 1e-12);
    REQUIRE(x <= hi + 1e-12);
    hist.add(x);
  }
  REQUIRE(hist.underflow() == 0);
  REQUIRE(hist.overflow() == 0);
  std::vector<double> probs(bins);
  for (int i = 0; i < bins; ++i)
    probs[i] = two_eig_cdf(hist.bin_right(i), spec) - two_eig_cdf(hist.bin_left(i), spec);
  GofResult gof = chi_square_gof(hist.counts(), probs);
  REQUIRE(gof.p_value > 0.01);
}

TEST_CASE("prefactor distribution is basis-invariant") {
  // rotating G by a fixed unitary leaves the Haar average untouched
  Rng rng = make_rng(25);
  HermitianMatrix g = diag_h({3, 3, 1, 1});
  UnitaryMatrix v = haar_unitary(4, rng);
  Eigen::MatrixXcd rotated_m = v.mat() * g.mat() * adjoint(v).mat();
  HermitianMatrix rotated((rotated_m + rotated_m.adjoint()) / 2.0);
  RunningStats plain, rot;
  for (int i = 0; i < 20000; ++i) {
    plain.add(prefactor(haar_unitary(4, rng), g));
    rot.add(prefactor(haar_unitary(4, rng), rotated));
  }
  double se = std::sqrt(plain.stderr_mean() * plain.stderr_mean() +
                        rot.stderr_mean() * rot.stderr_mean());
  REQUIRE(std::fabs(plain.mean() - rot.mean()) < 5.0 * se);
}

TEST_CASE("prefactor spread shrinks as the port count grows") {
  double prev_sd = 1e300;
  for (int m : {2, 20, 200}) {
    Eigen::VectorXd g = half_spectrum(m, 3.0, 1.0);
    PrefactorStats st = sample_prefactor(g, 10000, static_cast<std::uint64_t>(31 + m), 1);
    RunningStats rs;
    for (double x : st.samples) rs.add(x);
    REQUIRE(rs.stddev() < prev_sd);
    prev_sd = rs.stddev();
  }
}

TEST_CASE("concentration bound: frozen values, monotonicity, guards") {
  REQUIRE(std::fabs(concentration_bound(1.0, 100, 1.0) - 1.912389261839596) < 1e-12);
  REQUIRE(std::fabs(concentration_bound(1.0, 200, 3.0) - 1.99778918342999907) < 1e-12);
  REQUIRE(concentration_bound(2.0, 100, 1.0) < concentration_bound(1.0, 100, 1.0));
  REQUIRE(concentration_bound(1.0, 400, 1.0) < concentration_bound(1.0, 100, 1.0));
  REQUIRE_THROWS_AS(concentration_bound(-1.0, 100, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(concentration_bound(1.0, 0, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(concentration_bound(1.0, 100, 0.0), std::invalid_argument);
}

TEST_CASE("observed tails sit under the concentration bound") {
  Eigen::VectorXd g = half_spectrum(20, 3.0, 1.0);
  PrefactorStats st = sample_prefactor(g, 50000, 55, 1);
  for (double eps : {0.5, 1.0, 2.0}) {
    std::size_t hits = 0;
    for (double x : st.samples)
      if (std::fabs(x - st.mean_analytic) > eps) ++hits;
    double freq = static_cast<double>(hits) / st.samples.size();
    REQUIRE(freq <= concentration_bound(eps, 20, st.opnorm));
  }
}

TEST_CASE("gradient norm of the prefactor respects the Lipschitz cap") {
  Rng rng = make_rng(26);
  Eigen::VectorXd g = half_spectrum(4, 3.0, 1.0);
  double cap = 4.0 * 3.0 * 3.0;  // 4 |G|^2
  double seen = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double gn = gradient_norm_f(haar_unit_vector(4, rng), g);
    REQUIRE(gn <= cap + 1e-9);
    seen = std::max(seen, gn);
  }
  REQUIRE(seen > 0.5 * cap);  // the cap is the right scale, not slack
}

TEST_CASE("haar_moment_suite hits the exact first moments") {
  Rng rng = make_rng(27);
  std::vector<MomentRow> rows = haar_moment_suite(4, 100000, rng);
  REQUIRE(rows.size() == 13);
  bool saw_sq = false, saw_quart = false;
  for (const MomentRow& r : rows) {
    CAPTURE(r.name, r.sample, r.analytic, r.z);
    REQUIRE(std::fabs(r.z) <= 5.0);
    if (r.name == "E|U11|^2") {
      saw_sq = true;
      REQUIRE(std::fabs(r.analytic - 0.25) < 1e-15);
    }
    if (r.name == "E|U11|^4") {
      saw_quart = true;
      REQUIRE(std::fabs(r.analytic - 0.1) < 1e-15);
    }
  }
  REQUIRE(saw_sq);
  REQUIRE(saw_quart);
  REQUIRE(suite_passes(rows, 5.0));
  REQUIRE_THROWS_AS(haar_moment_suite(4, 100, rng), std::invalid_argument);
}
