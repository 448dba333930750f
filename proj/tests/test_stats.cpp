#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include <netphase/random.hpp>
#include <netphase/stats.hpp>

using namespace netphase;

TEST_CASE("wrap_to_pi maps onto (-pi, pi]") {
  REQUIRE(wrap_to_pi(0.0) == 0.0);
  REQUIRE(std::fabs(wrap_to_pi(M_PI) - M_PI) < 1e-15);
  REQUIRE(std::fabs(wrap_to_pi(-M_PI) - M_PI) < 1e-15);
  REQUIRE(std::fabs(wrap_to_pi(1.5 * M_PI) + 0.5 * M_PI) < 1e-14);
  REQUIRE(std::fabs(wrap_to_pi(-1.5 * M_PI) - 0.5 * M_PI) < 1e-14);
  REQUIRE(std::fabs(wrap_to_pi(7.0 * M_PI + 0.1) - (M_PI + 0.1 - 2.0 * M_PI)) < 1e-13);
  for (double a = -20.0; a < 20.0; a += 0.37) {
    double w = wrap_to_pi(a);
    REQUIRE(w > -M_PI);
    REQUIRE(w <= M_PI);
    REQUIRE(std::fabs(std::remainder(w - a, 2.0 * M_PI)) < 1e-12);
  }
}

TEST_CASE("RunningStats matches closed-form mean and variance") {
  std::vector<double> xs = {1.0, 2.0, 4.0, 8.0, 16.0};
  RunningStats rs;
  for (double x : xs) rs.add(x);
  REQUIRE(rs.count() == 5);
  REQUIRE(std::fabs(rs.mean() - 6.2) < 1e-14);
  // sample variance with Bessel correction: sum (x - 6.2)^2 / 4 = 37.2
  REQUIRE(std::fabs(rs.variance() - 37.2) < 1e-12);
}

TEST_CASE("RunningStats merge equals a single bulk pass") {
  Rng rng = make_rng(11);
  RunningStats bulk, a, b;
  for (int i = 0; i < 1000; ++i) {
    double x = std::exp(standard_normal(rng));
    bulk.add(x);
    (i < 400 ? a : b).add(x);
  }
  a.merge(b);
  REQUIRE(a.count() == bulk.count());
  REQUIRE(std::fabs(a.mean() - bulk.mean()) < 1e-12 * std::fabs(bulk.mean()));
  REQUIRE(std::fabs(a.variance() - bulk.variance()) < 1e-10 * bulk.variance());
}

TEST_CASE("fit_line recovers an exact line") {
  std::vector<double> x = {1, 2, 3, 5, 8}, y;
  for (double v : x) y.push_back(-1.5 * v + 0.25);
  LineFit f = fit_line(x, y);
  REQUIRE(std::fabs(f.slope + 1.5) < 1e-12);
  REQUIRE(std::fabs(f.intercept - 0.25) < 1e-12);
  REQUIRE_THROWS_AS(fit_line({1.0}, {2.0}), std::invalid_argument);
}

TEST_CASE("Histogram bins, edges, and density normalization") {
  Histogram h(0.0, 10.0, 5);
  for (double x : {0.5, 1.5, 2.5, 3.5, 9.9, -1.0, 10.0}) h.add(x);
  REQUIRE(h.bins() == 5);
  REQUIRE(h.total() == 7);
  REQUIRE(h.underflow() == 1);
  REQUIRE(h.overflow() == 1);
  REQUIRE(h.count(0) == 2.0);  // 0.5 and 1.5
  REQUIRE(h.count(1) == 2.0);
  REQUIRE(h.bin_left(3) == 6.0);
  REQUIRE(h.bin_right(3) == 8.0);
  double mass = 0.0;
  for (int i = 0; i < h.bins(); ++i) mass += h.density(i) * (h.bin_right(i) - h.bin_left(i));
  REQUIRE(std::fabs(mass - 5.0 / 7.0) < 1e-12);  // in-range fraction
}

TEST_CASE("regularized incomplete gamma against reference values") {
  REQUIRE(std::fabs(gamma_q(0.5, 1.0) - 0.15729920705028513) < 1e-14);  // erfc(1)
  REQUIRE(std::fabs(gamma_q(1.0, 2.0) - std::exp(-2.0)) < 1e-15);
  REQUIRE(std::fabs(gamma_q(5.0, 5.0) - 0.44049328506521241) < 1e-13);
  REQUIRE(std::fabs(gamma_q(24.5, 30.0) - 0.13486434652532073) < 1e-13);
  REQUIRE(gamma_q(3.0, 0.0) == 1.0);
  REQUIRE_THROWS_AS(gamma_q(-1.0, 1.0), std::invalid_argument);
  REQUIRE(std::fabs(chi_square_sf(60.0, 49) - 0.13486434652532073) < 1e-13);
}

TEST_CASE("regularized incomplete beta against reference values") {
  REQUIRE(std::fabs(betai(10.0, 10.0, 0.5) - 0.5) < 1e-14);
  REQUIRE(std::fabs(betai(2.0, 3.0, 0.25) - 0.26171875) < 1e-14);  // exact rational
  REQUIRE(std::fabs(betai(10.0, 10.0, 0.3) - 0.032553356881300948) < 1e-14);
  REQUIRE(betai(2.0, 2.0, 0.0) == 0.0);
  REQUIRE(betai(2.0, 2.0, 1.0) == 1.0);
  for (double x : {0.1, 0.37, 0.62, 0.9})
    REQUIRE(std::fabs(betai(3.5, 1.25, x) - (1.0 - betai(1.25, 3.5, 1.0 - x))) < 1e-13);
  REQUIRE_THROWS_AS(betai(0.0, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("Kolmogorov tail and critical value") {
  REQUIRE(std::fabs(kolmogorov_q(1.0) - 0.26999967167735452) < 1e-14);
  REQUIRE(kolmogorov_q(0.0) == 1.0);
  REQUIRE(kolmogorov_q(5.0) < 1e-19);
  // lambda at alpha = 0.01 is 1.6276236...; ks_critical returns lambda/sqrt(n)
  double d = ks_critical(0.01, 100000);
  REQUIRE(std::fabs(d * std::sqrt(1e5) - 1.6276236115189503) < 1e-9);
}

TEST_CASE("ks_statistic on a uniform grid has the known gap") {
  std::vector<double> xs = {0.1, 0.3, 0.5, 0.7, 0.9};
  auto cdf = [](double x) { return x; };  // uniform model
  double d = ks_statistic(xs, cdf);
  REQUIRE(std::fabs(d - 0.1) < 1e-12);  // max gap of the 5-point grid vs U(0,1)
}

TEST_CASE("chi-square GoF: exact expected counts give p = 1") {
  std::vector<double> obs = {10, 20, 30, 40};
  std::vector<double> probs = {0.1, 0.2, 0.3, 0.4};
  GofResult g = chi_square_gof(obs, probs);
  REQUIRE(g.stat == 0.0);
  REQUIRE(g.dof == 3);
  REQUIRE(g.p_value == 1.0);
  REQUIRE(g.pooled_bins == 4);
}

TEST_CASE("chi-square GoF pools sparse bins") {
  // 10 bins with tiny expected mass at the edges must be pooled
  std::vector<double> obs(10, 0.0), probs(10, 0.0);
  obs[4] = 50;
  obs[5] = 50;
  probs[4] = 0.5;
  probs[5] = 0.48;
  for (int i : {0, 1, 2, 3, 6, 7, 8, 9}) probs[static_cast<std::size_t>(i)] = 0.0025;
  GofResult g = chi_square_gof(obs, probs);
  REQUIRE(g.pooled_bins < 10);
  REQUIRE(g.dof >= 1);
  REQUIRE(g.p_value > 0.0);
  REQUIRE(g.p_value <= 1.0);
}

TEST_CASE("splitmix64 reference vector") {
  std::uint64_t s = 0;
  REQUIRE(splitmix64_next(s) == 0xE220A8397B1DCDAFULL);
  REQUIRE(splitmix64_next(s) == 0x6E789E6AA1B965F4ULL);
}

TEST_CASE("substream seeds do not collide over a wide index range") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 4096; ++i) seen.insert(substream_seed(12345, i));
  REQUIRE(seen.size() == 4096);
  REQUIRE(substream_seed(1, 0) != substream_seed(2, 0));
}

TEST_CASE("uniform01 stays in [0, 1) and normal moments check out") {
  Rng rng = make_rng(99);
  RunningStats u, n;
  for (int i = 0; i < 100000; ++i) {
    double x = uniform01(rng);
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    u.add(x);
    n.add(standard_normal(rng));
  }
  REQUIRE(std::fabs(u.mean() - 0.5) < 5.0 * u.stderr_mean());
  REQUIRE(std::fabs(n.mean()) < 5.0 * n.stderr_mean());
  REQUIRE(std::fabs(n.variance() - 1.0) < 0.02);
}

TEST_CASE("standard_normal stream is reproducible from the seed") {
  Rng a = make_rng(777), b = make_rng(777);
  for (int i = 0; i < 100; ++i) REQUIRE(standard_normal(a) == standard_normal(b));
}
