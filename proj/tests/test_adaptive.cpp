#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include <netphase/adaptive.hpp>
#include <netphase/fisher.hpp>

using namespace netphase;

TEST_CASE("complete_first_column pins the column and stays unitary") {
  Rng rng = make_rng(11);
  for (int i = 0; i < 100; ++i) {
    int m = 2 + static_cast<int>(rng() % 7);
    Eigen::VectorXcd v = haar_unit_vector(m, rng);
    UnitaryMatrix u = complete_first_column(v);
    REQUIRE((u.mat().col(0) - v).cwiseAbs().maxCoeff() < 1e-14);
    REQUIRE(unitarity_error(u.mat()) < 1e-10);
  }
  Eigen::VectorXcd bad = Eigen::VectorXcd::Ones(3);
  REQUIRE_THROWS_AS(complete_first_column(bad), std::invalid_argument);
}

TEST_CASE("refocusing either stage restores unit transmission") {
  Rng rng = make_rng(12);
  for (int i = 0; i < 20; ++i) {
    int m = 2 + static_cast<int>(rng() % 7);
    UnitaryMatrix u = haar_unitary(m, rng);
    UnitaryMatrix v_in = haar_unitary(m, rng);
    UnitaryMatrix v_out = haar_unitary(m, rng);

    UnitaryMatrix w_out = refocus_output(u, v_in);
    Transition a = transition(w_out, u, v_in);
    REQUIRE(std::fabs(a.P - 1.0) < 1e-12);

    UnitaryMatrix w_in = refocus_input(u, v_out);
    Transition b = transition(v_out, u, w_in);
    REQUIRE(std::fabs(b.P - 1.0) < 1e-12);
  }
}

TEST_CASE("refocus_output steers the first output row onto the transmitted mode") {
  Rng rng = make_rng(13);
  UnitaryMatrix u = haar_unitary(6, rng);
  UnitaryMatrix v_in = haar_unitary(6, rng);
  UnitaryMatrix w_out = refocus_output(u, v_in);
  Eigen::RowVectorXcd expect = (adjoint(v_in).mat() * adjoint(u).mat()).row(0);
  REQUIRE((w_out.mat().row(0) - expect).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("refocusing matches one network only") {
  Rng rng = make_rng(14);
  UnitaryMatrix u = haar_unitary(8, rng);
  UnitaryMatrix other = haar_unitary(8, rng);
  UnitaryMatrix v_in = haar_unitary(8, rng);
  UnitaryMatrix w_out = refocus_output(u, v_in);
  Transition mismatched = transition(w_out, other, v_in);
  REQUIRE(mismatched.P < 0.99);
}

TEST_CASE("perturb_stage: identity at zero, unitary output, quadratic leakage") {
  Rng rng = make_rng(15);
  UnitaryMatrix v = haar_unitary(6, rng);
  UnitaryMatrix same = perturb_stage(v, 0.0, rng);
  REQUIRE((same.mat() - v.mat()).cwiseAbs().maxCoeff() == 0.0);

  UnitaryMatrix u = haar_unitary(6, rng);
  UnitaryMatrix v_in = haar_unitary(6, rng);
  UnitaryMatrix v_out = refocus_output(u, v_in);
  for (double eps : {0.01, 0.05, 0.1}) {
    for (int i = 0; i < 50; ++i) {
      UnitaryMatrix tilted = perturb_stage(v_out, eps, rng);
      REQUIRE(unitarity_error(tilted.mat()) < 1e-10);
      Transition t = transition(tilted, u, v_in);
      // |u11| >= 1 - eps holds for any direction of operator norm 1,
      // so the leakage 1 - P is at most eps^2 (up to rounding)
      REQUIRE(1.0 - t.P <= eps * eps * (1.0 + 1e-9));
      REQUIRE(1.0 - t.P >= -1e-12);
    }
  }
}

TEST_CASE("calibration-limited leakage keeps ell = N(1-P) bounded") {
  Rng rng = make_rng(16);
  UnitaryMatrix u = haar_unitary(8, rng);
  UnitaryMatrix v_in = haar_unitary(8, rng);
  UnitaryMatrix v_out = refocus_output(u, v_in);
  std::vector<double> lx, ly;
  for (double n : {1e2, 1e3, 1e4, 1e5, 1e6}) {
    double eps = 1.0 / std::sqrt(n);
    RunningStats leak;
    double max_ell = 0.0;
    for (int i = 0; i < 100; ++i) {
      UnitaryMatrix tilted = perturb_stage(v_out, eps, rng);
      Transition t = transition(tilted, u, v_in);
      double one_minus_p = std::max(1.0 - t.P, 0.0);
      leak.add(one_minus_p);
      max_ell = std::max(max_ell, ell_of(t.P, n));
    }
    REQUIRE(max_ell <= 2.0 + 1e-9);
    lx.push_back(std::log10(n));
    ly.push_back(std::log10(std::max(leak.mean(), 1e-300)));
  }
  LineFit fit = fit_line(lx, ly);
  REQUIRE(std::fabs(fit.slope + 1.0) <= 0.1);
}

TEST_CASE("ell_of arithmetic and guards") {
  REQUIRE(std::fabs(ell_of(1.0 - 3.0 / 1e4, 1e4) - 3.0) < 1e-9);
  REQUIRE(std::fabs(ell_of(0.5, 100.0) - 50.0) < 1e-12);
  REQUIRE(ell_of(1.0 + 0.5e-9, 100.0) == 0.0);  // tiny overshoot clamps
  REQUIRE_THROWS_AS(ell_of(1.0 + 1e-6, 100.0), std::invalid_argument);
}

TEST_CASE("make_refocused_pair bookkeeping") {
  Rng rng = make_rng(17);
  UnitaryMatrix u = haar_unitary(4, rng);
  UnitaryMatrix fixed = haar_unitary(4, rng);

  StagePair out_side = make_refocused_pair(u, fixed, AdaptedSide::Output);
  REQUIRE(out_side.adapted_side == AdaptedSide::Output);
  REQUIRE((out_side.v_in.mat() - fixed.mat()).cwiseAbs().maxCoeff() == 0.0);
  Transition t1 = transition(out_side.v_out, u, out_side.v_in);
  REQUIRE(std::fabs(t1.P - 1.0) < 1e-12);

  StagePair in_side = make_refocused_pair(u, fixed, AdaptedSide::Input);
  REQUIRE(in_side.adapted_side == AdaptedSide::Input);
  REQUIRE((in_side.v_out.mat() - fixed.mat()).cwiseAbs().maxCoeff() == 0.0);
  Transition t2 = transition(in_side.v_out, u, in_side.v_in);
  REQUIRE(std::fabs(t2.P - 1.0) < 1e-12);
}

TEST_CASE("random_hermitian_direction is Hermitian with unit operator norm") {
  Rng rng = make_rng(18);
  for (int i = 0; i < 10; ++i) {
    Eigen::MatrixXcd h = random_hermitian_direction(5, rng).mat();
    REQUIRE((h - h.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    REQUIRE(std::fabs(es.eigenvalues().cwiseAbs().maxCoeff() - 1.0) < 1e-12);
  }
}
