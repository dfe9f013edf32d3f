#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kshc/control.hpp"
#include "kshc/errors.hpp"

using namespace kshc;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("dyadic schedule: taus, cut frequencies, truncation") {
  LRSchedule s = lr_schedule(1.0, 1.0, 16);
  CHECK(s.entries[0].tau == doctest::Approx(0.5));
  CHECK(s.entries[0].r == doctest::Approx(16.0));
  CHECK(s.entries[1].r == doctest::Approx(256.0));

  double sum = 0.0;
  for (const auto& e : s.entries) sum += e.tau;
  const int J = static_cast<int>(s.entries.size());
  CHECK(sum == doctest::Approx(1.0 - std::pow(2.0, -J)).epsilon(1e-12));

  const double mu_max = SpectralBasis(16).mu(16);
  CHECK(s.entries.back().r >= mu_max);
  CHECK(s.entries[J - 2].r < mu_max);
  for (int j = 1; j < J; ++j) CHECK(s.entries[j].r > s.entries[j - 1].r);

  // beta = pi^2: the first band covers exactly modes 1..2
  LRSchedule s2 = lr_schedule(1.0, kPi * kPi, 16);
  CHECK(s2.entries[0].r == doctest::Approx(16.0 * std::pow(kPi, 4)));
  SpectralBasis basis(16);
  int covered = 0;
  for (int i = 1; i <= 16; ++i)
    if (basis.mu(i) <= s2.entries[0].r) ++covered;
  CHECK(covered == 2);
}

TEST_CASE("scalar Riccati matches the closed form to 1e-8") {
  const double a = 0.5, tau = 1.0, eps = 0.1;
  RiccatiProblem prob;
  prob.A = Eigen::MatrixXd::Constant(1, 1, a);
  prob.S = Eigen::MatrixXd::Identity(1, 1);
  prob.C = Eigen::MatrixXd::Zero(1, 1);
  prob.P_terminal = Eigen::MatrixXd::Constant(1, 1, 1.0 / eps);
  prob.tau = tau;
  RiccatiOptions opts;
  opts.ds_max_fraction = 1.0 / 20000.0;
  opts.layer_growth = 1.05;
  RiccatiSolution sol = solve_riccati_backward(prob, opts);

  auto exact = [&](double t) {
    const double w = (eps - 0.5 / a) * std::exp(2.0 * a * (t - tau)) + 0.5 / a;
    return 1.0 / w;
  };
  for (double t : {0.0, 0.25, 0.5, 0.75, 0.9999}) {
    CHECK(sol.at(t)(0, 0) == doctest::Approx(exact(t)).epsilon(1e-8));
  }
  CHECK(sol.at(tau)(0, 0) == doctest::Approx(1.0 / eps).epsilon(1e-12));
}

TEST_CASE("huge epsilon removes the terminal penalty: P ~ 0, zero control") {
  SpectralBasis basis(2);
  SystemCoefficients coeffs;
  ControlOperator ctrl(basis, 0.3, 0.7);
  RiccatiProblem prob = make_band_lq_problem(basis, coeffs, ctrl, basis.mu(2), 0.4, 1e12);
  RiccatiSolution sol = solve_riccati_backward(prob);
  double pmax = 0.0;
  for (const auto& P : sol.P) pmax = std::max(pmax, P.norm());
  CHECK(pmax < 1e-9);

  ModalState x0(2);
  x0.y << 1.0, 0.5;
  x0.z << 0.2, -0.3;
  PartialControlEnsemble pc = partial_spectral_control(
      x0, basis.mu(2), 0.4, 1e12, basis, coeffs, ctrl, 4, 7, 1e-3, 1);
  CHECK(pc.e_cost < 1e-12 * x0.norm2());
}

TEST_CASE("zero initial state: zero control and zero cost") {
  SpectralBasis basis(2);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.0, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  ModalState x0(2);
  PartialControlEnsemble pc = partial_spectral_control(
      x0, basis.mu(2), 0.4, 1e-4, basis, coeffs, ctrl, 8, 3, 1e-3, 1);
  CHECK(pc.e_cost == 0.0);
  CHECK(pc.e_norm2_end == 0.0);
}

TEST_CASE("penalized band kill: strength and epsilon monotonicity") {
  SpectralBasis basis(2);
  SystemCoefficients coeffs;  // b = 0
  ControlOperator ctrl(basis, 0.3, 0.7);
  ModalState x0(2);
  x0.y << 1.0, -0.7;
  x0.z << 0.6, 0.4;

  double prev_band = -1.0;
  for (double eps : {1e-2, 1e-4, 1e-6}) {
    PartialControlEnsemble pc = partial_spectral_control(
        x0, basis.mu(2), 0.5, eps, basis, coeffs, ctrl, 32, 11, 2.5e-4, 1);
    if (prev_band >= 0.0) CHECK(pc.e_band2_mid < prev_band);
    prev_band = pc.e_band2_mid;
    if (eps == 1e-6) CHECK(pc.e_band2_mid / x0.norm2() <= 1e-4);
  }
}

TEST_CASE("free half interval: complement decays at the dissipation rate") {
  SpectralBasis basis(4);
  SystemCoefficients coeffs;  // b = 0, sigma = 1
  ControlOperator ctrl(basis, 0.3, 0.7);
  ModalState x0(4);
  x0.y << 0.8, -0.5, 0.9, 0.3;
  x0.z << 0.5, 0.7, -0.6, 0.2;
  const double tau = 0.2;
  PartialControlEnsemble pc = partial_spectral_control(
      x0, basis.mu(2), tau, 1e-8, basis, coeffs, ctrl, 1, 5, 1e-4, 1);
  const double perp_mid = pc.e_norm2_mid - pc.e_band2_mid;
  const double perp_end = pc.e_norm2_end - pc.e_band2_end;
  const double gamma3 = 2.0 * basis.lambda(3) - coeffs.sigma();
  CHECK(perp_end <= perp_mid * std::exp(-gamma3 * tau / 2.0) * 1.5);
  CHECK(perp_end < perp_mid);
}

TEST_CASE("adapted feedback: spliced paths agree up to the splice") {
  SpectralBasis basis(2);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.2, 0.1, 0.15);
  ControlOperator ctrl(basis, 0.3, 0.7);
  ModalState x0(2);
  x0.y << 1.0, 0.3;
  x0.z << -0.4, 0.2;

  const double tau = 0.4;
  const int n_steps = 400;
  BrownianPath pa = BrownianPath::generate(tau / n_steps, n_steps, 101);
  BrownianPath pb = BrownianPath::generate(tau / n_steps, n_steps, 202);
  const int m = 150;
  for (int k = 0; k < m; ++k) pb.increments[k] = pa.increments[k];

  PartialControlPath res = partial_spectral_control_path(
      x0, basis.mu(2), tau, 1e-5, basis, coeffs, ctrl, pa);
  TrajectoryRecord ta = simulate(x0, basis, coeffs, pa, &res.policy, &ctrl, nullptr);
  TrajectoryRecord tb = simulate(x0, basis, coeffs, pb, &res.policy, &ctrl, nullptr);

  for (int k = 0; k <= m; ++k) {
    if (ta.controls[k].size() == 0) continue;
    CHECK(ta.controls[k] == tb.controls[k]);
  }
  bool diverged = false;
  for (int k = m + 1; k < n_steps && !diverged; ++k)
    if (ta.controls[k].size() > 0 && ta.controls[k] != tb.controls[k]) diverged = true;
  CHECK(diverged);
}

TEST_CASE("closed-loop cost scales exactly with the squared data norm") {
  SpectralBasis basis(2);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  ModalState x0(2);
  x0.y << 0.5, -0.25;
  x0.z << 0.125, 0.75;
  ModalState x2(2);
  x2.y = 2.0 * x0.y;
  x2.z = 2.0 * x0.z;

  PartialControlEnsemble a = partial_spectral_control(
      x0, basis.mu(2), 0.3, 1e-4, basis, coeffs, ctrl, 16, 9, 1e-3, 1);
  PartialControlEnsemble b = partial_spectral_control(
      x2, basis.mu(2), 0.3, 1e-4, basis, coeffs, ctrl, 16, 9, 1e-3, 1);
  CHECK(b.e_cost == 4.0 * a.e_cost);
  CHECK(b.e_norm2_end == 4.0 * a.e_norm2_end);
}

TEST_CASE("OpenMP ensemble equals the serial reference bitwise") {
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.1, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  ModalState x0(4);
  x0.y << 1, -1, 0.5, 0.25;
  x0.z << 0.3, 0.2, -0.4, 0.1;
  PartialControlEnsemble serial = partial_spectral_control(
      x0, basis.mu(3), 0.3, 1e-4, basis, coeffs, ctrl, 64, 17, 1e-3, 1);
  PartialControlEnsemble parallel = partial_spectral_control(
      x0, basis.mu(3), 0.3, 1e-4, basis, coeffs, ctrl, 64, 17, 1e-3, 4);
  CHECK(serial.e_cost == parallel.e_cost);
  CHECK(serial.e_norm2_end == parallel.e_norm2_end);
  CHECK(serial.e_band2_mid == parallel.e_band2_mid);
}

TEST_CASE("Lebeau-Robbiano synthesis: contraction, kill, exact cost ledger") {
  SpectralBasis basis(8);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  ModalState x0(8);
  for (int i = 0; i < 8; ++i) {
    x0.y[i] = 1.0 / (1 + i);
    x0.z[i] = 0.5 / (1 + i);
  }
  LRSynthesisOptions opts;
  opts.n_paths = 40;
  opts.workers = 4;
  opts.seed = 2024;
  opts.dt = 1e-3;

  LRSynthesisReport rep =
      lebeau_robbiano_synthesize(x0, 0.5, 1.0, basis, coeffs, ctrl, opts);
  REQUIRE(rep.contracting);
  const int nj = static_cast<int>(rep.intervals.size());
  for (int j = 1; j < nj; ++j)
    CHECK(rep.intervals[j].e_norm2_end < rep.intervals[j - 1].e_norm2_end);
  CHECK(rep.final_norm2 <= 1e-4 * rep.initial_norm2);
  CHECK(std::isfinite(rep.total_cost));
  CHECK(rep.total_cost > 0.0);

  // ledger consistency: totals recomputed from the per-step ledger, exactly
  double recomputed = 0.0;
  for (int j = 0; j < nj; ++j) {
    double c = 0.0;
    for (int k = rep.k_start[j]; k < rep.k_end[j]; ++k) c += rep.cost_ledger[k];
    CHECK(c == rep.intervals[j].cost);
    recomputed += c;
  }
  for (int k = rep.k_end[nj - 1]; k < rep.n_steps; ++k) recomputed += rep.cost_ledger[k];
  CHECK(recomputed == rep.total_cost);

  // band kill at each interval midpoint
  for (int j = 0; j < nj; ++j)
    CHECK(rep.intervals[j].e_band2_mid <= 1e-2 * rep.initial_norm2);
}
