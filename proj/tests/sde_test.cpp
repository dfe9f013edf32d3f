#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "kshc/errors.hpp"
#include "kshc/sde.hpp"

using namespace kshc;

namespace {
constexpr double kPi = 3.14159265358979323846;

ModalState random_state(int n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  ModalState s(n);
  for (int i = 0; i < n; ++i) {
    s.y[i] = u(eng);
    s.z[i] = u(eng);
  }
  return s;
}
}  // namespace

TEST_CASE("zero state and zero control stay at equilibrium") {
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.3, 0.2, 0.1);
  ModalState s(4);
  for (int k = 0; k < 10; ++k)
    s = step_linear(s, basis, coeffs, nullptr, k * 0.01, 0.01, 0.05);
  CHECK(s.norm2() == 0.0);
}

TEST_CASE("pure-decay step is the implicit Euler factor") {
  SpectralBasis basis(2);
  SystemCoefficients coeffs;
  coeffs.a3 = 0.0;
  ModalState s(2);
  s.y[1] = 3.0;
  const double dt = 2e-3;
  ModalState out = step_linear(s, basis, coeffs, nullptr, 0.0, dt, 0.0);
  CHECK(out.y[1] == 3.0 / (1.0 + basis.mu(2) * dt));
}

TEST_CASE("one step matches the 2-mode matrix exponential to O(dt^2)") {
  SpectralBasis basis(1);
  SystemCoefficients coeffs;  // a3 = 1 coupling, b = 0
  ModalState s(1);
  s.y[0] = 1.0;
  const double dt = 1e-4;
  ModalState out = step_linear(s, basis, coeffs, nullptr, 0.0, dt, 0.0);

  const double mu = basis.mu(1), lam = basis.lambda(1);
  const double y_exact = std::exp(-mu * dt);
  const double z_exact = (std::exp(-lam * dt) - std::exp(-mu * dt)) / (mu - lam);
  CHECK(std::abs(out.y[0] - y_exact) < mu * mu * dt * dt);
  CHECK(std::abs(out.z[0] - z_exact) < mu * mu * dt * dt);
  // and the announced discrete factors
  CHECK(out.y[0] == 1.0 / (1.0 + mu * dt));
  CHECK(out.z[0] == doctest::Approx(dt / ((1.0 + mu * dt) * (1.0 + lam * dt))).epsilon(1e-14));
}

TEST_CASE("semilinear step reduces to linear beyond the cutoff") {
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.0, 0.1);
  coeffs.a = 1;
  ConvectionOp conv(basis);
  Cutoff cutoff(0.5);
  ModalState s = random_state(4, 3);

  ModalState lin = step_linear(s, basis, coeffs, nullptr, 0.0, 1e-3, 0.02);
  ModalState sem = step_semilinear(s, basis, coeffs, nullptr, 0.0, 1e-3, 0.02,
                                   cutoff, 1.0 /* >= 2R */, conv);
  CHECK(lin.y == sem.y);
  CHECK(lin.z == sem.z);

  ModalState sem2 = step_semilinear(s, basis, coeffs, nullptr, 0.0, 1e-3, 0.02,
                                    cutoff, 0.1 /* < R */, conv);
  CHECK((sem2.y - lin.y).norm() > 0.0);
}

TEST_CASE("step is affine: superposition in (state, control)") {
  SpectralBasis basis(6);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.2, -0.1, 0.3);
  ModalState s1 = random_state(6, 5), s2 = random_state(6, 6);
  Eigen::VectorXd u1 = random_state(6, 7).y, u2 = random_state(6, 8).y;
  const double a = 1.7, b = -0.6, dt = 1e-3, dW = 0.013, t = 0.2;

  ModalState comb(6);
  comb.y = a * s1.y + b * s2.y;
  comb.z = a * s1.z + b * s2.z;
  Eigen::VectorXd uc = a * u1 + b * u2;

  ModalState r1 = step_linear(s1, basis, coeffs, &u1, t, dt, dW);
  ModalState r2 = step_linear(s2, basis, coeffs, &u2, t, dt, dW);
  ModalState rc = step_linear(comb, basis, coeffs, &uc, t, dt, dW);

  CHECK((rc.y - (a * r1.y + b * r2.y)).norm() <= 1e-12 * rc.y.norm());
  CHECK((rc.z - (a * r1.z + b * r2.z)).norm() <= 1e-12 * std::max(1.0, rc.z.norm()));
}

TEST_CASE("equal seeds give bit-identical paths and trajectories") {
  BrownianPath p1 = BrownianPath::generate(1e-3, 500, 42);
  BrownianPath p2 = BrownianPath::generate(1e-3, 500, 42);
  CHECK(p1.increments == p2.increments);

  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ModalState x0 = random_state(4, 9);
  TrajectoryRecord t1 = simulate(x0, basis, coeffs, p1, nullptr, nullptr, nullptr);
  TrajectoryRecord t2 = simulate(x0, basis, coeffs, p2, nullptr, nullptr, nullptr);
  for (std::size_t k = 0; k < t1.states.size(); ++k) {
    CHECK(t1.states[k].y == t2.states[k].y);
    CHECK(t1.states[k].z == t2.states[k].z);
  }
}

TEST_CASE("coarsened path sums increments") {
  BrownianPath p = BrownianPath::generate(1e-3, 64, 4);
  BrownianPath c = p.coarsen(4);
  CHECK(c.n_steps() == 16);
  CHECK(c.dt == doctest::Approx(4e-3));
  double sp = 0, sc = 0;
  for (double v : p.increments) sp += v;
  for (double v : c.increments) sc += v;
  CHECK(sp == doctest::Approx(sc).epsilon(1e-14));
}

TEST_CASE("X_t norm: zero trajectory, monotonicity, closed form") {
  SpectralBasis basis(2);
  SourceWeightParams wp;  // T = 0.5
  const int n_steps = 2000;
  const double dt = wp.T / n_steps;

  TrajectoryRecord traj;
  traj.t0 = 0.0;
  traj.dt = dt;
  ModalState zero(2);
  ModalState one(2);
  one.y[0] = 0.3;
  for (int k = 0; k <= n_steps; ++k) {
    traj.times.push_back(k * dt);
    traj.states.push_back(zero);
  }
  CHECK(xt_norm(traj, wp, wp.T, basis).value == 0.0);
  CHECK_FALSE(xt_norm(traj, wp, wp.T, basis).blowup);

  for (int k = 0; k <= n_steps; ++k) traj.states[k] = one;
  const double t_eval = 0.35;
  XtNormResult r1 = xt_norm(traj, wp, 0.2, basis);
  XtNormResult r2 = xt_norm(traj, wp, t_eval, basis);
  CHECK(r2.value >= r1.value);

  // closed form: sup terms at s = t, integrals by fine Simpson
  const double lam = basis.lambda(1);
  const double c2 = 0.3 * 0.3;
  auto w2 = [&](double s) { return std::exp(-2.0 * wp.log_rho_hat(s)); };
  const double sup_y2 = c2 * std::pow(1.0 + lam, 2) * w2(t_eval);
  int fine = 700000;  // multiple of 3.5e5 steps for Simpson parity
  const double h = t_eval / fine;
  double simpson = w2(0.0) + w2(t_eval);
  for (int i = 1; i < fine; ++i) simpson += w2(i * h) * ((i % 2) ? 4.0 : 2.0);
  simpson *= h / 3.0;
  const double int_y4 = c2 * std::pow(1.0 + lam, 4) * simpson;
  const double expected = std::sqrt(sup_y2 + int_y4);
  CHECK(r2.value == doctest::Approx(expected).epsilon(2e-3));

  // nonzero state at t = T is flagged, not fatal
  TrajectoryRecord at_T = traj;
  CHECK(xt_norm(at_T, wp, wp.T, basis).blowup);
}

TEST_CASE("free decay: z-only mode-1 data decays at 2 pi^2") {
  SpectralBasis basis(4);
  SystemCoefficients coeffs;  // b = 0
  ModalState data(4);
  data.z[0] = 1.0;
  DecayFitReport rep = free_decay_rate(basis, coeffs, 0, data, 50, 77, 0.5,
                                       5e-4, 1, 0.1);
  CHECK(rep.measured_rate == doctest::Approx(2.0 * kPi * kPi).epsilon(0.01));
  CHECK_FALSE(rep.small_ensemble_warning);
  CHECK(rep.gamma_bound == doctest::Approx(2.0 * kPi * kPi - 1.0));
  CHECK(rep.r_squared > 0.999);
}

TEST_CASE("free decay validates band-killed data and warns on tiny ensembles") {
  SpectralBasis basis(4);
  SystemCoefficients coeffs;
  ModalState bad(4);
  bad.y[0] = 1.0;
  CHECK_THROWS_AS(
      free_decay_rate(basis, coeffs, 2, bad, 50, 1, 0.1, 1e-3, 1),
      InvalidArgument);

  ModalState ok(4);
  ok.z[2] = 1.0;
  DecayFitReport rep = free_decay_rate(basis, coeffs, 2, ok, 10, 1, 0.05, 1e-4, 1);
  CHECK(rep.small_ensemble_warning);
}

TEST_CASE("dissipation bound with noise: rate >= gamma_{k+1} within 10%") {
  SpectralBasis basis(6);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.1, 0.1);
  ModalState data(6);
  data.z[2] = 1.0;
  data.y[2] = 0.1;
  DecayFitReport rep =
      free_decay_rate(basis, coeffs, 2, data, 100, 5, 0.03, 5e-5, 1, 0.3);
  CHECK(rep.measured_rate >= 0.9 * rep.gamma_bound);
}

TEST_CASE("strong order: error against dt/16 reference fits slope >= 0.45") {
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.25, 0.1, 0.2);
  ModalState x0 = random_state(4, 21);
  const double T = 0.25;
  const int paths = 48;

  std::vector<double> dts{T / 256, T / 512, T / 1024};
  std::vector<double> errs(dts.size(), 0.0);
  for (std::size_t di = 0; di < dts.size(); ++di) {
    const int n_coarse = static_cast<int>(std::llround(T / dts[di]));
    double acc = 0.0;
    for (int p = 0; p < paths; ++p) {
      BrownianPath fine = BrownianPath::generate(dts[di] / 16.0, n_coarse * 16,
                                                 path_seed(99, p));
      BrownianPath coarse = fine.coarsen(16);
      TrajectoryRecord rf = simulate(x0, basis, coeffs, fine, nullptr, nullptr, nullptr);
      TrajectoryRecord rc = simulate(x0, basis, coeffs, coarse, nullptr, nullptr, nullptr);
      const ModalState& xf = rf.states.back();
      const ModalState& xc = rc.states.back();
      acc += (xf.y - xc.y).squaredNorm() + (xf.z - xc.z).squaredNorm();
    }
    errs[di] = std::sqrt(acc / paths);
  }
  // least squares slope of log err vs log dt
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < dts.size(); ++i) {
    sx += std::log(dts[i]);
    sy += std::log(errs[i]);
    sxx += std::log(dts[i]) * std::log(dts[i]);
    sxy += std::log(dts[i]) * std::log(errs[i]);
  }
  const int m = static_cast<int>(dts.size());
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  CHECK(slope >= 0.45);
}

TEST_CASE("energy estimate: bounded constant, stable under dt refinement") {
  SpectralBasis basis(8);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  const double T = 0.2;
  const int paths = 40;

  auto constant_for_dt = [&](double dt) {
    const int n_steps = static_cast<int>(std::llround(T / dt));
    double lhs = 0.0, rhs = 0.0;
    for (int p = 0; p < paths; ++p) {
      std::mt19937_64 eng(p + 1);
      std::uniform_real_distribution<double> u(-1, 1);
      ModalState x0(8);
      Eigen::VectorXd f1(8), f2(8), g1(8), g2(8);
      for (int i = 0; i < 8; ++i) {
        x0.y[i] = u(eng);
        x0.z[i] = u(eng);
        f1[i] = u(eng);
        f2[i] = u(eng);
        g1[i] = u(eng);
        g2[i] = u(eng);
      }
      BrownianPath path = BrownianPath::generate(dt, n_steps, path_seed(31, p));
      ModalState s = x0;
      double sup_n2 = s.norm2();
      double int_h = 0.0;
      for (int k = 0; k < n_steps; ++k) {
        StepExtras ex;
        ex.drift_y = &f1;
        ex.drift_z = &f2;
        ex.noise_y = &g1;
        ex.noise_z = &g2;
        step_coupled(s, basis, coeffs, k * dt, dt, path.increments[k], ex);
        sup_n2 = std::max(sup_n2, s.norm2());
        int_h += dt * (sobolev_norm2(s, 2, Component::Y, basis) +
                       sobolev_norm2(s, 1, Component::Z, basis));
      }
      lhs += sup_n2 + int_h;
      rhs += x0.norm2() + T * (f1.squaredNorm() + f2.squaredNorm() +
                               g1.squaredNorm() + g2.squaredNorm());
    }
    return lhs / rhs;
  };

  const double c1 = constant_for_dt(1e-3);
  const double c2 = constant_for_dt(5e-4);
  const double c3 = constant_for_dt(2.5e-4);
  CHECK(std::isfinite(c1));
  const double cmax = std::max({c1, c2, c3});
  const double cmin = std::min({c1, c2, c3});
  CHECK(cmax / cmin < 1.5);
}

TEST_CASE("simulate rejects inconsistent inputs and non-finite propagation") {
  SpectralBasis basis(2);
  SystemCoefficients coeffs;
  BrownianPath path = BrownianPath::generate(1e-3, 10, 1);
  ModalState wrong(3);
  CHECK_THROWS_AS(simulate(wrong, basis, coeffs, path, nullptr, nullptr, nullptr),
                  InvalidArgument);

  coeffs.a = 1;  // semilinear needs R and weights
  ModalState x0(2);
  CHECK_THROWS_AS(simulate(x0, basis, coeffs, path, nullptr, nullptr, nullptr),
                  InvalidArgument);
}
