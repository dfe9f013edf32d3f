#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kshc/errors.hpp"
#include "kshc/sourceterm.hpp"

using namespace kshc;

namespace {

SourceTermOptions small_opts() {
  SourceTermOptions o;
  o.dt = 5e-4;
  o.n_paths = 8;
  o.workers = 2;
  o.seed = 5;
  return o;
}

}  // namespace

TEST_CASE("plan: geometric grid, block layout, weight floor") {
  SourceWeightParams wp;  // M=1 P=4 Q=1.2 T=0.5
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  SourceTermPlan plan = build_source_term_plan(wp, basis, coeffs, ctrl, small_opts());

  CHECK(plan.K >= 1);
  CHECK(plan.Tk[0] == 0.0);
  for (int k = 0; k < plan.K; ++k) CHECK(plan.Tk[k + 1] > plan.Tk[k]);
  CHECK(plan.Tk[plan.K] < wp.T);
  // the stop rule: rho0 has dropped below the floor at T_K but not at T_{K-1}
  const double drop_K =
      wp.log_rho0_gap(wp.grid_gap(plan.K)) - wp.log_rho0_gap(wp.grid_gap(0));
  const double drop_prev =
      wp.log_rho0_gap(wp.grid_gap(plan.K - 1)) - wp.log_rho0_gap(wp.grid_gap(0));
  CHECK(drop_K <= std::log(1e-12));
  if (plan.K > 1) CHECK(drop_prev > std::log(1e-12));
  // normalized weights stay representable: overshoot past the floor is at
  // most one geometric step (factor Q)
  for (double lw : plan.log_w_rho0) CHECK(lw <= -wp.Q * std::log(1e-12) + 1.0);
}

TEST_CASE("zero data and zero source stay at zero") {
  SourceWeightParams wp;
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  ModalState x0(4);
  SourceTermReport rep =
      source_term_control(x0, SourceFn{}, wp, basis, coeffs, ctrl, small_opts());
  CHECK(rep.e_final_norm2 == 0.0);
  CHECK(rep.e_sup_y_w == 0.0);
  CHECK(rep.e_cost_w == 0.0);
  for (const BlockSummary& b : rep.blocks) CHECK(b.cost == 0.0);
}

TEST_CASE("gluing identity: replaying the recorded control reproduces the path") {
  SourceWeightParams wp;
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  SourceTermOptions opts = small_opts();
  SourceTermPlan plan = build_source_term_plan(wp, basis, coeffs, ctrl, opts);

  ModalState x0(4);
  x0.y << 1.0, 0.5, -0.3, 0.2;
  x0.z << 0.4, -0.2, 0.1, 0.05;
  SourceFn F = [&](double t) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(4);
    f[0] = std::exp(wp.log_rho(t));
    return f;
  };
  std::vector<Eigen::VectorXd> series = materialize_source(F, plan, 4);

  BrownianPath path = BrownianPath::generate(plan.dt, plan.n_steps, 91);
  PathSourceResult res;
  std::vector<ModalState> states;
  std::vector<Eigen::VectorXd> controls;
  run_source_path(plan, x0, &series, path, basis, coeffs, ctrl, res, &states,
                  nullptr, &controls);

  // direct simulation of the stepped system with the same control values
  ModalState X = x0;
  double max_dev = 0.0;
  const int kc = plan.k_step[plan.K];
  for (int s = 0; s < plan.n_steps; ++s) {
    StepExtras ex;
    Eigen::VectorXd inj;
    if (s < kc) {
      ex.source = &series[s];
      inj = ctrl.inject(controls[s]);
      ex.control_inject = &inj;
    }
    step_coupled(X, basis, coeffs, s * plan.dt, plan.dt, path.increments[s], ex);
    const double dev = std::sqrt((X.y - states[s + 1].y).squaredNorm() +
                                 (X.z - states[s + 1].z).squaredNorm());
    max_dev = std::max(max_dev, dev);
  }
  CHECK(max_dev <= 10.0 * plan.dt);
  CHECK(max_dev <= 1e-12);  // replay is the same arithmetic
}

TEST_CASE("rho-scaled mode-1 source: costs bounded, weighted report finite, kill") {
  SourceWeightParams wp;
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  SourceTermOptions opts = small_opts();
  opts.n_paths = 16;

  SourceFn F = [&](double t) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(4);
    f[0] = std::exp(wp.log_rho(t));
    return f;
  };
  ModalState x0(4);  // zero data, source-driven
  SourceTermReport rep = source_term_control(x0, F, wp, basis, coeffs, ctrl, opts);

  CHECK(rep.source_scale > 0.0);
  for (const BlockSummary& b : rep.blocks) {
    CHECK(b.cost <= b.cost_bound * (1.0 + 1e-9));
    CHECK(std::isfinite(b.cost));
  }
  CHECK(std::isfinite(rep.e_sup_y_w));
  CHECK(std::isfinite(rep.e_sup_z_w));
  CHECK(std::isfinite(rep.e_cost_w));
  CHECK(std::isfinite(rep.log_ct_ratio));
  CHECK(rep.e_sup_y_w > 0.0);

  // terminal smallness relative to the source scale
  CHECK(std::sqrt(rep.e_final_y_norm2) <= 1e-5 * rep.source_scale);

  // later blocks stay controlled: every block satisfies its own bound and
  // the total is finite
  double total = 0.0;
  for (const BlockSummary& b : rep.blocks) total += b.cost;
  CHECK(std::isfinite(total));
}

TEST_CASE("regularity report: zero trajectory, finiteness, dt stability") {
  SourceWeightParams wp;
  SpectralBasis basis(4);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);

  ModalState x0(4);
  x0.y << 0.5, 0.2, -0.1, 0.05;
  x0.z << 0.3, -0.1, 0.05, 0.02;

  auto ratio_for = [&](double dt) {
    SourceTermOptions opts = small_opts();
    opts.dt = dt;
    opts.n_paths = 1;
    SourceTermPlan plan = build_source_term_plan(wp, basis, coeffs, ctrl, opts);
    BrownianPath path = BrownianPath::generate(plan.dt, plan.n_steps, 17);
    PathSourceResult res;
    std::vector<ModalState> states;
    run_source_path(plan, x0, nullptr, path, basis, coeffs, ctrl, res, &states);
    RegularityReport rr = regular_trajectory_report(states, x0, nullptr, plan, basis);
    CHECK(std::isfinite(rr.log_ratio));
    CHECK(rr.sup_y_h2_w > 0.0);
    return rr.log_ratio;
  };

  const double r1 = ratio_for(5e-4);
  const double r2 = ratio_for(2.5e-4);
  CHECK(std::abs(r1 - r2) < std::log(1.2));  // +-20 percent

  // zero trajectory gives all zeros
  SourceTermOptions opts = small_opts();
  SourceTermPlan plan = build_source_term_plan(wp, basis, coeffs, ctrl, opts);
  std::vector<ModalState> zeros(plan.n_steps + 1, ModalState(4));
  RegularityReport rr = regular_trajectory_report(zeros, ModalState(4), nullptr, plan, basis);
  CHECK(rr.sup_y_h2_w == 0.0);
  CHECK(rr.int_y_h4_w == 0.0);
}

TEST_CASE("data-driven run: block data decays and control kills the state") {
  SourceWeightParams wp;
  SpectralBasis basis(6);
  SystemCoefficients coeffs = SystemCoefficients::with_b(0.1, 0.05, 0.1);
  ControlOperator ctrl(basis, 0.3, 0.7);
  SourceTermOptions opts = small_opts();
  opts.n_paths = 16;

  ModalState x0(6);
  for (int i = 0; i < 6; ++i) {
    x0.y[i] = 1.0 / (1 + i);
    x0.z[i] = 0.5 / (1 + i);
  }
  SourceTermReport rep =
      source_term_control(x0, SourceFn{}, wp, basis, coeffs, ctrl, opts);
  CHECK(rep.e_final_norm2 <= 1e-8 * x0.norm2());
  for (const BlockSummary& b : rep.blocks)
    CHECK(b.cost <= b.cost_bound * (1.0 + 1e-9));
  // with a zero source the inherited data vanish: the y1 parts are zero
  for (const BlockSummary& b : rep.blocks) CHECK(b.e_a_norm2 <= 1e-20);
}
