#include "kshc/sourceterm.hpp"

#include <cmath>
#include <string>

#include "kshc/ensemble.hpp"
#include "kshc/errors.hpp"

namespace kshc {

SourceTermPlan build_source_term_plan(const SourceWeightParams& wp,
                                      const SpectralBasis& basis,
                                      const SystemCoefficients& coeffs,
                                      const ControlOperator& ctrl_op,
                                      const SourceTermOptions& opts) {
  wp.validate();
  SourceTermPlan plan;
  plan.wp = wp;

  const double log_floor = std::log(opts.rho0_floor);
  int K = 1;
  while (K < 60 &&
         wp.log_rho0_gap(wp.grid_gap(K)) - wp.log_rho0_gap(wp.grid_gap(0)) >
             log_floor)
    ++K;
  plan.K = K;
  plan.Tk.resize(K + 1);
  for (int k = 0; k <= K; ++k) plan.Tk[k] = wp.grid_time(k);

  const double last_block = wp.grid_gap(K - 1) - wp.grid_gap(K);
  double dt = std::min(opts.dt, last_block / opts.min_steps_per_block);
  plan.n_steps = static_cast<int>(std::ceil(wp.T / dt - 1e-12));
  plan.dt = wp.T / plan.n_steps;

  plan.k_step.resize(K + 1);
  for (int k = 0; k <= K; ++k)
    plan.k_step[k] = static_cast<int>(std::llround(plan.Tk[k] / plan.dt));
  for (int k = 0; k < K; ++k) {
    if (plan.k_step[k + 1] - plan.k_step[k] < 2)
      throw InvalidArgument("dt", "too coarse for block " + std::to_string(k));
  }

  plan.eps_block.resize(K);
  plan.gains.offset = 0;
  plan.gains.gains.assign(plan.n_steps, Eigen::MatrixXd());
  const double mu_max = basis.mus()[basis.n_modes() - 1];
  for (int k = 0; k < K; ++k) {
    plan.eps_block[k] = opts.eps0 * std::pow(opts.eps_ratio, k);
    const int k0 = plan.k_step[k], k1 = plan.k_step[k + 1];
    const double horizon = (k1 - k0) * plan.dt;
    RiccatiProblem prob = make_band_lq_problem(basis, coeffs, ctrl_op, mu_max,
                                               horizon, plan.eps_block[k]);
    RiccatiSolution sol = solve_riccati_backward(prob, opts.riccati);
    for (int s = k0; s < k1; ++s)
      plan.gains.gains[s] = feedback_gain(sol.at((s - k0) * plan.dt), basis.n_modes());
  }

  const int kc = plan.k_step[K];
  plan.log_w_rho0.resize(kc + 1);
  plan.log_rho_t.resize(kc + 1);
  const double lr0 = wp.log_rho0(0.0);
  for (int s = 0; s <= kc; ++s) {
    const double t = s * plan.dt;
    plan.log_w_rho0[s] = lr0 - wp.log_rho0(t);
    plan.log_rho_t[s] = wp.log_rho(t);
  }
  // squared normalized weights must stay representable
  if (2.0 * plan.log_w_rho0[kc] > 700.0)
    throw InvalidArgument("M", "weighted quantities overflow; lower M or raise rho0_floor");
  return plan;
}

void run_source_path(const SourceTermPlan& plan, const ModalState& x0,
                     const std::vector<Eigen::VectorXd>* source,
                     const BrownianPath& path, const SpectralBasis& basis,
                     const SystemCoefficients& coeffs,
                     const ControlOperator& ctrl_op, PathSourceResult& out,
                     std::vector<ModalState>* record_states,
                     std::vector<double>* record_xt,
                     std::vector<Eigen::VectorXd>* record_controls) {
  const int K = plan.K;
  const int kc = plan.k_step[K];
  if (path.n_steps() != plan.n_steps)
    throw InvalidArgument("path", "path grid does not match the plan");
  if (source && static_cast<int>(source->size()) < kc)
    throw InvalidArgument("source", "series shorter than the controlled range");

  out.block_cost.assign(K, 0.0);
  out.block_data_norm2.assign(K, 0.0);
  out.block_a_norm2.assign(K, 0.0);
  out.block_resid2.assign(K, 0.0);
  out.sup_y_w = out.sup_z_w = out.cost_w = 0.0;
  if (record_states) {
    record_states->clear();
    record_states->reserve(plan.n_steps + 1);
  }
  if (record_xt) {
    record_xt->clear();
    record_xt->reserve(plan.n_steps + 1);
  }
  if (record_controls)
    record_controls->assign(plan.n_steps, Eigen::VectorXd());

  ModalState X = x0;
  ModalState X1(x0.n_modes());
  ModalState diff(x0.n_modes());
  XtAccumulator acc;

  auto track = [&](int s) {
    if (s <= kc) {
      const double w = std::exp(2.0 * plan.log_w_rho0[s]);
      const double ny2 = X.y.squaredNorm();
      const double nz2 = X.z.squaredNorm();
      if (ny2 * w > out.sup_y_w) out.sup_y_w = ny2 * w;
      if (nz2 * w > out.sup_z_w) out.sup_z_w = nz2 * w;
    }
    if (record_states) record_states->push_back(X);
    if (record_xt) {
      if (s <= kc) {
        acc.add(X, plan.wp.log_rho_hat(s * plan.dt), s == 0 ? 0.0 : plan.dt, basis);
        record_xt->push_back(acc.value());
      } else {
        record_xt->push_back(record_xt->back());  // frozen past T_K
      }
    }
  };

  int block = 0;
  out.block_data_norm2[0] = X.norm2();
  track(0);
  Eigen::VectorXd inj;
  for (int s = 0; s < plan.n_steps; ++s) {
    StepExtras ex, ex1;
    Eigen::VectorXd u;
    const bool in_blocks = (s < kc);
    if (in_blocks) {
      if (source) {
        ex.source = &(*source)[s];
        ex1.source = &(*source)[s];
      }
      diff.y = X.y - X1.y;
      diff.z = X.z - X1.z;
      u = plan.gains.eval(s, diff);
      inj = ctrl_op.inject(u);
      ex.control_inject = &inj;
      const double c = plan.dt * u.dot(inj);
      out.block_cost[block] += c;
      out.cost_w += c * std::exp(2.0 * plan.log_w_rho0[s]);
      if (record_controls) (*record_controls)[s] = u;
    }
    const double dW = path.increments[s];
    const double t = s * plan.dt;
    step_coupled(X, basis, coeffs, t, plan.dt, dW, ex);
    if (in_blocks) step_coupled(X1, basis, coeffs, t, plan.dt, dW, ex1);
    if (!X.all_finite())
      throw NumericsError("non-finite state at step " + std::to_string(s + 1));

    const int snew = s + 1;
    if (in_blocks && snew == plan.k_step[block + 1]) {
      out.block_a_norm2[block] = X1.norm2();
      diff.y = X.y - X1.y;
      diff.z = X.z - X1.z;
      out.block_resid2[block] = diff.norm2();
      if (block + 1 < K) {
        ++block;
        out.block_data_norm2[block] = X.norm2();
        X1.y.setZero();
        X1.z.setZero();
      }
    }
    track(snew);
  }
  out.final_norm2 = X.norm2();
  out.final_y_norm2 = X.y.squaredNorm();
}

std::vector<Eigen::VectorXd> materialize_source(const SourceFn& F,
                                                const SourceTermPlan& plan,
                                                int n_modes) {
  const int kc = plan.k_step[plan.K];
  std::vector<Eigen::VectorXd> series(kc);
  for (int s = 0; s < kc; ++s) {
    series[s] = F ? F(s * plan.dt) : Eigen::VectorXd::Zero(n_modes);
    if (series[s].size() != n_modes)
      throw InvalidArgument("source", "mode count mismatch");
  }
  return series;
}

SourceTermReport source_term_control(const ModalState& x0, const SourceFn& F,
                                     const SourceWeightParams& wp,
                                     const SpectralBasis& basis,
                                     const SystemCoefficients& coeffs,
                                     const ControlOperator& ctrl_op,
                                     const SourceTermOptions& opts) {
  SourceTermPlan plan = build_source_term_plan(wp, basis, coeffs, ctrl_op, opts);
  std::vector<Eigen::VectorXd> series = materialize_source(F, plan, basis.n_modes());

  SourceTermReport rep;
  rep.wp = wp;
  rep.K = plan.K;
  rep.Tk = plan.Tk;
  rep.dt = plan.dt;
  rep.paths = opts.n_paths;
  rep.log_rho0_0 = wp.log_rho0(0.0);

  double f_int = 0.0;  // int ||F/rho||^2 over the active range
  rep.source_scale = 0.0;
  for (int s = 0; s < static_cast<int>(series.size()); ++s) {
    const double nf = series[s].norm();
    rep.source_scale = std::max(rep.source_scale, nf);
    const double fr = nf * std::exp(-plan.log_rho_t[s]);
    f_int += plan.dt * fr * fr;
  }

  std::vector<PathSourceResult> slots(opts.n_paths);
  for_each_path(opts.n_paths, opts.workers, [&](int p) {
    BrownianPath path =
        BrownianPath::generate(plan.dt, plan.n_steps, path_seed(opts.seed, p));
    run_source_path(plan, x0, &series, path, basis, coeffs, ctrl_op, slots[p]);
  });

  rep.blocks.resize(plan.K);
  for (int k = 0; k < plan.K; ++k) {
    BlockSummary& b = rep.blocks[k];
    b.k = k;
    b.t0 = plan.Tk[k];
    b.t1 = plan.Tk[k + 1];
    b.epsilon = plan.eps_block[k];
    for (int p = 0; p < opts.n_paths; ++p) {
      b.e_data_norm2 += slots[p].block_data_norm2[k];
      b.e_a_norm2 += slots[p].block_a_norm2[k];
      b.e_resid2 += slots[p].block_resid2[k];
      b.cost += slots[p].block_cost[k];
    }
    b.e_data_norm2 /= opts.n_paths;
    b.e_a_norm2 /= opts.n_paths;
    b.e_resid2 /= opts.n_paths;
    b.cost /= opts.n_paths;
    const double lg = wp.log_gamma(b.t1 - b.t0);
    b.cost_bound = std::exp(2.0 * lg) * b.e_data_norm2;
  }
  for (int p = 0; p < opts.n_paths; ++p) {
    rep.e_sup_y_w += slots[p].sup_y_w;
    rep.e_sup_z_w += slots[p].sup_z_w;
    rep.e_cost_w += slots[p].cost_w;
    rep.e_final_norm2 += slots[p].final_norm2;
    rep.e_final_y_norm2 += slots[p].final_y_norm2;
  }
  rep.e_sup_y_w /= opts.n_paths;
  rep.e_sup_z_w /= opts.n_paths;
  rep.e_cost_w /= opts.n_paths;
  rep.e_final_norm2 /= opts.n_paths;
  rep.e_final_y_norm2 /= opts.n_paths;

  rep.rhs_plain = x0.norm2() + f_int;
  const double lhs_w = rep.e_sup_y_w + rep.e_sup_z_w + rep.e_cost_w;
  rep.log_ct_ratio = std::log(std::max(lhs_w, 1e-300)) - 2.0 * rep.log_rho0_0 -
                     std::log(std::max(rep.rhs_plain, 1e-300));
  return rep;
}

RegularityReport regular_trajectory_report(
    const std::vector<ModalState>& states, const ModalState& x0,
    const std::vector<Eigen::VectorXd>* source, const SourceTermPlan& plan,
    const SpectralBasis& basis) {
  if (static_cast<int>(states.size()) != plan.n_steps + 1)
    throw InvalidArgument("states", "trajectory does not match the plan grid");
  RegularityReport rep;
  const int kc = plan.k_step[plan.K];
  rep.log_rho_hat_0 = plan.wp.log_rho_hat(0.0);

  double prev_y4 = 0, prev_z2 = 0;
  for (int s = 0; s <= kc; ++s) {
    const double t = s * plan.dt;
    const double lw = rep.log_rho_hat_0 - plan.wp.log_rho_hat(t);
    const double w = std::exp(2.0 * lw);
    const ModalState& st = states[s];
    const double y2 = sobolev_norm2(st, 2, Component::Y, basis) * w;
    const double z1 = sobolev_norm2(st, 1, Component::Z, basis) * w;
    if (y2 > rep.sup_y_h2_w) rep.sup_y_h2_w = y2;
    if (z1 > rep.sup_z_h1_w) rep.sup_z_h1_w = z1;
    const double y4 = sobolev_norm2(st, 4, Component::Y, basis) * w;
    const double z2 = sobolev_norm2(st, 2, Component::Z, basis) * w;
    if (s > 0) {
      rep.int_y_h4_w += 0.5 * plan.dt * (prev_y4 + y4);
      rep.int_z_h2_w += 0.5 * plan.dt * (prev_z2 + z2);
    }
    prev_y4 = y4;
    prev_z2 = z2;
  }

  double f_int = 0.0;
  if (source) {
    for (int s = 0; s < std::min<int>(kc, source->size()); ++s) {
      const double fr = (*source)[s].norm() * std::exp(-plan.log_rho_t[s]);
      f_int += plan.dt * fr * fr;
    }
  }
  rep.rhs_plain = sobolev_norm2(x0, 2, Component::Y, basis) +
                  sobolev_norm2(x0, 1, Component::Z, basis) + f_int;
  const double lhs =
      rep.sup_y_h2_w + rep.sup_z_h1_w + rep.int_y_h4_w + rep.int_z_h2_w;
  rep.log_ratio = std::log(std::max(lhs, 1e-300)) - 2.0 * rep.log_rho_hat_0 -
                  std::log(std::max(rep.rhs_plain, 1e-300));
  return rep;
}

}  // namespace kshc
