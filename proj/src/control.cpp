#include "kshc/control.hpp"

#include <cmath>
#include <string>

#include "kshc/ensemble.hpp"
#include "kshc/errors.hpp"

namespace kshc {

LRSchedule lr_schedule(double T, double beta, int n_modes, double eps0,
                       double eps_ratio) {
  if (!(T > 0.0)) throw InvalidArgument("T", "must be positive");
  if (!(beta > 0.0)) throw InvalidArgument("beta", "must be positive");
  const double mu_max = SpectralBasis(n_modes).mus()[n_modes - 1];
  LRSchedule sched;
  sched.T = T;
  sched.beta = beta;
  double t_start = 0.0;
  for (int j = 1; j <= 64; ++j) {
    LRScheduleEntry e;
    e.j = j;
    e.tau = T / std::pow(2.0, j);
    e.t_start = t_start;
    e.t_end = t_start + e.tau;
    const double p = std::pow(2.0, j);
    e.r = beta * beta * p * p * p * p;
    e.epsilon = eps0 * std::pow(eps_ratio, j);
    sched.entries.push_back(e);
    t_start = e.t_end;
    if (e.r >= mu_max) break;
  }
  return sched;
}

namespace {

struct LRPlan {
  LRSchedule schedule;
  double dt = 0;
  int n_steps = 0;
  std::vector<int> k_start, k_mid, k_end;
  ControlPolicy policy;
};

LRPlan build_lr_plan(const LRSchedule& sched, const SpectralBasis& basis,
                     const SystemCoefficients& coeffs,
                     const ControlOperator& ctrl_op, double dt_target,
                     int min_steps_per_half, const RiccatiOptions& ropts) {
  LRPlan plan;
  plan.schedule = sched;
  const double tau_last = sched.entries.back().tau;
  double dt = std::min(dt_target, 0.5 * tau_last / min_steps_per_half);
  plan.n_steps = static_cast<int>(std::ceil(sched.T / dt - 1e-12));
  plan.dt = sched.T / plan.n_steps;
  plan.policy.offset = 0;
  plan.policy.gains.assign(plan.n_steps, Eigen::MatrixXd());

  const int n = basis.n_modes();
  for (const LRScheduleEntry& e : sched.entries) {
    const int k0 = static_cast<int>(std::llround(e.t_start / plan.dt));
    const int k2 = static_cast<int>(std::llround(e.t_end / plan.dt));
    const int k1 = k0 + (k2 - k0) / 2;
    if (k1 <= k0 || k2 <= k1)
      throw InvalidArgument("dt", "too coarse for stage " + std::to_string(e.j));
    const double horizon = (k1 - k0) * plan.dt;
    RiccatiProblem prob =
        make_band_lq_problem(basis, coeffs, ctrl_op, e.r, horizon, e.epsilon);
    RiccatiSolution sol = solve_riccati_backward(prob, ropts);
    for (int k = k0; k < k1; ++k)
      plan.policy.gains[k] = feedback_gain(sol.at((k - k0) * plan.dt), n);
    plan.k_start.push_back(k0);
    plan.k_mid.push_back(k1);
    plan.k_end.push_back(k2);
  }
  return plan;
}

struct PathSlots {
  std::vector<double> norm2_start, norm2_mid, norm2_end, band2_mid, band2_end;
  double final_norm2 = 0;
  std::vector<double> cost_steps;
};

void rollout_path(const LRPlan& plan, const ModalState& x0,
                  const SpectralBasis& basis, const SystemCoefficients& coeffs,
                  const ControlOperator& ctrl_op, std::uint64_t seed_p,
                  PathSlots& out) {
  const int nj = static_cast<int>(plan.schedule.entries.size());
  out.norm2_start.assign(nj, 0.0);
  out.norm2_mid.assign(nj, 0.0);
  out.norm2_end.assign(nj, 0.0);
  out.band2_mid.assign(nj, 0.0);
  out.band2_end.assign(nj, 0.0);
  out.cost_steps.assign(plan.n_steps, 0.0);

  BrownianPath path = BrownianPath::generate(plan.dt, plan.n_steps, seed_p);
  ModalState s = x0;
  auto record_markers = [&](int k) {
    for (int j = 0; j < nj; ++j) {
      if (k == plan.k_start[j]) out.norm2_start[j] = s.norm2();
      if (k == plan.k_mid[j]) {
        out.norm2_mid[j] = s.norm2();
        out.band2_mid[j] = project_band(s, plan.schedule.entries[j].r).norm2();
      }
      if (k == plan.k_end[j]) {
        out.norm2_end[j] = s.norm2();
        out.band2_end[j] = project_band(s, plan.schedule.entries[j].r).norm2();
      }
    }
  };
  record_markers(0);
  Eigen::VectorXd inj;
  for (int k = 0; k < plan.n_steps; ++k) {
    StepExtras ex;
    if (plan.policy.active(k)) {
      Eigen::VectorXd u = plan.policy.eval(k, s);
      inj = ctrl_op.inject(u);
      ex.control_inject = &inj;
      out.cost_steps[k] = plan.dt * u.dot(inj);
    }
    step_coupled(s, basis, coeffs, k * plan.dt, plan.dt, path.increments[k], ex);
    if (!s.all_finite())
      throw NumericsError("non-finite state at step " + std::to_string(k + 1));
    record_markers(k + 1);
  }
  out.final_norm2 = s.norm2();
}

}  // namespace

LRSynthesisReport lebeau_robbiano_synthesize(const ModalState& x0, double T,
                                             double beta0,
                                             const SpectralBasis& basis,
                                             const SystemCoefficients& coeffs,
                                             const ControlOperator& ctrl_op,
                                             const LRSynthesisOptions& opts) {
  if (x0.n_modes() != basis.n_modes())
    throw InvalidArgument("x0", "mode count mismatch");

  LRSynthesisReport rep;
  for (int d = 0; d <= opts.max_beta_doublings; ++d) {
    const double beta = beta0 * std::pow(2.0, d);
    LRSchedule sched =
        lr_schedule(T, beta, basis.n_modes(), opts.eps0, opts.eps_ratio);
    LRPlan plan = build_lr_plan(sched, basis, coeffs, ctrl_op, opts.dt,
                                opts.min_steps_per_half, opts.riccati);

    const int nj = static_cast<int>(sched.entries.size());
    std::vector<PathSlots> slots(opts.n_paths);
    for_each_path(opts.n_paths, opts.workers, [&](int p) {
      rollout_path(plan, x0, basis, coeffs, ctrl_op, path_seed(opts.seed, p),
                   slots[p]);
    });

    rep = LRSynthesisReport();
    rep.schedule = sched;
    rep.beta_used = beta;
    rep.beta_doublings = d;
    rep.dt = plan.dt;
    rep.n_steps = plan.n_steps;
    rep.paths = opts.n_paths;
    rep.seed = opts.seed;
    rep.k_start = plan.k_start;
    rep.k_mid = plan.k_mid;
    rep.k_end = plan.k_end;
    rep.initial_norm2 = x0.norm2();

    rep.cost_ledger.assign(plan.n_steps, 0.0);
    for (int k = 0; k < plan.n_steps; ++k) {
      double acc = 0.0;
      for (int p = 0; p < opts.n_paths; ++p) acc += slots[p].cost_steps[k];
      rep.cost_ledger[k] = acc / opts.n_paths;
    }
    rep.intervals.resize(nj);
    for (int j = 0; j < nj; ++j) {
      IntervalSummary& s = rep.intervals[j];
      s.j = sched.entries[j].j;
      s.r = sched.entries[j].r;
      s.tau = sched.entries[j].tau;
      s.epsilon = sched.entries[j].epsilon;
      for (int p = 0; p < opts.n_paths; ++p) {
        s.e_norm2_start += slots[p].norm2_start[j];
        s.e_norm2_mid += slots[p].norm2_mid[j];
        s.e_norm2_end += slots[p].norm2_end[j];
        s.e_band2_mid += slots[p].band2_mid[j];
      }
      s.e_norm2_start /= opts.n_paths;
      s.e_norm2_mid /= opts.n_paths;
      s.e_norm2_end /= opts.n_paths;
      s.e_band2_mid /= opts.n_paths;
      double c = 0.0;
      for (int k = plan.k_start[j]; k < plan.k_end[j]; ++k)
        c += rep.cost_ledger[k];
      s.cost = c;
    }
    double total = 0.0;
    for (int j = 0; j < nj; ++j) total += rep.intervals[j].cost;
    double tail = 0.0;
    for (int k = plan.k_end[nj - 1]; k < plan.n_steps; ++k)
      tail += rep.cost_ledger[k];
    rep.total_cost = total + tail;
    double fin = 0.0;
    for (int p = 0; p < opts.n_paths; ++p) fin += slots[p].final_norm2;
    rep.final_norm2 = fin / opts.n_paths;
    rep.policy = std::move(plan.policy);

    rep.contracting = true;
    for (int j = 1; j < nj; ++j) {
      if (!(rep.intervals[j].e_norm2_end < rep.intervals[j - 1].e_norm2_end)) {
        rep.contracting = false;
        break;
      }
    }
    if (rep.contracting) break;
  }
  return rep;
}

PartialControlEnsemble partial_spectral_control(
    const ModalState& x0, double r, double tau, double epsilon,
    const SpectralBasis& basis, const SystemCoefficients& coeffs,
    const ControlOperator& ctrl_op, int n_paths, std::uint64_t seed, double dt,
    int workers, const RiccatiOptions& ropts) {
  if (r > basis.mus()[basis.n_modes() - 1] * (1.0 + 1e-12))
    throw InvalidArgument("r", "band extends beyond the retained modes");
  LRSchedule sched;
  sched.T = tau;
  sched.beta = 0;
  sched.entries.push_back(LRScheduleEntry{1, 0.0, tau, tau, r, epsilon});
  LRPlan plan;
  {
    plan.schedule = sched;
    const int n_steps = static_cast<int>(std::ceil(tau / dt - 1e-12));
    plan.n_steps = n_steps;
    plan.dt = tau / n_steps;
    plan.policy.offset = 0;
    plan.policy.gains.assign(n_steps, Eigen::MatrixXd());
    const int k1 = n_steps / 2;
    if (k1 < 1) throw InvalidArgument("dt", "too coarse for the half interval");
    RiccatiProblem prob = make_band_lq_problem(basis, coeffs, ctrl_op, r,
                                               k1 * plan.dt, epsilon);
    RiccatiSolution sol = solve_riccati_backward(prob, ropts);
    for (int k = 0; k < k1; ++k)
      plan.policy.gains[k] = feedback_gain(sol.at(k * plan.dt), basis.n_modes());
    plan.k_start = {0};
    plan.k_mid = {k1};
    plan.k_end = {n_steps};
  }

  std::vector<PathSlots> slots(n_paths);
  for_each_path(n_paths, workers, [&](int p) {
    rollout_path(plan, x0, basis, coeffs, ctrl_op, path_seed(seed, p), slots[p]);
  });

  PartialControlEnsemble out;
  for (int p = 0; p < n_paths; ++p) {
    out.e_norm2_start += slots[p].norm2_start[0];
    out.e_band2_mid += slots[p].band2_mid[0];
    out.e_band2_end += slots[p].band2_end[0];
    out.e_norm2_mid += slots[p].norm2_mid[0];
    out.e_norm2_end += slots[p].norm2_end[0];
    for (double c : slots[p].cost_steps) out.e_cost += c;
  }
  out.e_norm2_start /= n_paths;
  out.e_band2_mid /= n_paths;
  out.e_band2_end /= n_paths;
  out.e_norm2_mid /= n_paths;
  out.e_norm2_end /= n_paths;
  out.e_cost /= n_paths;
  return out;
}

PartialControlPath partial_spectral_control_path(
    const ModalState& x0, double r, double tau, double epsilon,
    const SpectralBasis& basis, const SystemCoefficients& coeffs,
    const ControlOperator& ctrl_op, const BrownianPath& path,
    const RiccatiOptions& ropts) {
  if (r > basis.mus()[basis.n_modes() - 1] * (1.0 + 1e-12))
    throw InvalidArgument("r", "band extends beyond the retained modes");
  const int n_steps = path.n_steps();
  const double dt = path.dt;
  if (std::abs(n_steps * dt - tau) > 1e-9 * tau)
    throw InvalidArgument("path", "path horizon must equal tau");

  PartialControlPath out;
  out.policy.offset = 0;
  out.policy.gains.assign(n_steps, Eigen::MatrixXd());
  const int k1 = n_steps / 2;
  RiccatiProblem prob =
      make_band_lq_problem(basis, coeffs, ctrl_op, r, k1 * dt, epsilon);
  RiccatiSolution sol = solve_riccati_backward(prob, ropts);
  for (int k = 0; k < k1; ++k)
    out.policy.gains[k] = feedback_gain(sol.at(k * dt), basis.n_modes());

  ModalState s = x0;
  Eigen::VectorXd inj;
  for (int k = 0; k < n_steps; ++k) {
    StepExtras ex;
    if (out.policy.active(k)) {
      Eigen::VectorXd u = out.policy.eval(k, s);
      inj = ctrl_op.inject(u);
      ex.control_inject = &inj;
      out.cost += dt * u.dot(inj);
    }
    step_coupled(s, basis, coeffs, k * dt, dt, path.increments[k], ex);
    if (k + 1 == k1) out.mid_state = s;
  }
  out.end_state = s;
  return out;
}

CostCurveReport cost_curve(const std::vector<double>& T_values,
                           const ModalState& x0, const SpectralBasis& basis,
                           const SystemCoefficients& coeffs,
                           const ControlOperator& ctrl_op,
                           const LRSynthesisOptions& base_opts,
                           double beta_base) {
  if (T_values.size() < 3)
    throw InvalidArgument("T_values", "need at least three horizons");
  CostCurveReport rep;
  for (double T : T_values) {
    const double beta0 = beta_base / (T * T);
    LRSynthesisReport r =
        lebeau_robbiano_synthesize(x0, T, beta0, basis, coeffs, ctrl_op, base_opts);
    CostCurvePoint pt;
    pt.T = T;
    pt.total_cost = r.total_cost;
    pt.beta_used = r.beta_used;
    pt.ok = r.contracting && r.total_cost > 0.0;
    rep.points.push_back(pt);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int m = 0;
  for (const CostCurvePoint& pt : rep.points) {
    if (!pt.ok) continue;
    const double x = 1.0 / pt.T, y = std::log(pt.total_cost);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++m;
  }
  rep.all_ok = (m == static_cast<int>(rep.points.size()));
  if (m >= 2) {
    const double denom = m * sxx - sx * sx;
    rep.c_hat = (m * sxy - sx * sy) / denom;
    rep.intercept = (sy - rep.c_hat * sx) / m;
    const double cn = m * sxy - sx * sy;
    const double cd = std::sqrt((m * sxx - sx * sx) * (m * syy - sy * sy));
    rep.r_squared = cd > 0 ? (cn / cd) * (cn / cd) : 1.0;
  } else {
    rep.c_hat = std::nan("");
  }
  return rep;
}

}  // namespace kshc
