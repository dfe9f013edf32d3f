#include "kshc/nonlinear.hpp"

#include <cmath>

#include "kshc/ensemble.hpp"
#include "kshc/errors.hpp"
#include "kshc/rng.hpp"

namespace kshc {

Eigen::VectorXd f_R_eval(const Eigen::VectorXd& y_modes, double xt_value,
                         const Cutoff& cutoff, const ConvectionOp& conv) {
  const double scale = cutoff.eval(xt_value);
  if (scale == 0.0) return Eigen::VectorXd::Zero(y_modes.size());
  return scale * conv.apply(y_modes);
}

LipschitzReport lipschitz_probe(const TrajectoryRecord& a,
                                const TrajectoryRecord& b, double R,
                                const SourceWeightParams& wp,
                                const SpectralBasis& basis) {
  if (a.times.size() != b.times.size())
    throw InvalidArgument("trajectories", "grids do not match");
  if (a.xt_running.empty() || b.xt_running.empty())
    throw InvalidArgument("trajectories", "need tracked running X_t values");

  ConvectionOp conv(basis);
  Cutoff cutoff(R);
  XtAccumulator diff_acc;
  LipschitzReport rep;
  double c_max = 0.0;
  for (std::size_t s = 0; s < a.times.size(); ++s) {
    const double t = a.times[s];
    if (t >= 0.98 * wp.T) break;  // stay clear of the weight singularity
    const ModalState& sa = a.states[s];
    const ModalState& sb = b.states[s];
    ModalState d(sa.n_modes());
    d.y = sa.y - sb.y;
    d.z = sa.z - sb.z;
    diff_acc.add(d, wp.log_rho_hat(t), s == 0 ? 0.0 : a.times[s] - a.times[s - 1], basis);

    const Eigen::VectorXd fa = f_R_eval(sa.y, a.xt_running[s], cutoff, conv);
    const Eigen::VectorXd fb = f_R_eval(sb.y, b.xt_running[s], cutoff, conv);
    const double lhs = (fa - fb).norm() * std::exp(-wp.log_rho(t));
    const double h1 = std::sqrt(sobolev_norm2(d, 1, Component::Y, basis)) *
                      std::exp(-wp.log_rho_hat(t));
    const double rhs = R * (diff_acc.value() + h1);
    if (lhs > 0.0 && rhs > 0.0) c_max = std::max(c_max, lhs / rhs);
    ++rep.grid_points;
  }
  rep.c_fitted = c_max;
  return rep;
}

FixedPointPathRun fixed_point_solve_path(const ModalState& x0, double R,
                                         const SourceTermPlan& plan,
                                         const BrownianPath& path,
                                         const SpectralBasis& basis,
                                         const SystemCoefficients& coeffs,
                                         const ControlOperator& ctrl_op,
                                         const ConvectionOp& conv,
                                         const FixedPointOptions& opts) {
  if (!(R > 0.0)) throw InvalidArgument("R", "truncation radius must be positive");
  const int kc = plan.k_step[plan.K];
  const int n = basis.n_modes();
  Cutoff cutoff(R);

  FixedPointPathRun run;
  std::vector<Eigen::VectorXd> F(kc, Eigen::VectorXd::Zero(n));
  std::vector<Eigen::VectorXd> F_new(kc);
  PathSourceResult psr;

  auto s_distance = [&](const std::vector<Eigen::VectorXd>& f1,
                        const std::vector<Eigen::VectorXd>& f2) {
    double acc = 0.0;
    for (int s = 0; s < kc; ++s) {
      const double d = (f1[s] - f2[s]).norm() * std::exp(-plan.log_rho_t[s]);
      acc += plan.dt * d * d;
    }
    return std::sqrt(acc);
  };

  bool converged = false;
  int it = 0;
  while (it < opts.max_iters) {
    ++it;
    run_source_path(plan, x0, &F, path, basis, coeffs, ctrl_op, psr,
                    &run.states, &run.xt_running, &run.controls);
    for (int s = 0; s < kc; ++s)
      F_new[s] = f_R_eval(run.states[s].y, run.xt_running[s], cutoff, conv);
    const double d = s_distance(F_new, F);
    run.summary.s_dist.push_back(d);

    const double d1 = run.summary.s_dist.front();
    if (d == 0.0 || (it >= opts.min_iters && d <= opts.s_tol_rel * std::max(d1, 1e-300))) {
      converged = true;
      break;
    }
    // three consecutive non-decreasing ratios mean the map is not contracting
    const std::size_t m = run.summary.s_dist.size();
    if (m >= 4) {
      bool stuck = true;
      for (std::size_t q = m - 4; q + 1 < m; ++q)
        if (run.summary.s_dist[q + 1] < run.summary.s_dist[q]) stuck = false;
      if (stuck && run.summary.s_dist[m - 1] > opts.s_tol_rel * d1) break;
    }
    F.swap(F_new);
  }

  run.source = std::move(F);
  run.summary.converged = converged;
  run.summary.iters = it;
  for (std::size_t q = 1; q < run.summary.s_dist.size(); ++q) {
    const double prev = run.summary.s_dist[q - 1];
    if (prev > 0.0)
      run.summary.max_ratio =
          std::max(run.summary.max_ratio, run.summary.s_dist[q] / prev);
  }
  run.summary.data_norm2 = sobolev_norm2(x0, 2, Component::Y, basis) +
                           sobolev_norm2(x0, 1, Component::Z, basis);
  run.summary.yT_norm2 = run.states.back().y.squaredNorm();
  run.summary.final_norm2 = run.states.back().norm2();
  const double xt = run.xt_running.back();
  run.summary.xT_norm2 = xt * xt;
  return run;
}

FixedPointReport fixed_point_solve(const DataGenerator& data, double R,
                                   const SourceWeightParams& wp,
                                   const SpectralBasis& basis,
                                   const SystemCoefficients& coeffs,
                                   const ControlOperator& ctrl_op,
                                   const FixedPointOptions& opts) {
  SourceTermPlan plan = build_source_term_plan(wp, basis, coeffs, ctrl_op, opts.st);
  ConvectionOp conv(basis);

  FixedPointReport rep;
  rep.T = wp.T;
  rep.R = R;
  rep.K = plan.K;
  rep.dt = plan.dt;
  rep.paths = opts.n_paths;
  rep.per_path.resize(opts.n_paths);

  for_each_path(opts.n_paths, opts.workers, [&](int p) {
    BrownianPath path =
        BrownianPath::generate(plan.dt, plan.n_steps, path_seed(opts.seed, p));
    FixedPointPathRun run = fixed_point_solve_path(
        data(p), R, plan, path, basis, coeffs, ctrl_op, conv, opts);
    rep.per_path[p] = std::move(run.summary);
  });

  rep.all_converged = true;
  for (const FixedPointPathSummary& s : rep.per_path) {
    rep.all_converged = rep.all_converged && s.converged;
    rep.max_contraction_ratio = std::max(rep.max_contraction_ratio, s.max_ratio);
    rep.e_data_norm2 += s.data_norm2;
    rep.e_yT_norm2 += s.yT_norm2;
    rep.e_xT_norm2 += s.xT_norm2;
    rep.e_final_norm2 += s.final_norm2;
  }
  rep.e_data_norm2 /= opts.n_paths;
  rep.e_yT_norm2 /= opts.n_paths;
  rep.e_xT_norm2 /= opts.n_paths;
  rep.e_final_norm2 /= opts.n_paths;
  return rep;
}

double calibrate_certificate_constant(const SourceWeightParams& wp,
                                      const SpectralBasis& basis,
                                      const SystemCoefficients& coeffs,
                                      const ControlOperator& ctrl_op,
                                      int paths, std::uint64_t seed,
                                      const FixedPointOptions& fp_opts,
                                      double margin) {
  const int n = basis.n_modes();
  const double pilot_scale = 1e-6;
  DataGenerator gen = [&, n](int p) {
    GaussianRng rng(path_seed(seed ^ 0xA5A5A5A5ULL, p));
    ModalState s(n);
    for (int i = 0; i < n; ++i) {
      s.y[i] = rng.normal();
      s.z[i] = rng.normal();
    }
    const double nrm = std::sqrt(sobolev_norm2(s, 2, Component::Y, basis) +
                                 sobolev_norm2(s, 1, Component::Z, basis));
    s.y *= pilot_scale / nrm;
    s.z *= pilot_scale / nrm;
    return s;
  };
  FixedPointOptions opts = fp_opts;
  opts.n_paths = paths;
  opts.seed = seed;
  FixedPointReport rep =
      fixed_point_solve(gen, 1e300, wp, basis, coeffs, ctrl_op, opts);
  // worst pathwise ratio, so the Markov step has honest headroom
  double worst = rep.e_xT_norm2 / rep.e_data_norm2;
  for (const FixedPointPathSummary& s : rep.per_path)
    worst = std::max(worst, s.xT_norm2 / s.data_norm2);
  return margin * 0.5 * wp.T * std::log(std::max(worst, 1.0));
}

CertificateReport statistical_certificate(double epsilon, double c_hat,
                                          const SourceWeightParams& wp,
                                          const SpectralBasis& basis,
                                          const SystemCoefficients& coeffs,
                                          const ControlOperator& ctrl_op,
                                          int paths, std::uint64_t seed,
                                          const FixedPointOptions& fp_opts) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw InvalidArgument("epsilon", "must lie in (0,1)");
  CertificateReport rep;
  rep.epsilon = epsilon;
  rep.T = wp.T;
  rep.c_hat = c_hat;
  rep.log_R = -c_hat / wp.T;
  rep.R = std::exp(rep.log_R);
  rep.log_delta = -2.0 * c_hat / wp.T + 0.5 * std::log(epsilon);
  rep.delta = std::exp(rep.log_delta);
  rep.paths = paths;
  rep.ci_warning = (paths < 100);
  if (rep.R == 0.0 || rep.delta == 0.0)
    throw InvalidArgument("c_hat", "R or delta underflow; reduce c_hat or raise T");

  const int n = basis.n_modes();
  DataGenerator gen = [&, n](int p) {
    GaussianRng rng(path_seed(seed ^ 0x5bd1e995ULL, p));
    ModalState s(n);
    for (int i = 0; i < n; ++i) {
      s.y[i] = rng.normal();
      s.z[i] = rng.normal();
    }
    const double nrm = std::sqrt(sobolev_norm2(s, 2, Component::Y, basis) +
                                 sobolev_norm2(s, 1, Component::Z, basis));
    s.y *= rep.delta / nrm;
    s.z *= rep.delta / nrm;
    return s;
  };

  FixedPointOptions opts = fp_opts;
  opts.n_paths = paths;
  opts.seed = seed;
  FixedPointReport fp =
      fixed_point_solve(gen, rep.R, wp, basis, coeffs, ctrl_op, opts);

  rep.all_converged = fp.all_converged;
  rep.empirical_mean_XT2 = fp.e_xT_norm2;
  const double R2 = rep.R * rep.R;
  int count = 0;
  for (const FixedPointPathSummary& s : fp.per_path)
    if (s.xT_norm2 > R2) ++count;
  rep.exceedance_count = count;
  rep.exceedance_fraction = static_cast<double>(count) / paths;
  rep.markov_bound = rep.empirical_mean_XT2 / R2;
  const double f = rep.exceedance_fraction;
  rep.binomial_ci = std::sqrt(std::max(f * (1.0 - f), 0.0) / paths);
  const double slack = 2.0 * rep.binomial_ci + 1.0 / paths;
  rep.markov_ok = (f <= rep.markov_bound + slack);
  rep.epsilon_ok = (f <= epsilon + slack);
  return rep;
}

}  // namespace kshc
