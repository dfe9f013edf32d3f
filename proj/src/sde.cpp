#include "kshc/sde.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "kshc/ensemble.hpp"
#include "kshc/errors.hpp"

namespace kshc {

void step_coupled(ModalState& s, const SpectralBasis& basis,
                  const SystemCoefficients& coeffs, double t, double dt,
                  double dW, const StepExtras& ex) {
  const int n = s.n_modes();
  if (n != basis.n_modes()) throw InvalidArgument("state", "mode count mismatch");
  const double b1 = coeffs.b1(t), b2 = coeffs.b2(t), b3 = coeffs.b3(t);

  Eigen::ArrayXd drift_y = coeffs.a1 * s.y.array() + coeffs.a2 * s.z.array();
  if (ex.control_inject) drift_y += ex.control_inject->array();
  if (ex.source) drift_y -= ex.source->array();
  if (ex.f_nonlinear) drift_y -= ex.f_nonlinear->array();
  if (ex.drift_y) drift_y += ex.drift_y->array();

  Eigen::ArrayXd noise_y = b1 * s.y.array() + b2 * s.z.array();
  if (ex.noise_y) noise_y += ex.noise_y->array();

  Eigen::ArrayXd y_new = (s.y.array() + dt * drift_y + dW * noise_y) /
                         (1.0 + dt * basis.mus().array());

  Eigen::ArrayXd drift_z = coeffs.a3 * y_new + coeffs.a4 * s.z.array();
  if (ex.drift_z) drift_z += ex.drift_z->array();
  Eigen::ArrayXd noise_z = b3 * s.z.array();
  if (ex.noise_z) noise_z += ex.noise_z->array();

  s.z = ((s.z.array() + dt * drift_z + dW * noise_z) /
         (1.0 + dt * basis.lambdas().array()))
            .matrix();
  s.y = y_new.matrix();
}

ModalState step_linear(const ModalState& s, const SpectralBasis& basis,
                       const SystemCoefficients& coeffs,
                       const Eigen::VectorXd* control_inject, double t,
                       double dt, double dW) {
  ModalState out = s;
  StepExtras ex;
  ex.control_inject = control_inject;
  step_coupled(out, basis, coeffs, t, dt, dW, ex);
  return out;
}

ModalState step_semilinear(const ModalState& s, const SpectralBasis& basis,
                           const SystemCoefficients& coeffs,
                           const Eigen::VectorXd* control_inject, double t,
                           double dt, double dW, const Cutoff& cutoff,
                           double xt_running, const ConvectionOp& conv) {
  ModalState out = s;
  StepExtras ex;
  ex.control_inject = control_inject;
  const double scale = cutoff.eval(xt_running);
  Eigen::VectorXd f;
  if (scale > 0.0) {
    f = scale * conv.apply(s.y);
    ex.f_nonlinear = &f;
  }
  step_coupled(out, basis, coeffs, t, dt, dW, ex);
  return out;
}

void XtAccumulator::add(const ModalState& s, double log_rho_hat,
                        double dt_since_prev, const SpectralBasis& basis) {
  auto weighted = [&](double norm2) -> double {
    if (norm2 <= 0.0) return 0.0;
    const double lw = std::log(norm2) - 2.0 * log_rho_hat;
    if (lw > 700.0) {
      blowup = true;
      return std::numeric_limits<double>::infinity();
    }
    return std::exp(lw);
  };
  const double wy2 = weighted(sobolev_norm2(s, 2, Component::Y, basis));
  const double wz1 = weighted(sobolev_norm2(s, 1, Component::Z, basis));
  if (wy2 > sup_y2) sup_y2 = wy2;
  if (wz1 > sup_z2) sup_z2 = wz1;
  const double y4 = weighted(sobolev_norm2(s, 4, Component::Y, basis));
  const double z2 = weighted(sobolev_norm2(s, 2, Component::Z, basis));
  if (have_prev && dt_since_prev > 0.0) {
    int_y4 += 0.5 * dt_since_prev * (prev_y4 + y4);
    int_z2 += 0.5 * dt_since_prev * (prev_z2 + z2);
  }
  prev_y4 = y4;
  prev_z2 = z2;
  have_prev = true;
}

double TrajectoryRecord::total_cost() const {
  double acc = 0.0;
  for (double c : cost_increments) acc += c;
  return acc;
}

TrajectoryRecord simulate(const ModalState& x0, const SpectralBasis& basis,
                          const SystemCoefficients& coeffs,
                          const BrownianPath& path, const ControlPolicy* policy,
                          const ControlOperator* ctrl_op,
                          const std::vector<Eigen::VectorXd>* source,
                          const SimulateOptions& opts) {
  if (x0.n_modes() != basis.n_modes())
    throw InvalidArgument("x0", "mode count mismatch");
  if (policy && !ctrl_op)
    throw InvalidArgument("ctrl_op", "a policy needs a control operator");
  const bool nonlinear = (coeffs.a == 1);
  if (nonlinear && !(opts.cutoff_R > 0.0))
    throw InvalidArgument("cutoff_R", "semilinear run needs a truncation radius");
  if (nonlinear && !opts.xt_weights)
    throw InvalidArgument("xt_weights",
                          "semilinear run needs weights for the running X_t value");
  const int n_steps = path.n_steps();
  if (source && static_cast<int>(source->size()) < n_steps)
    throw InvalidArgument("source", "series shorter than the path");

  TrajectoryRecord rec;
  rec.t0 = opts.t0;
  rec.dt = path.dt;
  rec.times.reserve(n_steps + 1);
  rec.states.reserve(n_steps + 1);
  rec.cost_increments.assign(n_steps, 0.0);
  if (policy) rec.controls.assign(n_steps, Eigen::VectorXd());

  std::optional<ConvectionOp> conv;
  if (nonlinear) conv.emplace(basis);
  Cutoff cutoff(nonlinear ? opts.cutoff_R : 1.0);

  XtAccumulator acc;
  const bool track_xt = (opts.xt_weights != nullptr);
  if (track_xt) rec.xt_running.reserve(n_steps + 1);

  ModalState s = x0;
  rec.times.push_back(opts.t0);
  rec.states.push_back(s);
  if (track_xt) {
    acc.add(s, opts.xt_weights->log_rho_hat(std::min(opts.t0, opts.xt_weights->T)), 0.0, basis);
    rec.xt_running.push_back(acc.value());
  }

  Eigen::VectorXd f_nl, inj;
  for (int k = 0; k < n_steps; ++k) {
    const double t = opts.t0 + k * path.dt;
    StepExtras ex;
    if (policy && policy->active(k)) {
      Eigen::VectorXd u = policy->eval(k, s);
      inj = ctrl_op->inject(u);
      ex.control_inject = &inj;
      rec.cost_increments[k] = path.dt * u.dot(inj);
      rec.controls[k] = std::move(u);
    }
    if (source) ex.source = &(*source)[k];
    if (nonlinear) {
      const double scale = cutoff.eval(acc.value());
      if (scale > 0.0) {
        f_nl = scale * conv->apply(s.y);
        ex.f_nonlinear = &f_nl;
      }
    }
    step_coupled(s, basis, coeffs, t, path.dt, path.increments[k], ex);
    if (!s.all_finite())
      throw NumericsError("non-finite state at step " + std::to_string(k + 1));
    rec.times.push_back(opts.t0 + (k + 1) * path.dt);
    rec.states.push_back(s);
    if (track_xt) {
      const double tn = std::min(opts.t0 + (k + 1) * path.dt, opts.xt_weights->T);
      acc.add(s, opts.xt_weights->log_rho_hat(tn), path.dt, basis);
      rec.xt_running.push_back(acc.value());
    }
  }
  return rec;
}

XtNormResult xt_norm(const TrajectoryRecord& traj, const SourceWeightParams& p,
                     double t, const SpectralBasis& basis) {
  if (traj.times.empty()) throw InvalidArgument("trajectory", "empty record");
  const double tol = 0.5 * traj.dt;
  if (t < traj.times.front() - tol || t > traj.times.back() + tol)
    throw InvalidArgument("t", "outside the recorded range");
  XtAccumulator acc;
  double prev_t = traj.times.front();
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const double tk = traj.times[k];
    if (tk > t + tol) break;
    acc.add(traj.states[k], p.log_rho_hat(std::min(tk, p.T)),
            k == 0 ? 0.0 : tk - prev_t, basis);
    prev_t = tk;
  }
  return XtNormResult{acc.value(), acc.blowup};
}

DecayFitReport free_decay_rate(const SpectralBasis& basis,
                               const SystemCoefficients& coeffs, int k_band,
                               const ModalState& data, int ensemble,
                               std::uint64_t seed, double T, double dt,
                               int workers, double fit_start_fraction) {
  if (k_band < 0 || k_band >= basis.n_modes())
    throw InvalidArgument("k_band", "needs 0 <= k < n_modes");
  for (int i = 0; i < k_band; ++i) {
    if (data.y[i] != 0.0 || data.z[i] != 0.0)
      throw InvalidArgument("data", "first k modes must vanish in both components");
  }
  if (ensemble < 1) throw InvalidArgument("ensemble", "needs at least one path");

  DecayFitReport rep;
  rep.small_ensemble_warning = (ensemble < 50);
  rep.gamma_bound = 2.0 * basis.lambda(k_band + 1) - coeffs.sigma();

  const int n_steps = static_cast<int>(std::llround(T / dt));
  std::vector<std::vector<double>> norm2(ensemble);
  for_each_path(ensemble, workers, [&](int p) {
    BrownianPath path = BrownianPath::generate(dt, n_steps, path_seed(seed, p));
    ModalState s = data;
    std::vector<double>& slot = norm2[p];
    slot.resize(n_steps + 1);
    slot[0] = s.norm2();
    for (int k = 0; k < n_steps; ++k) {
      step_coupled(s, basis, coeffs, k * dt, dt, path.increments[k]);
      slot[k + 1] = s.norm2();
    }
  });

  rep.times.resize(n_steps + 1);
  rep.log_mean_norm2.resize(n_steps + 1);
  for (int k = 0; k <= n_steps; ++k) {
    double mean = 0.0;
    for (int p = 0; p < ensemble; ++p) mean += norm2[p][k];
    mean /= ensemble;
    rep.times[k] = k * dt;
    rep.log_mean_norm2[k] = std::log(std::max(mean, 1e-300));
  }

  const int i0 = static_cast<int>(fit_start_fraction * n_steps);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const int m = n_steps + 1 - i0;
  for (int k = i0; k <= n_steps; ++k) {
    sx += rep.times[k];
    sy += rep.log_mean_norm2[k];
    sxx += rep.times[k] * rep.times[k];
    sxy += rep.times[k] * rep.log_mean_norm2[k];
    syy += rep.log_mean_norm2[k] * rep.log_mean_norm2[k];
  }
  const double denom = m * sxx - sx * sx;
  const double slope = (m * sxy - sx * sy) / denom;
  rep.measured_rate = -slope;
  const double corr_num = m * sxy - sx * sy;
  const double corr_den = std::sqrt((m * sxx - sx * sx) * (m * syy - sy * sy));
  rep.r_squared = corr_den > 0 ? (corr_num / corr_den) * (corr_num / corr_den) : 1.0;
  return rep;
}

}  // namespace kshc
