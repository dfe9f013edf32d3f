#ifndef KSHC_SDE_HPP
#define KSHC_SDE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "kshc/basis.hpp"
#include "kshc/cutoff.hpp"
#include "kshc/rng.hpp"
#include "kshc/weights.hpp"

namespace kshc {

/// Bounded scalar function of time; constant unless a callable is attached.
struct Coefficient {
  double value = 0.0;
  std::function<double(double)> fn;
  double sup = 0.0;

  static Coefficient constant(double c) {
    Coefficient k;
    k.value = c;
    k.sup = std::abs(c);
    return k;
  }
  static Coefficient of(std::function<double(double)> f, double sup_norm) {
    Coefficient k;
    k.fn = std::move(f);
    k.sup = sup_norm;
    return k;
  }
  double operator()(double t) const { return fn ? fn(t) : value; }
};

/**
 * Coefficients of the coupled system
 *   dy + y_xxxx dt = (a1 y + a2 z + control - F - a f(y,y_x)) dt + (b1 y + b2 z) dW
 *   dz - z_xx  dt  = (a3 y + a4 z) dt + b3 z dW
 * Defaults reproduce the base model: a3 = 1, other couplings zero.
 */
struct SystemCoefficients {
  Coefficient b1 = Coefficient::constant(0.0);
  Coefficient b2 = Coefficient::constant(0.0);
  Coefficient b3 = Coefficient::constant(0.0);
  int a = 0;  // nonlinearity switch, 0 or 1
  double a1 = 0.0, a2 = 0.0, a3 = 1.0, a4 = 0.0;

  static SystemCoefficients with_b(double b1v, double b2v, double b3v) {
    SystemCoefficients c;
    c.b1 = Coefficient::constant(b1v);
    c.b2 = Coefficient::constant(b2v);
    c.b3 = Coefficient::constant(b3v);
    return c;
  }

  /// sigma = 1 + 4 (|b1|^2 + |b2|^2 + |b3|^2) from the dissipation bound.
  double sigma() const {
    return 1.0 + 4.0 * (b1.sup * b1.sup + b2.sup * b2.sup + b3.sup * b3.sup);
  }
};

/// Control injection through the indicator of D0: modal field u maps to the
/// drift contribution M u, with M the D0-restricted mass matrix; the running
/// cost of u is u' M u = int_{D0} |h|^2.
class ControlOperator {
 public:
  ControlOperator(const SpectralBasis& basis, double lo, double hi)
      : lo_(lo), hi_(hi), mass_(interval_mass_matrix(basis.n_modes(), lo, hi)) {}

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const Eigen::MatrixXd& mass() const { return mass_; }
  Eigen::VectorXd inject(const Eigen::VectorXd& u) const { return mass_ * u; }
  double cost_rate(const Eigen::VectorXd& u) const { return u.dot(mass_ * u); }

 private:
  double lo_, hi_;
  Eigen::MatrixXd mass_;
};

/// Adapted control: one feedback gain per time step, u_k = G_k [y;z].
/// An empty gain matrix means no control at that step.
struct ControlPolicy {
  int offset = 0;  // global step index of gains[0]
  std::vector<Eigen::MatrixXd> gains;

  bool active(int k) const {
    const int i = k - offset;
    return i >= 0 && i < static_cast<int>(gains.size()) && gains[i].size() > 0;
  }
  Eigen::VectorXd eval(int k, const ModalState& s) const {
    const Eigen::MatrixXd& g = gains[k - offset];
    const int n = s.n_modes();
    return g.leftCols(n) * s.y + g.rightCols(n) * s.z;
  }
};

/// Optional per-step inputs of the low-level stepper.
struct StepExtras {
  const Eigen::VectorXd* control_inject = nullptr;  // M u, adds to y drift
  const Eigen::VectorXd* source = nullptr;          // F, enters y drift as -F
  const Eigen::VectorXd* f_nonlinear = nullptr;     // f_R, enters y drift as -f_R
  const Eigen::VectorXd* drift_y = nullptr;         // extra additive drift
  const Eigen::VectorXd* drift_z = nullptr;
  const Eigen::VectorXd* noise_y = nullptr;  // additive noise fields
  const Eigen::VectorXd* noise_z = nullptr;
};

/**
 * One semi-implicit Euler-Maruyama step. The stiff diagonal drift (-mu_i on
 * y, -lambda_i on z) is implicit; couplings, inputs and noise are explicit.
 * The y -> z coupling uses the updated y, which matches the exact flow to
 * O(dt^2) per step. Affine in (state, inputs) for fixed dW.
 */
void step_coupled(ModalState& s, const SpectralBasis& basis,
                  const SystemCoefficients& coeffs, double t, double dt,
                  double dW, const StepExtras& extras = {});

ModalState step_linear(const ModalState& s, const SpectralBasis& basis,
                       const SystemCoefficients& coeffs,
                       const Eigen::VectorXd* control_inject, double t,
                       double dt, double dW);

/// Linear step plus the truncated transport drift -phi_R(xt_running) y y_x.
ModalState step_semilinear(const ModalState& s, const SpectralBasis& basis,
                           const SystemCoefficients& coeffs,
                           const Eigen::VectorXd* control_inject, double t,
                           double dt, double dW, const Cutoff& cutoff,
                           double xt_running, const ConvectionOp& conv);

/// Running trajectory norm: sup-in-time weighted H2/H1 terms plus integrated
/// weighted H4/H2 terms, all divided by rho_hat.
struct XtAccumulator {
  double sup_y2 = 0, sup_z2 = 0, int_y4 = 0, int_z2 = 0;
  double prev_y4 = 0, prev_z2 = 0;
  bool have_prev = false;
  bool blowup = false;

  void add(const ModalState& s, double log_rho_hat, double dt_since_prev,
           const SpectralBasis& basis);
  double value() const { return std::sqrt(sup_y2 + sup_z2 + int_y4 + int_z2); }
  double value2() const { return sup_y2 + sup_z2 + int_y4 + int_z2; }
};

/// One sample path with everything recorded (single-path analysis / dumps).
struct TrajectoryRecord {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> times;                  // n_steps + 1 entries
  std::vector<ModalState> states;             // aligned with times
  std::vector<Eigen::VectorXd> controls;      // modal u per step (may be empty)
  std::vector<double> cost_increments;        // dt * u'Mu per step
  std::vector<double> xt_running;             // aligned with times when tracked

  int n_steps() const { return static_cast<int>(times.size()) - 1; }
  double total_cost() const;
};

struct SimulateOptions {
  double t0 = 0.0;
  double cutoff_R = 0.0;                          // used when coeffs.a == 1
  const SourceWeightParams* xt_weights = nullptr;  // track X_t when given
};

/// Drive one path with optional policy and source series (F per step).
TrajectoryRecord simulate(const ModalState& x0, const SpectralBasis& basis,
                          const SystemCoefficients& coeffs,
                          const BrownianPath& path,
                          const ControlPolicy* policy,
                          const ControlOperator* ctrl_op,
                          const std::vector<Eigen::VectorXd>* source,
                          const SimulateOptions& opts = {});

struct XtNormResult {
  double value = 0.0;
  bool blowup = false;
};

/// X_t norm of a recorded trajectory at time t (grid sup + trapezoid).
XtNormResult xt_norm(const TrajectoryRecord& traj, const SourceWeightParams& p,
                     double t, const SpectralBasis& basis);

struct DecayFitReport {
  double measured_rate = 0.0;  // fitted decay rate of E(|y|^2+|z|^2)
  double gamma_bound = 0.0;    // 2 lambda_{k+1} - sigma
  double r_squared = 0.0;
  bool small_ensemble_warning = false;
  std::vector<double> times;
  std::vector<double> log_mean_norm2;
};

/// Free-evolution ensemble decay fit for data supported above mode k_band.
DecayFitReport free_decay_rate(const SpectralBasis& basis,
                               const SystemCoefficients& coeffs, int k_band,
                               const ModalState& data, int ensemble,
                               std::uint64_t seed, double T, double dt,
                               int workers, double fit_start_fraction = 0.25);

}  // namespace kshc

#endif
